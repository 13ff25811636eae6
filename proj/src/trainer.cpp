#include "dcc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "dcc/checkpoint.hpp"
#include "dcc/constraint_losses.hpp"
#include "dcc/error.hpp"
#include "dcc/metrics.hpp"

namespace dcc {

namespace fs = std::filesystem;

InitMode parse_init_mode(const std::string& text) {
  if (text == "raw+rand") return InitMode::raw_rand;
  if (text == "raw+kmeans") return InitMode::raw_kmeans;
  if (text == "ae+rand") return InitMode::ae_rand;
  if (text == "ae+kmeans") return InitMode::ae_kmeans;
  throw ArgumentError("unknown init mode '" + text + "' (expected raw+rand, raw+kmeans, ae+rand or ae+kmeans)");
}

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::raw_rand: return "raw+rand";
    case InitMode::raw_kmeans: return "raw+kmeans";
    case InitMode::ae_rand: return "ae+rand";
    case InitMode::ae_kmeans: return "ae+kmeans";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (clusters < 1) throw ArgumentError("clusters must be at least 1");
  if (max_epochs < 1) throw ArgumentError("max_epochs must be at least 1");
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (constraint_batch_size < 1) throw ArgumentError("constraint_batch_size must be at least 1");
  if (kmeans_restarts < 1) throw ArgumentError("kmeans_restarts must be at least 1");
  if (kmeans_max_iters < 1) throw ArgumentError("kmeans_max_iters must be at least 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (!(lambda_ml > 0.0)) throw ArgumentError("lambda_ml must be positive");
  if (!(triplet_margin > 0.0)) throw ArgumentError("triplet_margin must be positive");
  if (!(convergence_tol > 0.0 && convergence_tol < 1.0)) throw ArgumentError("convergence_tol must lie in (0, 1)");
  if (!(horn_tau > 0.0 && horn_tau < 1.0)) throw ArgumentError("horn_tau must lie in (0, 1)");
}

bool has_converged(const Labels& previous, const Labels& current, double tol) {
  if (previous.size() != current.size()) {
    throw ArgumentError("has_converged: labelings differ in length (" + std::to_string(previous.size()) + " vs " +
                        std::to_string(current.size()) + ")");
  }
  if (current.empty()) return true;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < current.size(); ++i) changed += previous[i] != current[i];
  return static_cast<double>(changed) / static_cast<double>(current.size()) < tol;
}

namespace {

void put_series(std::ostringstream& out, const char* name, const std::vector<double>& values) {
  if (values.empty()) return;
  out << "trace." << name << " =";
  for (double v : values) out << ' ' << v;
  out << '\n';
}

}  // namespace

std::string TrainReport::to_text() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "algorithm = " << algorithm << '\n';
  out << "epochs_run = " << epochs_run << '\n';
  out << "converged = " << (converged ? "true" : "false") << '\n';
  if (accuracy) out << "accuracy = " << *accuracy << '\n';
  if (nmi) out << "nmi = " << *nmi << '\n';
  put_series(out, "clustering", trace.clustering);
  put_series(out, "reconstruction", trace.reconstruction);
  put_series(out, "difficulty", trace.difficulty);
  put_series(out, "global_size", trace.global_size);
  put_series(out, "cardinality", trace.cardinality);
  put_series(out, "pairwise", trace.pairwise);
  put_series(out, "triplet", trace.triplet);
  put_series(out, "label_change", trace.label_change);
  return out.str();
}

TrainState initialize(const Dataset& dataset, const TrainConfig& config,
                      const std::optional<AutoencoderModel>& pretrained) {
  config.validate();
  const std::size_t n = dataset.size();
  const std::size_t k = config.clusters;
  if (k > n) {
    throw ArgumentError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(n) + " instances");
  }
  SeededRng rng(config.seed);
  TrainState state;
  const bool use_ae = config.init_mode == InitMode::ae_rand || config.init_mode == InitMode::ae_kmeans;
  if (use_ae) {
    if (!pretrained) throw ArgumentError("init mode " + to_string(config.init_mode) + " needs a pretrained autoencoder");
    state.autoencoder = *pretrained;
  } else {
    auto dims = config.dims.empty() ? default_dims(dataset.dim()) : config.dims;
    if (dims.front() != dataset.dim()) {
      throw DimensionError("network input width " + std::to_string(dims.front()) + " does not match " +
                           std::to_string(dataset.dim()) + " features");
    }
    auto net_rng = rng.fork(1);
    state.autoencoder = AutoencoderModel::random(dims, net_rng);
  }
  if (state.autoencoder.input_width() != dataset.dim()) {
    throw DimensionError("autoencoder expects " + std::to_string(state.autoencoder.input_width()) +
                         " features, dataset has " + std::to_string(dataset.dim()));
  }

  const Matrix z = encode(state.autoencoder, dataset.features);
  auto centroid_rng = rng.fork(2);
  if (config.init_mode == InitMode::raw_kmeans || config.init_mode == InitMode::ae_kmeans) {
    state.clusters.centroids = kmeans(z, k, config.kmeans_restarts, config.kmeans_max_iters, centroid_rng).centroids;
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + centroid_rng.uniform_index(n - i)]);
    order.resize(k);
    state.clusters.centroids = gather_rows(z, order);
  }
  return state;
}

namespace {

enum class RecordKind : std::uint8_t { must_link, cannot_link, horn };

struct Record {
  RecordKind kind;
  std::size_t index;
};

ParamList trainable(TrainState& state) {
  auto params = parameter_spans(state.autoencoder.encoder);
  auto dec = parameter_spans(state.autoencoder.decoder);
  params.insert(params.end(), dec.begin(), dec.end());
  params.push_back(state.clusters.centroids.values());
  return params;
}

Matrix top_rows(const Matrix& m, std::size_t count) {
  return Matrix(count, m.cols(), std::vector<double>(m.data(), m.data() + count * m.cols()));
}

// Local row numbers for a batch's instances, in first-seen order.
class LocalIndex {
 public:
  std::size_t add(std::size_t global) {
    const auto [it, inserted] = local_.emplace(global, rows_.size());
    if (inserted) rows_.push_back(global);
    return it->second;
  }
  std::size_t at(std::size_t global) const { return local_.at(global); }
  const std::vector<std::size_t>& rows() const { return rows_; }

 private:
  std::unordered_map<std::size_t, std::size_t> local_;
  std::vector<std::size_t> rows_;
};

std::vector<Record> pairwise_records(const ConstraintSet& set) {
  std::vector<Record> records;
  records.reserve(set.must_links.size() + set.cannot_links.size() + set.horn_rules.size());
  for (std::size_t i = 0; i < set.must_links.size(); ++i) records.push_back({RecordKind::must_link, i});
  for (std::size_t i = 0; i < set.cannot_links.size(); ++i) records.push_back({RecordKind::cannot_link, i});
  for (std::size_t i = 0; i < set.horn_rules.size(); ++i) records.push_back({RecordKind::horn, i});
  return records;
}

class Trainer {
 public:
  Trainer(const Dataset& dataset, const ConstraintSet& constraints, const TrainConfig& config,
          const TrainState& initial)
      : data_(dataset),
        cons_(constraints),
        cfg_(config),
        state_(initial),
        params_(trainable(state_)),
        adam_(AdamState::for_params(params_, config.learning_rate)),
        rng_(config.seed) {}

  TrainResult run(const EpochFn& on_epoch) {
    const std::size_t n = data_.size();
    auto batch_rng = rng_.fork(11);
    auto pair_rng = rng_.fork(12);
    auto triplet_rng = rng_.fork(13);
    auto records = pairwise_records(cons_);
    std::vector<std::size_t> triplet_order(cons_.triplets.size());
    std::iota(triplet_order.begin(), triplet_order.end(), std::size_t{0});

    TrainReport report;
    const bool pairwise = !records.empty();
    const bool triplets = cons_.has_triplets();
    report.algorithm = pairwise && triplets ? "multi" : (pairwise || triplets ? "alternating" : "additive");

    full_pass();
    for (std::size_t epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
      epoch_ = epoch;
      additive_epoch(make_schedule(n, cfg_.batch_size, batch_rng), report.trace);
      if (pairwise) {
        pair_rng.shuffle(std::span<Record>(records));
        pairwise_epoch(records, report.trace);
      }
      if (triplets) {
        triplet_rng.shuffle(std::span<std::size_t>(triplet_order));
        triplet_epoch(triplet_order, report.trace);
      }

      const Labels previous = labels_;
      full_pass();
      std::size_t changed = 0;
      for (std::size_t i = 0; i < n; ++i) changed += previous[i] != labels_[i];
      report.trace.label_change.push_back(static_cast<double>(changed) / static_cast<double>(n));
      report.epochs_run = epoch;
      report.converged = has_converged(previous, labels_, cfg_.convergence_tol);

      if (cfg_.checkpoint_every > 0 && epoch % cfg_.checkpoint_every == 0) write_checkpoint(epoch);
      if (on_epoch) on_epoch(epoch, report);
      if (report.converged) break;
    }

    report.assignments = labels_;
    report.embedding = z_full_;
    if (data_.labels) {
      report.accuracy = accuracy(*data_.labels, labels_);
      report.nmi = nmi(*data_.labels, labels_);
    }
    return {state_, std::move(report), adam_};
  }

 private:
  void full_pass() {
    z_full_ = encode(state_.autoencoder, data_.features);
    q_full_ = soft_assign(state_.clusters, z_full_);
    if (!q_full_.all_finite()) {
      throw NumericError("non-finite soft assignments after epoch " + std::to_string(epoch_));
    }
    labels_ = hard_assign(q_full_);
  }

  void check_finite(double value, const char* branch) const {
    if (!std::isfinite(value)) {
      throw NumericError(std::string("non-finite ") + branch + " loss at epoch " + std::to_string(epoch_));
    }
  }

  // Backpropagates d/dQ (optional) and the reconstruction error of the first
  // `recon_rows` rows, then takes one Adam step. Returns the reconstruction loss.
  double step(const Matrix& x, const ForwardStack& enc, const Matrix& q, const Matrix* grad_q,
              std::size_t recon_rows, const char* branch) {
    const auto& ae = state_.autoencoder;
    Matrix grad_z(x.rows(), ae.latent_width());
    Matrix grad_mu(state_.clusters.k(), ae.latent_width());
    if (grad_q) {
      auto sa = soft_assign_backward(state_.clusters, enc.output, q, *grad_q);
      grad_z = std::move(sa.latent);
      grad_mu = std::move(sa.centroids);
    }
    double recon = 0.0;
    MlpGradients dec_grads;
    if (recon_rows > 0) {
      const bool all = recon_rows == x.rows();
      const auto dec = mlp_forward(ae.decoder, all ? enc.output : top_rows(enc.output, recon_rows));
      const auto term = mean_squared_error(dec.output, all ? x : top_rows(x, recon_rows));
      recon = term.loss;
      check_finite(recon, branch);
      auto back = mlp_backward(ae.decoder, dec, term.grad);
      auto gz = grad_z.values();
      const auto bz = back.input.values();
      for (std::size_t i = 0; i < bz.size(); ++i) gz[i] += bz[i];
      dec_grads = std::move(back.params);
    } else {
      dec_grads = MlpGradients::zeros_like(ae.decoder);
    }
    const auto enc_back = mlp_backward(ae.encoder, enc, grad_z);

    GradList grads = gradient_spans(enc_back.params);
    const auto dec_spans = gradient_spans(std::as_const(dec_grads));
    grads.insert(grads.end(), dec_spans.begin(), dec_spans.end());
    grads.push_back(std::as_const(grad_mu).values());
    try {
      adam_step(adam_, params_, grads);
    } catch (const NumericError&) {
      throw NumericError(std::string("non-finite gradient in ") + branch + " branch at epoch " +
                         std::to_string(epoch_));
    }
    return recon;
  }

  static void add_scaled(Matrix& dst, const Matrix& src, double scale) {
    auto d = dst.values();
    const auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
  }

  void additive_epoch(const BatchSchedule& schedule, LossTrace& trace) {
    const std::size_t k = state_.clusters.k();
    double sum_c = 0.0, sum_r = 0.0, sum_i = 0.0, sum_g = 0.0, sum_card = 0.0;
    const double inv_total = 1.0 / static_cast<double>(data_.size());
    for (const auto& batch : schedule.batches) {
      const double b = static_cast<double>(batch.size());
      const Matrix x = gather_rows(data_.features, batch);
      const auto enc = mlp_forward(state_.autoencoder.encoder, x);
      const Matrix q = soft_assign(state_.clusters, enc.output);
      Matrix grad_q(q.rows(), k);
      bool any = false;

      if (cfg_.clustering_loss_enabled) {
        const auto kl = kl_cluster_loss(target_distribution(q), q);
        check_finite(kl.value, "clustering");
        add_scaled(grad_q, kl.grad, 1.0);
        sum_c += kl.value;
        any = true;
      }
      if (cons_.difficulty) {
        std::vector<double> m(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) m[i] = (*cons_.difficulty)[batch[i]];
        const auto dl = difficulty_loss(q, m);
        check_finite(dl.value, "difficulty");
        add_scaled(grad_q, dl.grad, 1.0);
        sum_i += dl.value;
        any = true;
      }
      if (cons_.global_size) {
        const auto gl = global_size_loss(q, k);
        check_finite(gl.value, "global size");
        add_scaled(grad_q, gl.grad, 1.0);
        sum_g += gl.value * b;
        any = true;
      }
      if (cons_.cardinality) {
        const auto& spec = *cons_.cardinality;
        std::vector<int> psv(batch.size());
        bool has_one = false, has_zero = false;
        for (std::size_t i = 0; i < batch.size(); ++i) {
          psv[i] = spec.psv[batch[i]];
          (psv[i] == 1 ? has_one : has_zero) = true;
        }
        std::optional<AssignmentLoss> cl;
        if (spec.mode == CardinalitySpec::Mode::equal) {
          if (has_one && has_zero) cl = cardinality_loss(q, psv);
        } else {
          // Bounds are stated for the whole dataset; scale them to the batch.
          const double share = b * inv_total;
          cl = cardinality_bound_loss(q, psv, spec.lower * share, spec.upper * share);
        }
        if (cl) {
          check_finite(cl->value, "cardinality");
          add_scaled(grad_q, cl->grad, 1.0);
          sum_card += cl->value * b;
          any = true;
        }
      }

      sum_r += step(x, enc, q, any ? &grad_q : nullptr, batch.size(), "additive") * b;
    }
    const double n = static_cast<double>(data_.size());
    if (cfg_.clustering_loss_enabled) trace.clustering.push_back(sum_c / n);
    trace.reconstruction.push_back(sum_r / n);
    if (cons_.difficulty) trace.difficulty.push_back(sum_i / n);
    if (cons_.global_size) trace.global_size.push_back(sum_g / n);
    if (cons_.cardinality) trace.cardinality.push_back(sum_card / n);
  }

  void pairwise_epoch(const std::vector<Record>& records, LossTrace& trace) {
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < records.size(); start += cfg_.constraint_batch_size) {
      const std::size_t end = std::min(records.size(), start + cfg_.constraint_batch_size);
      const std::span<const Record> batch(records.data() + start, end - start);

      // Must-link instances first so the reconstruction term covers a prefix.
      LocalIndex local;
      for (const auto& r : batch) {
        if (r.kind != RecordKind::must_link) continue;
        const auto& p = cons_.must_links[r.index];
        local.add(p.a);
        local.add(p.b);
      }
      const std::size_t recon_rows = local.rows().size();
      for (const auto& r : batch) {
        if (r.kind == RecordKind::cannot_link) {
          const auto& p = cons_.cannot_links[r.index];
          local.add(p.a);
          local.add(p.b);
        } else if (r.kind == RecordKind::horn) {
          const auto& rule = cons_.horn_rules[r.index];
          for (const auto& p : rule.body) {
            local.add(p.a);
            local.add(p.b);
          }
          local.add(rule.head.a);
          local.add(rule.head.b);
        }
      }

      std::vector<IndexPair> ml, cl;
      std::vector<HornRule> rules;
      for (const auto& r : batch) {
        auto remap = [&](const IndexPair& p) { return IndexPair{local.at(p.a), local.at(p.b)}; };
        if (r.kind == RecordKind::must_link) {
          ml.push_back(remap(cons_.must_links[r.index]));
        } else if (r.kind == RecordKind::cannot_link) {
          cl.push_back(remap(cons_.cannot_links[r.index]));
        } else {
          const auto& rule = cons_.horn_rules[r.index];
          HornRule mapped{{}, remap(rule.head)};
          for (const auto& p : rule.body) mapped.body.push_back(remap(p));
          rules.push_back(std::move(mapped));
        }
      }

      const Matrix x = gather_rows(data_.features, local.rows());
      const auto enc = mlp_forward(state_.autoencoder.encoder, x);
      const Matrix q = soft_assign(state_.clusters, enc.output);
      if (!rules.empty()) {
        const auto heads = evaluate_horn_rules(q, rules, cfg_.horn_tau);
        cl.insert(cl.end(), heads.begin(), heads.end());
      }

      Matrix grad_q(q.rows(), q.cols());
      double value = 0.0;
      if (!ml.empty()) {
        const auto l = ml_loss(q, ml);
        value += cfg_.lambda_ml * l.value;
        add_scaled(grad_q, l.grad, cfg_.lambda_ml);
      }
      if (!cl.empty()) {
        const auto l = cl_loss(q, cl);
        value += l.value;
        add_scaled(grad_q, l.grad, 1.0);
      }
      check_finite(value, "pairwise");
      value += step(x, enc, q, &grad_q, recon_rows, "pairwise");
      total += value;
      ++batches;
    }
    trace.pairwise.push_back(total / static_cast<double>(batches));
  }

  void triplet_epoch(const std::vector<std::size_t>& order, LossTrace& trace) {
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg_.constraint_batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg_.constraint_batch_size);
      LocalIndex local;
      std::vector<Triplet> mapped;
      mapped.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& t = cons_.triplets[order[i]];
        const auto a = local.add(t.anchor);
        const auto p = local.add(t.positive);
        const auto ng = local.add(t.negative);
        mapped.push_back({a, p, ng});
      }
      const Matrix x = gather_rows(data_.features, local.rows());
      const auto enc = mlp_forward(state_.autoencoder.encoder, x);
      const Matrix q = soft_assign(state_.clusters, enc.output);
      const auto l = triplet_loss(q, mapped, cfg_.triplet_margin);
      check_finite(l.value, "triplet");
      step(x, enc, q, &l.grad, 0, "triplet");
      total += l.value;
      ++batches;
    }
    trace.triplet.push_back(total / static_cast<double>(batches));
  }

  void write_checkpoint(std::size_t epoch) const {
    std::ostringstream name;
    name << "epoch-" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
    const fs::path dir = cfg_.checkpoint_dir.empty() ? fs::path(".") : cfg_.checkpoint_dir;
    save_checkpoint(dir / name.str(), Checkpoint{state_.autoencoder, state_.clusters, adam_, epoch});
  }

  const Dataset& data_;
  const ConstraintSet& cons_;
  const TrainConfig& cfg_;
  TrainState state_;
  ParamList params_;
  AdamState adam_;
  SeededRng rng_;
  std::size_t epoch_ = 0;
  Matrix z_full_;
  Matrix q_full_;
  Labels labels_;
};

void check_inputs(const Dataset& dataset, const ConstraintSet& constraints, const TrainConfig& config,
                  const TrainState& initial) {
  config.validate();
  constraints.validate(dataset.size());
  if (initial.autoencoder.input_width() != dataset.dim()) {
    throw DimensionError("autoencoder expects " + std::to_string(initial.autoencoder.input_width()) +
                         " features, dataset has " + std::to_string(dataset.dim()));
  }
  if (initial.clusters.centroids.cols() != initial.autoencoder.latent_width()) {
    throw DimensionError("centroid width does not match the latent width");
  }
  if (initial.clusters.k() != config.clusters) {
    throw ArgumentError("initial state has " + std::to_string(initial.clusters.k()) + " centroids, config asks for " +
                        std::to_string(config.clusters));
  }
  if (constraints.global_size && config.batch_size < 25 * config.clusters) {
    throw ArgumentError("global size constraints need batch_size >= 25 * k = " +
                        std::to_string(25 * config.clusters) + ", got " + std::to_string(config.batch_size));
  }
}

}  // namespace

TrainResult run_training(const Dataset& dataset, const ConstraintSet& constraints, const TrainConfig& config,
                         const TrainState& initial, const EpochFn& on_epoch) {
  check_inputs(dataset, constraints, config, initial);
  Trainer trainer(dataset, constraints, config, initial);
  return trainer.run(on_epoch);
}

TrainResult run_training_multi(const Dataset& dataset, const ConstraintSet& pairwise, const ConstraintSet& triplets,
                               const TrainConfig& config, const TrainState& initial, const EpochFn& on_epoch) {
  const ConstraintSet combined = merge(pairwise, triplets);
  return run_training(dataset, combined, config, initial, on_epoch);
}

}  // namespace dcc
