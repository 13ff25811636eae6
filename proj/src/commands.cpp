#include "dcc/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "dcc/checkpoint.hpp"
#include "dcc/constraint_gen.hpp"
#include "dcc/error.hpp"

namespace dcc {

namespace fs = std::filesystem;

namespace {

const char* const kDefaultTypes = "pairwise,triplet,difficulty,cardinality,horn";

void require_file(const std::optional<fs::path>& path, const std::string& key) {
  if (!path) throw ArgumentError(key + " is required");
  if (!fs::is_regular_file(*path)) throw InputError(key + ": no such file " + path->string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

class Manifest {
 public:
  void add(const std::string& key, const std::string& value) { lines_ << key << " = " << value << '\n'; }
  void digest(const std::string& key, const fs::path& path) { add("digest." + key, file_digest(path)); }
  void config(const RunConfig& cfg) {
    std::istringstream in(cfg.to_text());
    std::string line;
    while (std::getline(in, line)) lines_ << "config." << line << '\n';
  }
  std::string text() const { return lines_.str(); }

 private:
  std::ostringstream lines_;
};

void digest_inputs(Manifest& m, const RunConfig& cfg) {
  for (const char* key : {"data.path", "data.labels", "pretrain.checkpoint", "constraints.triplets_path",
                          "gen.embedding", "ontology.path", "classmap.path"}) {
    if (const auto p = cfg.get_path(key); p && fs::is_regular_file(*p)) m.digest(key, *p);
  }
  const auto files = cfg.get_list("constraints.path");
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (fs::is_regular_file(files[i])) m.digest("constraints.path." + std::to_string(i), files[i]);
  }
}

fs::path default_checkpoint(const RunConfig& cfg) {
  return cfg.output_dir() / ("pretrain-" + std::to_string(cfg.seed())) / "autoencoder.ckpt";
}

std::optional<AutoencoderModel> pretrained_model(const RunConfig& cfg, InitMode mode) {
  if (mode == InitMode::raw_rand || mode == InitMode::raw_kmeans) return std::nullopt;
  auto path = cfg.get_path("pretrain.checkpoint");
  if (!path) {
    const auto fallback = default_checkpoint(cfg);
    if (!fs::is_regular_file(fallback)) {
      throw ArgumentError("init mode " + to_string(mode) +
                          " needs pretrain.checkpoint (run 'pretrain' first or choose a raw mode)");
    }
    path = fallback;
  }
  require_file(path, "pretrain.checkpoint");
  return load_checkpoint(*path).autoencoder;
}

ConstraintSet filter_types(ConstraintSet set, const std::vector<std::string>& types) {
  const auto on = [&](const char* t) { return std::find(types.begin(), types.end(), t) != types.end(); };
  if (!on("pairwise")) {
    set.must_links.clear();
    set.cannot_links.clear();
  }
  if (!on("triplet")) set.triplets.clear();
  if (!on("difficulty")) set.difficulty.reset();
  if (!on("cardinality")) set.cardinality.reset();
  if (!on("horn")) set.horn_rules.clear();
  set.global_size = on("global");
  return set;
}

std::string join_sizes(const Labels& labels, std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) {
    if (l >= 0 && static_cast<std::size_t>(l) < k) ++sizes[static_cast<std::size_t>(l)];
  }
  std::ostringstream out;
  for (std::size_t c = 0; c < k; ++c) out << (c ? " " : "") << sizes[c];
  return out.str();
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  const auto path = cfg.get_path("data.path");
  require_file(path, "data.path");
  const auto labels_path = cfg.get_path("data.labels");
  if (labels_path) require_file(labels_path, "data.labels");
  const auto& format = cfg.get("data.format");
  if (format == "idx") return load_idx(*path, labels_path);
  if (format != "csv") throw ArgumentError("data.format must be idx or csv, got '" + format + "'");
  Dataset ds = load_csv(*path, cfg.get_bool("data.csv_labels"));
  if (labels_path) {
    auto labels = load_labels(*labels_path);
    if (labels.size() != ds.size()) {
      throw ConsistencyError("data.labels has " + std::to_string(labels.size()) + " entries for " +
                             std::to_string(ds.size()) + " instances");
    }
    ds.labels = std::move(labels);
  }
  return ds;
}

ConstraintInputs load_constraint_inputs(const RunConfig& cfg, std::size_t n) {
  const auto types = cfg.get_list("constraints.types");
  static const std::vector<std::string> known{"pairwise", "triplet", "difficulty", "cardinality", "horn", "global"};
  for (const auto& t : types) {
    if (std::find(known.begin(), known.end(), t) == known.end()) {
      throw ArgumentError("constraints.types: unknown type '" + t + "'");
    }
  }
  ConstraintInputs inputs;
  for (const auto& file : cfg.get_list("constraints.path")) {
    require_file(fs::path(file), "constraints.path");
    inputs.primary = merge(std::move(inputs.primary), read_constraints(file, n));
  }
  inputs.primary = filter_types(std::move(inputs.primary), types);
  if (inputs.primary.cardinality) {
    const auto& mode = cfg.get("cardinality.mode");
    if (mode == "bounds") {
      inputs.primary.cardinality->mode = CardinalitySpec::Mode::bounds;
      inputs.primary.cardinality->lower = cfg.get_double("cardinality.lower");
      inputs.primary.cardinality->upper = cfg.get_double("cardinality.upper");
    } else if (mode != "equal") {
      throw ArgumentError("cardinality.mode must be equal or bounds, got '" + mode + "'");
    }
  }
  if (const auto second = cfg.get_path("constraints.triplets_path")) {
    require_file(second, "constraints.triplets_path");
    auto set = filter_types(read_constraints(*second, n), types);
    set.global_size = false;
    inputs.secondary = std::move(set);
  }

  // Explicitly requested families must be backed by records.
  if (cfg.get("constraints.types") != kDefaultTypes) {
    ConstraintSet all = inputs.primary;
    if (inputs.secondary) all = merge(all, *inputs.secondary);
    for (const auto& t : types) {
      const bool present = (t == "pairwise" && all.has_pairwise()) || (t == "triplet" && all.has_triplets()) ||
                           (t == "difficulty" && all.difficulty) || (t == "cardinality" && all.cardinality) ||
                           (t == "horn" && !all.horn_rules.empty()) || t == "global";
      if (!present) throw ArgumentError("constraints.types enables '" + t + "' but no such records were loaded");
    }
  }
  inputs.primary.validate(n);
  if (inputs.secondary) inputs.secondary->validate(n);
  return inputs;
}

fs::path cmd_pretrain(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load_dataset(cfg);
  const SdaeConfig sdae = cfg.sdae_config(ds.dim());
  const fs::path out = cfg.get_path("pretrain.checkpoint").value_or(default_checkpoint(cfg));

  SeededRng rng(cfg.seed());
  PretrainLog trace;
  const auto model = pretrain_sdae(ds, sdae, rng, &trace, [&](const std::string& line) { log << line << '\n'; });
  save_checkpoint(out, Checkpoint{model, std::nullopt, std::nullopt, 0});

  std::ostringstream text;
  text << std::setprecision(17);
  for (std::size_t l = 0; l < trace.layerwise.size(); ++l) {
    text << "layer" << l + 1 << " =";
    for (double v : trace.layerwise[l]) text << ' ' << v;
    text << '\n';
  }
  text << "finetune =";
  for (double v : trace.finetune) text << ' ' << v;
  text << '\n';
  write_text(out.parent_path() / "pretrain_log.txt", text.str());

  Manifest m;
  m.add("command", "pretrain");
  digest_inputs(m, cfg);
  m.add("output.checkpoint", out.string());
  m.digest("output.checkpoint", out);
  m.config(cfg);
  write_text(out.parent_path() / "manifest.txt", m.text());

  log << "checkpoint " << out.string() << '\n';
  log << "reconstruction " << format_number(reconstruction_value(model, ds.features)) << '\n';
  return out;
}

fs::path cmd_gen_constraints(const RunConfig& cfg, std::ostream& log) {
  const auto mode = cfg.get("gen.mode");
  static const std::vector<std::string> modes{"pairwise", "difficulty", "triplet-embedding", "triplet-ontology"};
  if (std::find(modes.begin(), modes.end(), mode) == modes.end()) {
    throw ArgumentError("gen.mode must be one of pairwise, difficulty, triplet-embedding, triplet-ontology");
  }
  const std::size_t count = cfg.get_count("gen.count");
  const double noise = cfg.get_double("noise.degree");
  SeededRng rng(cfg.seed());
  std::map<std::string, std::string> echo;

  ConstraintSet out_set;
  if (mode == "triplet-ontology" && (!cfg.has_value("ontology.path") || !cfg.has_value("classmap.path"))) {
    throw ArgumentError("triplet-ontology mode needs ontology.path and classmap.path");
  }
  if (mode == "triplet-embedding") {
    const auto emb = cfg.get_path("gen.embedding");
    require_file(emb, "gen.embedding");
    const Dataset z = load_csv(*emb, false);
    out_set.triplets = triplets_from_embedding(z.features, count, rng);
  } else {
    const Dataset ds = load_dataset(cfg);
    if (!ds.labels) throw ArgumentError("gen.mode " + mode + " needs data.labels");
    const auto& labels = *ds.labels;
    if (mode == "pairwise") {
      out_set = pairwise_from_labels(labels, count, rng);
      if (cfg.get_bool("gen.close")) {
        out_set = close_constraints(out_set.must_links, out_set.cannot_links, ds.size());
      }
      if (noise > 0.0) {
        auto noise_rng = rng.fork(1);
        out_set = inject_noise(out_set, labels, noise, noise_rng);
      }
      echo["noise.degree"] = cfg.get("noise.degree");
      echo["gen.close"] = cfg.get("gen.close");
    } else if (mode == "difficulty") {
      WeakLearnerConfig weak;
      weak.restarts = cfg.get_count("gen.weak_restarts");
      out_set.difficulty = difficulty_from_weak_learner(ds, cfg.get_count("train.clusters"), rng, weak);
      echo["train.clusters"] = cfg.get("train.clusters");
      echo["gen.weak_restarts"] = cfg.get("gen.weak_restarts");
    } else {
      const auto graph = OntologyGraph::load(*cfg.get_path("ontology.path"), *cfg.get_path("classmap.path"));
      TripletGenConfig tc;
      tc.theta_p = cfg.get_double("gen.theta_p");
      tc.theta_n = cfg.get_double("gen.theta_n");
      tc.count = count;
      std::vector<std::size_t> pool(ds.size());
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      const std::size_t pool_size = cfg.get_count("gen.pool");
      if (pool_size > 0) {
        if (pool_size > pool.size()) throw ArgumentError("gen.pool exceeds the dataset size");
        auto pool_rng = rng.fork(2);
        pool_rng.shuffle(std::span<std::size_t>(pool));
        pool.resize(pool_size);
        std::sort(pool.begin(), pool.end());
      }
      out_set.triplets = triplets_from_ontology(labels, pool, graph, tc, rng);
      echo["gen.theta_p"] = cfg.get("gen.theta_p");
      echo["gen.theta_n"] = cfg.get("gen.theta_n");
      echo["gen.pool"] = cfg.get("gen.pool");
    }
  }

  const fs::path out = cfg.get_path("gen.output").value_or(
      cfg.output_dir() / ("constraints-" + mode + "-" + std::to_string(cfg.seed()) + ".txt"));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_constraints(out, out_set);

  Manifest m;
  m.add("command", "gen-constraints");
  m.add("gen.mode", mode);
  m.add("gen.count", cfg.get("gen.count"));
  m.add("seed", std::to_string(cfg.seed()));
  for (const auto& [k, v] : echo) m.add(k, v);
  m.add("records.must_link", std::to_string(out_set.must_links.size()));
  m.add("records.cannot_link", std::to_string(out_set.cannot_links.size()));
  m.add("records.triplet", std::to_string(out_set.triplets.size()));
  if (out_set.difficulty) {
    const auto hard = std::count_if(out_set.difficulty->begin(), out_set.difficulty->end(),
                                    [](double v) { return v < 0.0; });
    m.add("records.difficulty", std::to_string(out_set.difficulty->size()));
    m.add("records.difficulty_hard", std::to_string(hard));
  }
  digest_inputs(m, cfg);
  m.digest("output", out);
  fs::path sidecar = out;
  sidecar += ".manifest";
  write_text(sidecar, m.text());

  log << "constraints " << out.string() << '\n';
  return out;
}

fs::path cmd_train(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load_dataset(cfg);
  const TrainConfig tc = cfg.train_config(ds.dim());
  const auto inputs = load_constraint_inputs(cfg, ds.size());
  const auto pretrained = pretrained_model(cfg, tc.init_mode);

  const fs::path run_dir = cfg.output_dir() / ("run-" + std::to_string(cfg.seed()));
  TrainConfig run_cfg = tc;
  run_cfg.checkpoint_dir = run_dir / "checkpoints";

  const TrainState initial = initialize(ds, run_cfg, pretrained);
  const auto on_epoch = [&](std::size_t epoch, const TrainReport& r) {
    log << "epoch " << epoch << " changed " << r.trace.label_change.back() << '\n';
  };
  const TrainResult result = inputs.secondary
                                 ? run_training_multi(ds, inputs.primary, *inputs.secondary, run_cfg, initial, on_epoch)
                                 : run_training(ds, inputs.primary, run_cfg, initial, on_epoch);
  const auto& report = result.report;

  fs::create_directories(run_dir);
  std::ostringstream metrics;
  metrics << "algorithm = " << report.algorithm << '\n';
  metrics << "epochs_run = " << report.epochs_run << '\n';
  metrics << "converged = " << (report.converged ? "true" : "false") << '\n';
  if (report.accuracy) metrics << "accuracy = " << format_number(*report.accuracy) << '\n';
  if (report.nmi) metrics << "nmi = " << format_number(*report.nmi) << '\n';
  metrics << "cluster_sizes = " << join_sizes(report.assignments, tc.clusters) << '\n';
  write_text(run_dir / "metrics.txt", metrics.str());
  write_text(run_dir / "loss_trace.txt", report.to_text());
  write_matrix_csv(run_dir / "embeddings.csv", report.embedding, "z");
  {
    std::ostringstream a;
    a << "index,cluster\n";
    for (std::size_t i = 0; i < report.assignments.size(); ++i) a << i << ',' << report.assignments[i] << '\n';
    write_text(run_dir / "assignments.csv", a.str());
  }
  save_checkpoint(run_dir / "checkpoint.ckpt",
                  Checkpoint{result.state.autoencoder, result.state.clusters, result.optimizer, report.epochs_run});

  Manifest m;
  m.add("command", "train");
  m.add("algorithm", report.algorithm);
  digest_inputs(m, cfg);
  m.config(cfg);
  write_text(run_dir / "manifest.txt", m.text());
  write_text(run_dir / "config.txt", cfg.to_text());

  log << metrics.str();
  log << "run " << run_dir.string() << '\n';
  return run_dir;
}

std::string Evaluation::to_text() const {
  std::ostringstream out;
  out << "instances = " << instances << '\n';
  out << "accuracy = " << format_number(accuracy) << '\n';
  out << "nmi = " << format_number(nmi) << '\n';
  return out.str();
}

Evaluation cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const auto truth_path = cfg.get_path("evaluate.labels");
  const auto pred_path = cfg.get_path("evaluate.assignments");
  require_file(truth_path, "evaluate.labels");
  require_file(pred_path, "evaluate.assignments");
  const auto truth = load_labels(*truth_path);
  const auto pred = load_labels(*pred_path);
  if (truth.size() != pred.size()) {
    throw ConsistencyError("evaluate: " + std::to_string(truth.size()) + " labels vs " +
                           std::to_string(pred.size()) + " assignments");
  }
  Evaluation e{accuracy(truth, pred), nmi(truth, pred), truth.size()};
  write_text(cfg.output_dir() / "evaluation.txt", e.to_text());
  log << e.to_text();
  return e;
}

std::string NegativeRatioReport::to_text() const {
  auto mean_std = [](const std::vector<PairedRun>& runs, bool constrained) {
    double mean = 0.0;
    for (const auto& r : runs) mean += constrained ? r.constrained : r.unconstrained;
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (const auto& r : runs) {
      const double d = (constrained ? r.constrained : r.unconstrained) - mean;
      var += d * d;
    }
    return std::pair{mean, std::sqrt(var / static_cast<double>(runs.size()))};
  };
  std::ostringstream out;
  out << std::setprecision(17);
  out << "sets = " << accuracy_runs.size() << '\n';
  out << "baseline.accuracy = " << baseline_accuracy << '\n';
  out << "baseline.nmi = " << baseline_nmi << '\n';
  const auto [acc_mean, acc_std] = mean_std(accuracy_runs, true);
  const auto [nmi_mean, nmi_std] = mean_std(nmi_runs, true);
  out << "constrained.accuracy.mean = " << acc_mean << '\n';
  out << "constrained.accuracy.std = " << acc_std << '\n';
  out << "constrained.nmi.mean = " << nmi_mean << '\n';
  out << "constrained.nmi.std = " << nmi_std << '\n';
  out << "negative_ratio.accuracy = " << accuracy_ratio() << '\n';
  out << "negative_ratio.nmi = " << nmi_ratio() << '\n';
  for (std::size_t s = 0; s < accuracy_runs.size(); ++s) {
    out << "set." << s << " = " << accuracy_runs[s].constrained << ' ' << nmi_runs[s].constrained << ' '
        << epochs[s] << '\n';
  }
  return out.str();
}

NegativeRatioReport negative_ratio_harness(const Dataset& ds, const TrainState& initial, const TrainConfig& config,
                                           std::size_t sets, std::size_t pairs, std::uint64_t constraint_seed,
                                           const SetProgressFn& progress) {
  if (sets < 2) throw ArgumentError("negative-ratio needs at least 2 constraint sets");
  if (!ds.labels) throw ArgumentError("negative-ratio needs labels");
  const auto baseline = run_training(ds, ConstraintSet{}, config, initial);
  NegativeRatioReport report;
  report.baseline_accuracy = *baseline.report.accuracy;
  report.baseline_nmi = *baseline.report.nmi;
  const SeededRng root(constraint_seed);
  for (std::size_t s = 0; s < sets; ++s) {
    auto rng = root.fork(s);
    const auto cons = pairwise_from_labels(*ds.labels, pairs, rng);
    const auto run = run_training(ds, cons, config, initial);
    report.accuracy_runs.push_back({*run.report.accuracy, report.baseline_accuracy});
    report.nmi_runs.push_back({*run.report.nmi, report.baseline_nmi});
    report.epochs.push_back(run.report.epochs_run);
    if (progress) progress(s, report.accuracy_runs.back());
  }
  return report;
}

fs::path cmd_negative_ratio(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load_dataset(cfg);
  const TrainConfig tc = cfg.train_config(ds.dim());
  const auto pretrained = pretrained_model(cfg, tc.init_mode);
  const TrainState initial = initialize(ds, tc, pretrained);
  const auto report = negative_ratio_harness(
      ds, initial, tc, cfg.get_count("negative_ratio.sets"), cfg.get_count("negative_ratio.pairs"), cfg.seed(),
      [&](std::size_t s, const PairedRun& r) {
        log << "set " << s << " accuracy " << r.constrained << " baseline " << r.unconstrained << '\n';
      });
  const fs::path dir = cfg.output_dir() / ("negative-ratio-" + std::to_string(cfg.seed()));
  write_text(dir / "report.txt", report.to_text());
  Manifest m;
  m.add("command", "negative-ratio");
  digest_inputs(m, cfg);
  m.config(cfg);
  write_text(dir / "manifest.txt", m.text());
  log << report.to_text();
  return dir;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep constrained clustering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dcc 1.0");

  struct Command {
    const char* name;
    const char* help;
  };
  static const std::vector<Command> commands{
      {"pretrain", "train the stacked denoising autoencoder"},
      {"gen-constraints", "generate a constraint file"},
      {"train", "train the clustering network"},
      {"evaluate", "score assignments against labels"},
      {"negative-ratio", "paired constrained/unconstrained runs over random constraint sets"},
  };

  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key = value configuration file");
    for (const auto& k : config_keys()) {
      auto* opt = sub->add_option(std::string("--") + k.name, overrides[k.name], k.help);
      options[std::string(c.name) + "/" + k.name] = opt;
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    const CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    for (const auto& k : config_keys()) {
      if (options[name + "/" + k.name]->count() > 0) cfg.set(k.name, overrides[k.name]);
    }
    const auto start = std::chrono::steady_clock::now();
    if (name == "pretrain") {
      cmd_pretrain(cfg, out);
    } else if (name == "gen-constraints") {
      cmd_gen_constraints(cfg, out);
    } else if (name == "train") {
      cmd_train(cfg, out);
    } else if (name == "evaluate") {
      cmd_evaluate(cfg, out);
    } else {
      cmd_negative_ratio(cfg, out);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    err << name << " finished in " << std::fixed << std::setprecision(1) << secs << " s\n";
    return 0;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace dcc
