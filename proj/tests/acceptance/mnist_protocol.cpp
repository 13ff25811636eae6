#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "dcc/autoencoder.hpp"
#include "dcc/checkpoint.hpp"
#include "dcc/commands.hpp"
#include "dcc/constraint_gen.hpp"
#include "dcc/data_io.hpp"
#include "dcc/metrics.hpp"
#include "dcc/trainer.hpp"
#include "protocol.hpp"

namespace dcc::acceptance {
namespace {

namespace fs = std::filesystem;

const std::vector<std::size_t> kDims{784, 256, 256, 512, 10};
constexpr std::size_t kSeeds = 5;

struct RunSummary {
  double accuracy = 0.0;
  double nmi = 0.0;
  std::size_t epochs = 0;
  bool converged = false;
  double size_deviation = 0.0;  // max_c |size_c / n - 1/k|
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double size_deviation(const Labels& assignments, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (int c : assignments) ++counts[static_cast<std::size_t>(c)];
  double worst = 0.0;
  for (std::size_t c : counts) {
    worst = std::max(worst, std::abs(static_cast<double>(c) / static_cast<double>(assignments.size()) -
                                     1.0 / static_cast<double>(k)));
  }
  return worst;
}

class Protocol {
 public:
  Protocol(const fs::path& data_dir, const std::optional<fs::path>& cache, std::ostream& log)
      : log_(log), start_(std::chrono::steady_clock::now()) {
    ds_ = load_idx(data_dir / "images-idx3-ubyte.gz", data_dir / "labels-idx1-ubyte.gz");
    log_ << "loaded " << ds_.size() << " instances of width " << ds_.dim() << '\n';
    const std::optional<fs::path> ckpt =
        cache ? std::optional<fs::path>(*cache / "mnist-784-256-256-512-10.ckpt") : std::nullopt;
    if (ckpt && fs::exists(*ckpt)) {
      ae_ = load_checkpoint(*ckpt).autoencoder;
      log_ << "pretrained autoencoder read from " << ckpt->string() << '\n';
      return;
    }
    SdaeConfig sc;
    sc.dims = kDims;
    sc.layerwise_epochs = 30;
    sc.finetune_epochs = 60;
    SeededRng rng(7);
    ae_ = pretrain_sdae(ds_, sc, rng, nullptr, [&](const std::string& line) {
      if (line.find("epoch 1 ") != std::string::npos || line.find("0 loss") != std::string::npos) {
        log_ << "[" << elapsed() << "s] " << line << '\n';
      }
    });
    if (ckpt) {
      fs::create_directories(ckpt->parent_path());
      Checkpoint c;
      c.autoencoder = ae_;
      save_checkpoint(*ckpt, c);
    }
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig c;
    c.clusters = 10;
    c.max_epochs = 60;
    c.seed = seed;
    c.init_mode = InitMode::ae_kmeans;
    return c;
  }

  const TrainState& initial(std::uint64_t seed) {
    auto it = init_.find(seed);
    if (it == init_.end()) it = init_.emplace(seed, initialize(ds_, config(seed), ae_)).first;
    return it->second;
  }

  /// Modes: base, p<count>, n<degree> (6000 pairs plus noise), dif, glob.
  const RunSummary& run(std::uint64_t seed, const std::string& mode) {
    const auto key = std::make_pair(seed, mode);
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    ConstraintSet cs;
    if (mode[0] == 'p') {
      SeededRng rng(1000 + seed);
      cs = pairwise_from_labels(*ds_.labels, std::stoul(mode.substr(1)), rng);
    } else if (mode[0] == 'n') {
      SeededRng rng(1000 + seed);
      cs = pairwise_from_labels(*ds_.labels, 6000, rng);
      SeededRng noise(2000 + seed);
      cs = inject_noise(cs, *ds_.labels, std::stod(mode.substr(1)), noise);
    } else if (mode == "dif") {
      SeededRng rng(3000 + seed);
      cs.difficulty = difficulty_from_weak_learner(ds_, 10, rng);
    } else if (mode == "glob") {
      cs.global_size = true;
    }
    const auto r = run_training(ds_, cs, config(seed), initial(seed));
    RunSummary s{*r.report.accuracy, *r.report.nmi, r.report.epochs_run, r.report.converged,
                 size_deviation(r.report.assignments, 10)};
    log_ << "[" << elapsed() << "s] seed " << seed << ' ' << mode << fmt(" acc %.4f nmi %.4f", s.accuracy, s.nmi)
         << " epochs " << s.epochs << (s.converged ? " converged" : " capped")
         << fmt(" size deviation %.4f", s.size_deviation) << '\n';
    return runs_.emplace(key, s).first->second;
  }

  double mean(const std::string& mode, double RunSummary::*field) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) sum += run(seed, mode).*field;
    return sum / kSeeds;
  }

  double mean_epochs(const std::string& mode) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) sum += static_cast<double>(run(seed, mode).epochs);
    return sum / kSeeds;
  }

  const Dataset& dataset() const { return ds_; }
  double elapsed() const {
    return std::round(std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
  }
  std::ostream& log() { return log_; }

 private:
  std::ostream& log_;
  std::chrono::steady_clock::time_point start_;
  Dataset ds_;
  AutoencoderModel ae_;
  std::map<std::uint64_t, TrainState> init_;
  std::map<std::pair<std::uint64_t, std::string>, RunSummary> runs_;
};

Outcome negative_effects(Protocol& p) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = negative_ratio_harness(
      p.dataset(), p.initial(0), p.config(0), 20, 3600, 500, [&](std::size_t s, const PairedRun& r) {
        p.log() << "[" << p.elapsed() << "s] set " << s << fmt(" acc %.4f baseline %.4f", r.constrained, r.unconstrained)
                << '\n';
      });
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  double mean = 0.0;
  for (const auto& r : report.accuracy_runs) mean += r.constrained;
  mean /= static_cast<double>(report.accuracy_runs.size());
  const double ratio = report.accuracy_ratio();
  const bool pass = mean > report.baseline_accuracy && ratio <= 0.10 && minutes <= 60.0;
  return {5, pass,
          fmt("mean constrained acc %.4f vs unconstrained %.4f, negative ratio %.2f", mean, report.baseline_accuracy,
              ratio) +
              fmt(", %.1f min", minutes)};
}

Outcome pairwise_trend(Protocol& p) {
  const double base = p.mean("base", &RunSummary::accuracy);
  const double few = p.mean("p600", &RunSummary::accuracy);
  const double many = p.mean("p6000", &RunSummary::accuracy);
  return {6, many >= few && few >= base, fmt("mean acc 6000 pairs %.4f, 600 pairs %.4f, none %.4f", many, few, base)};
}

Outcome difficulty_speedup(Protocol& p) {
  const double base_epochs = p.mean_epochs("base");
  const double dif_epochs = p.mean_epochs("dif");
  const double base_acc = p.mean("base", &RunSummary::accuracy);
  const double dif_acc = p.mean("dif", &RunSummary::accuracy);
  return {7, dif_epochs < base_epochs && dif_acc >= base_acc,
          fmt("mean epochs %.1f with difficulty vs %.1f without", dif_epochs, base_epochs) +
              fmt(", mean acc %.4f vs %.4f", dif_acc, base_acc)};
}

Outcome global_size(Protocol& p) {
  bool pass = true;
  std::string detail = "max size deviation per seed (global vs none):";
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const double g = p.run(seed, "glob").size_deviation;
    const double b = p.run(seed, "base").size_deviation;
    pass = pass && g < b;
    detail += fmt(" %.4f/%.4f", g, b);
  }
  return {8, pass, detail};
}

Outcome noise_trend(Protocol& p) {
  const double clean = p.mean("p6000", &RunSummary::accuracy);
  const double five = p.mean("n0.05", &RunSummary::accuracy);
  const double twenty = p.mean("n0.20", &RunSummary::accuracy);
  const double base = p.mean("base", &RunSummary::accuracy);
  return {9, clean >= five && five >= twenty && five >= base,
          fmt("mean acc 0%% noise %.4f, 5%% %.4f, 20%% %.4f", clean, five, twenty) + fmt(", none %.4f", base)};
}

}  // namespace

std::vector<Outcome> run_mnist_criteria(const std::set<int>& criteria, const fs::path& data_dir,
                                        const std::optional<fs::path>& cache, std::ostream& log) {
  Protocol p(data_dir, cache, log);
  std::vector<Outcome> out;
  if (criteria.count(5)) out.push_back(negative_effects(p));
  if (criteria.count(6)) out.push_back(pairwise_trend(p));
  if (criteria.count(7)) out.push_back(difficulty_speedup(p));
  if (criteria.count(8)) out.push_back(global_size(p));
  if (criteria.count(9)) out.push_back(noise_trend(p));
  return out;
}

}  // namespace dcc::acceptance
