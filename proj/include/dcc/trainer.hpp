#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcc/autoencoder.hpp"
#include "dcc/clustering.hpp"
#include "dcc/constraints.hpp"
#include "dcc/data_io.hpp"
#include "dcc/optim.hpp"

namespace dcc {

enum class InitMode { raw_rand, raw_kmeans, ae_rand, ae_kmeans };

/// "raw+rand", "raw+kmeans", "ae+rand", "ae+kmeans".
InitMode parse_init_mode(const std::string& text);
std::string to_string(InitMode mode);

struct TrainConfig {
  std::size_t clusters = 10;
  std::size_t max_epochs = 100;
  std::size_t batch_size = 256;
  double learning_rate = 0.001;
  double lambda_ml = 0.1;
  double triplet_margin = 0.1;
  std::size_t constraint_batch_size = 256;
  double convergence_tol = 0.001;
  InitMode init_mode = InitMode::ae_kmeans;
  bool clustering_loss_enabled = true;
  std::uint64_t seed = 0;
  double horn_tau = 0.5;
  std::size_t kmeans_restarts = 20;
  std::size_t kmeans_max_iters = 300;
  /// Network widths for the raw modes (d, hidden..., latent).
  std::vector<std::size_t> dims;
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

struct TrainState {
  AutoencoderModel autoencoder;
  ClusterModel clusters;
};

/// Per-branch loss means, one entry per epoch.
struct LossTrace {
  std::vector<double> clustering;
  std::vector<double> reconstruction;
  std::vector<double> difficulty;
  std::vector<double> global_size;
  std::vector<double> cardinality;
  std::vector<double> pairwise;
  std::vector<double> triplet;
  std::vector<double> label_change;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  bool converged = false;
  std::optional<double> accuracy;
  std::optional<double> nmi;
  std::string algorithm;  // "additive", "alternating" or "multi"
  LossTrace trace;
  Labels assignments;
  Matrix embedding;

  /// Key/value lines followed by one `trace.<branch>` array line per branch.
  std::string to_text() const;
};

struct TrainResult {
  TrainState state;
  TrainReport report;
  AdamState optimizer;
};

using EpochFn = std::function<void(std::size_t epoch, const TrainReport& partial)>;

/// Builds the starting network and centroids. `pretrained` is required for
/// the ae modes; the raw modes draw a fresh network with `config.dims`.
TrainState initialize(const Dataset& dataset, const TrainConfig& config,
                      const std::optional<AutoencoderModel>& pretrained);

/// Single constraint family per run: pairwise or triplet records feed the
/// alternating branch, difficulty/global/cardinality join the additive loss.
TrainResult run_training(const Dataset& dataset, const ConstraintSet& constraints, const TrainConfig& config,
                         const TrainState& initial, const EpochFn& on_epoch = {});

/// Pairwise batches then triplet batches after the additive batches, every epoch.
TrainResult run_training_multi(const Dataset& dataset, const ConstraintSet& pairwise,
                               const ConstraintSet& triplets, const TrainConfig& config,
                               const TrainState& initial, const EpochFn& on_epoch = {});

/// (# positions that differ) / n < tol.
bool has_converged(const Labels& previous, const Labels& current, double tol);

}  // namespace dcc
