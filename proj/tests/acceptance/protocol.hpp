#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace dcc::acceptance {

struct Outcome {
  int criterion = 0;
  bool pass = false;
  std::string detail;
};

/// Runs the requested MNIST-subset criteria (5 to 9). Baseline runs are shared
/// between criteria. The pretrained autoencoder is stored in `cache` when given.
std::vector<Outcome> run_mnist_criteria(const std::set<int>& criteria, const std::filesystem::path& data_dir,
                                        const std::optional<std::filesystem::path>& cache, std::ostream& log);

}  // namespace dcc::acceptance
