#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dcc/matrix.hpp"
#include "dcc/rng.hpp"

namespace dcc {

using Labels = std::vector<int>;

struct Dataset {
  Matrix features;               // n x d
  std::optional<Labels> labels;  // length n when present
  std::string source;            // path the features came from
  std::string format;            // "idx" or "csv"

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  /// Number of distinct label values (max label + 1); 0 without labels.
  std::size_t num_classes() const;
};

/// Raw IDX image block: n x rows x cols bytes.
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Reads a file, inflating it first if it starts with the gzip magic bytes.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path);

IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images, bool gzip = false);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels,
                      bool gzip = false);

/// Pixels scaled to [0,1] by /255, one row per image.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Rectangular numeric CSV; with `has_labels` the last column is an integer label.
/// A non-numeric first line is treated as a header and skipped.
Dataset load_csv(const std::filesystem::path& path, bool has_labels);

/// One integer per line. Also accepts CSV rows (last field is used) with an
/// optional header, so exported assignment files can be read back.
Labels load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const Labels& labels);

/// CSV with a header row `prefix0,prefix1,...`.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::string& prefix);

struct BatchSchedule {
  std::vector<std::vector<std::size_t>> batches;
  std::size_t batch_size = 0;
  std::uint64_t epoch_seed = 0;
};

/// Seeded permutation of [0, n) cut into ceil(n / batch_size) batches.
BatchSchedule make_schedule(std::size_t n, std::size_t batch_size, SeededRng& rng);

}  // namespace dcc
