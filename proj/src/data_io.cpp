#include "dcc/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string_view>

#include "dcc/error.hpp"

namespace dcc {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> inflate_gzip(const std::vector<std::uint8_t>& packed, const fs::path& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError("zlib init failed");
  zs.next_in = const_cast<Bytef*>(packed.data());
  zs.avail_in = static_cast<uInt>(packed.size());
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const auto offset = zs.total_in;
      inflateEnd(&zs);
      throw FormatError(path.string() + ": corrupt gzip stream near byte " + std::to_string(offset));
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc != Z_STREAM_END && zs.avail_in == 0 && zs.avail_out != 0) {
      const auto offset = zs.total_in;
      inflateEnd(&zs);
      throw FormatError(path.string() + ": truncated gzip stream at byte " + std::to_string(offset));
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> deflate_gzip(const std::vector<std::uint8_t>& raw) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw FormatError("zlib init failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())) + 32);
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw FormatError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes, bool gzip) {
  const auto& payload = gzip ? deflate_gzip(bytes) : bytes;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t offset, const fs::path& path) {
  if (offset + 4 > b.size()) {
    throw FormatError(path.string() + ": truncated IDX header at byte " + std::to_string(offset));
  }
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool looks_like_header(const std::vector<std::string_view>& fields) {
  double v;
  return std::none_of(fields.begin(), fields.end(), [&](std::string_view f) { return parse_double(f, v); });
}

}  // namespace

std::size_t Dataset::num_classes() const {
  if (!labels || labels->empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

std::vector<std::uint8_t> read_maybe_gzip(const fs::path& path) {
  auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return inflate_gzip(bytes, path);
  return bytes;
}

IdxImages read_idx_images(const fs::path& path) {
  const auto bytes = read_maybe_gzip(path);
  const auto magic = read_be32(bytes, 0, path);
  if (magic != kImageMagic) {
    std::ostringstream msg;
    msg << path.string() << ": bad IDX image magic 0x" << std::hex << std::setw(8) << std::setfill('0')
        << magic << " at byte 0";
    throw FormatError(msg.str());
  }
  IdxImages img;
  img.count = read_be32(bytes, 4, path);
  img.rows = read_be32(bytes, 8, path);
  img.cols = read_be32(bytes, 12, path);
  const std::size_t expected = std::size_t{img.count} * img.rows * img.cols;
  if (bytes.size() - 16 < expected) {
    throw FormatError(path.string() + ": truncated pixel data at byte " + std::to_string(bytes.size()) +
                      ", expected " + std::to_string(16 + expected));
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(expected));
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const fs::path& path) {
  const auto bytes = read_maybe_gzip(path);
  const auto magic = read_be32(bytes, 0, path);
  if (magic != kLabelMagic) {
    std::ostringstream msg;
    msg << path.string() << ": bad IDX label magic 0x" << std::hex << std::setw(8) << std::setfill('0')
        << magic << " at byte 0";
    throw FormatError(msg.str());
  }
  const std::size_t count = read_be32(bytes, 4, path);
  if (bytes.size() - 8 < count) {
    throw FormatError(path.string() + ": truncated label data at byte " + std::to_string(bytes.size()) +
                      ", expected " + std::to_string(8 + count));
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

void write_idx_images(const fs::path& path, const IdxImages& images, bool gzip) {
  if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols) {
    throw DimensionError("write_idx_images: pixel count does not match header");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + images.pixels.size());
  put_be32(bytes, kImageMagic);
  put_be32(bytes, images.count);
  put_be32(bytes, images.rows);
  put_be32(bytes, images.cols);
  bytes.insert(bytes.end(), images.pixels.begin(), images.pixels.end());
  write_bytes(path, bytes, gzip);
}

void write_idx_labels(const fs::path& path, const std::vector<std::uint8_t>& labels, bool gzip) {
  std::vector<std::uint8_t> bytes;
  put_be32(bytes, kLabelMagic);
  put_be32(bytes, static_cast<std::uint32_t>(labels.size()));
  bytes.insert(bytes.end(), labels.begin(), labels.end());
  write_bytes(path, bytes, gzip);
}

Dataset load_idx(const fs::path& images_path, const std::optional<fs::path>& labels_path) {
  const auto img = read_idx_images(images_path);
  if (img.count == 0 || img.rows * img.cols == 0) throw FormatError(images_path.string() + ": empty IDX file");
  Dataset ds;
  const std::size_t d = std::size_t{img.rows} * img.cols;
  ds.features = Matrix(img.count, d);
  auto out = ds.features.values();
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out[i] = img.pixels[i] / 255.0;
  if (labels_path) {
    const auto raw = read_idx_labels(*labels_path);
    if (raw.size() != img.count) {
      throw ConsistencyError(std::to_string(img.count) + " images but " + std::to_string(raw.size()) +
                             " labels");
    }
    ds.labels = Labels(raw.begin(), raw.end());
  }
  ds.source = images_path.string();
  ds.format = "idx";
  return ds;
}

Dataset load_csv(const fs::path& path, bool has_labels) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<double> values;
  Labels labels;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (rows == 0 && cols == 0 && looks_like_header(fields)) continue;
    const std::size_t width = fields.size() - (has_labels ? 1 : 0);
    if (width == 0) throw FormatError(path.string() + ": row " + std::to_string(line_no) + " has no features");
    if (cols == 0) cols = width;
    if (width != cols) {
      throw FormatError(path.string() + ": row " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(cols + (has_labels ? 1 : 0)));
    }
    for (std::size_t c = 0; c < width; ++c) {
      double v;
      if (!parse_double(fields[c], v)) {
        throw FormatError(path.string() + ": row " + std::to_string(line_no) + " column " +
                          std::to_string(c + 1) + ": not a number '" + std::string(fields[c]) + "'");
      }
      values.push_back(v);
    }
    if (has_labels) {
      int label;
      if (!parse_int(fields.back(), label) || label < 0) {
        throw FormatError(path.string() + ": row " + std::to_string(line_no) + ": bad label '" +
                          std::string(fields.back()) + "'");
      }
      labels.push_back(label);
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path.string() + ": no data rows");
  Dataset ds;
  ds.features = Matrix(rows, cols, std::move(values));
  if (has_labels) ds.labels = std::move(labels);
  ds.source = path.string();
  ds.format = "csv";
  return ds;
}

Labels load_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Labels labels;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split_commas(t);
    int v;
    if (!parse_int(fields.back(), v)) {
      if (first && looks_like_header(fields)) {
        first = false;
        continue;
      }
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": not an integer label");
    }
    first = false;
    labels.push_back(v);
  }
  if (labels.empty()) throw FormatError(path.string() + ": no labels");
  return labels;
}

void write_labels(const fs::path& path, const Labels& labels) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
}

void write_matrix_csv(const fs::path& path, const Matrix& m, const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << prefix << c;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

BatchSchedule make_schedule(std::size_t n, std::size_t batch_size, SeededRng& rng) {
  if (batch_size == 0) throw ArgumentError("batch size must be at least 1");
  if (n == 0) throw ArgumentError("cannot schedule an empty dataset");
  batch_size = std::min(batch_size, n);
  BatchSchedule schedule;
  schedule.batch_size = batch_size;
  schedule.epoch_seed = rng.next_u64();
  SeededRng epoch_rng(schedule.epoch_seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  epoch_rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    schedule.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return schedule;
}

}  // namespace dcc
