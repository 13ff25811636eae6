#include "dcc/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dcc/error.hpp"

namespace dcc {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 8> kMagic{'D', 'C', 'C', 'K', 'P', 'T', '\r', '\n'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void doubles(std::span<const double> vs) {
    u64(vs.size());
    for (double v : vs) f64(v);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> doubles(std::size_t expected) {
    const auto count = u64();
    if (count != expected) fail("expected " + std::to_string(expected) + " values, found " + std::to_string(count));
    need(count * 8);
    std::vector<double> out(count);
    for (auto& v : out) v = f64();
    return out;
  }
  std::vector<double> doubles_any() {
    const auto count = u64();
    need(count * 8);
    std::vector<double> out(count);
    for (auto& v : out) v = f64();
    return out;
  }
  void expect_magic() {
    need(kMagic.size());
    if (std::memcmp(bytes_.data(), kMagic.data(), kMagic.size()) != 0) fail("not a checkpoint file");
    pos_ += kMagic.size();
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(name_ + ": " + what + " (byte offset " + std::to_string(pos_) + ")");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }

  std::vector<std::uint8_t> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void write_mlp(Writer& w, const MlpParams& net) {
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    w.u64(layer.out_width());
    w.u64(layer.in_width());
    w.u8(static_cast<std::uint8_t>(layer.activation));
    w.doubles(layer.weight.values());
    w.doubles(layer.bias);
  }
}

MlpParams read_mlp(Reader& r) {
  MlpParams net;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto out = r.u64();
    const auto in = r.u64();
    const auto act = r.u8();
    if (act > static_cast<std::uint8_t>(Activation::identity)) r.fail("unknown activation code");
    if (out == 0 || in == 0 || out > (1u << 24) || in > (1u << 24)) r.fail("implausible layer shape");
    DenseLayer layer;
    layer.activation = static_cast<Activation>(act);
    layer.weight = Matrix(out, in, r.doubles(out * in));
    const auto bias = r.doubles(out);
    layer.bias.assign(bias.begin(), bias.end());
    if (!net.layers.empty() && net.layers.back().out_width() != in) r.fail("layer widths do not chain");
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  w.u64(checkpoint.epoch);
  write_mlp(w, checkpoint.autoencoder.encoder);
  write_mlp(w, checkpoint.autoencoder.decoder);

  w.u8(checkpoint.clusters ? 1 : 0);
  if (checkpoint.clusters) {
    const auto& c = *checkpoint.clusters;
    w.u64(c.centroids.rows());
    w.u64(c.centroids.cols());
    w.f64(c.dof);
    w.doubles(c.centroids.values());
  }

  w.u8(checkpoint.optimizer ? 1 : 0);
  if (checkpoint.optimizer) {
    const auto& a = *checkpoint.optimizer;
    w.u64(a.step);
    w.f64(a.beta1);
    w.f64(a.beta2);
    w.f64(a.epsilon);
    w.f64(a.learning_rate);
    w.u64(a.first_moment.size());
    for (std::size_t i = 0; i < a.first_moment.size(); ++i) {
      w.doubles(a.first_moment[i]);
      w.doubles(a.second_moment[i]);
    }
  }

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw InputError("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());
  r.expect_magic();
  const auto version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

  Checkpoint cp;
  cp.epoch = r.u64();
  cp.autoencoder.encoder = read_mlp(r);
  cp.autoencoder.decoder = read_mlp(r);
  if (cp.autoencoder.encoder.layers.empty() || cp.autoencoder.decoder.layers.empty()) r.fail("empty network");
  if (cp.autoencoder.decoder.input_width() != cp.autoencoder.encoder.output_width() ||
      cp.autoencoder.decoder.output_width() != cp.autoencoder.encoder.input_width()) {
    r.fail("decoder does not mirror encoder");
  }

  if (r.u8() != 0) {
    const auto k = r.u64();
    const auto dim = r.u64();
    if (k == 0 || k > (1u << 20) || dim != cp.autoencoder.latent_width()) r.fail("centroid shape mismatch");
    ClusterModel c;
    c.dof = r.f64();
    c.centroids = Matrix(k, dim, r.doubles(k * dim));
    cp.clusters = std::move(c);
  }

  if (r.u8() != 0) {
    AdamState a;
    a.step = r.u64();
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.epsilon = r.f64();
    a.learning_rate = r.f64();
    const auto buffers = r.u64();
    if (buffers > (1u << 20)) r.fail("implausible optimizer buffer count");
    for (std::uint64_t i = 0; i < buffers; ++i) {
      const auto m = r.doubles_any();
      const auto v = r.doubles(m.size());
      a.first_moment.emplace_back(m.begin(), m.end());
      a.second_moment.emplace_back(v.begin(), v.end());
    }
    cp.optimizer = std::move(a);
  }
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return cp;
}

}  // namespace dcc
