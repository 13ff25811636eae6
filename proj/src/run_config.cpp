#include "dcc/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcc/error.hpp"

namespace dcc {

namespace fs = std::filesystem;

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"seed", "0", "master random seed"},
      {"data.path", "", "features: IDX image file or CSV"},
      {"data.labels", "", "IDX label file or one-integer-per-line labels"},
      {"data.format", "idx", "idx or csv"},
      {"data.csv_labels", "false", "CSV carries an integer label in its last column"},
      {"arch.dims", "500,500,2000,10", "hidden and latent widths after the input layer"},
      {"pretrain.corruption", "0.2", "fraction of inputs zeroed during layerwise pretraining"},
      {"pretrain.layerwise_epochs", "50", "epochs per greedy layer"},
      {"pretrain.finetune_epochs", "100", "end-to-end fine-tuning epochs"},
      {"pretrain.learning_rate", "0.001", "Adam step size for pretraining"},
      {"pretrain.batch_size", "256", "pretraining mini-batch size"},
      {"pretrain.checkpoint", "", "autoencoder checkpoint used by the ae init modes"},
      {"train.clusters", "10", "number of clusters k"},
      {"train.max_epochs", "100", "epoch limit m"},
      {"train.batch_size", "256", "additive-branch mini-batch size"},
      {"train.learning_rate", "0.001", "Adam step size"},
      {"train.lambda_ml", "0.1", "must-link weight"},
      {"train.triplet_margin", "0.1", "triplet hinge margin"},
      {"train.constraint_batch_size", "256", "constraint records per constraint batch"},
      {"train.convergence_tol", "0.001", "stop when the changed-label fraction drops below this"},
      {"train.init_mode", "ae+kmeans", "raw+rand, raw+kmeans, ae+rand or ae+kmeans"},
      {"train.clustering_loss", "true", "include the KL clustering loss"},
      {"train.horn_tau", "0.5", "similarity threshold for Horn-rule bodies"},
      {"train.kmeans_restarts", "20", "k-means restarts for centroid initialization"},
      {"train.checkpoint_every", "0", "write a checkpoint every E epochs (0 = final only)"},
      {"constraints.path", "", "comma-separated constraint files"},
      {"constraints.triplets_path", "", "second constraint file trained as triplet batches alongside the first"},
      {"constraints.types", "pairwise,triplet,difficulty,cardinality,horn",
       "record families taken from the files; add 'global' for the global size loss"},
      {"cardinality.mode", "equal", "equal (balance both groups) or bounds (group mass per cluster in [L, U])"},
      {"cardinality.lower", "0", "lower bound L on first-group mass per cluster, bounds mode"},
      {"cardinality.upper", "0", "upper bound U on first-group mass per cluster, bounds mode"},
      {"gen.mode", "pairwise", "pairwise, difficulty, triplet-embedding or triplet-ontology"},
      {"gen.count", "1000", "pairs or triplets to generate"},
      {"gen.output", "", "constraint file to write (default under output.dir)"},
      {"gen.close", "false", "expand pairwise output with its transitive closure"},
      {"gen.embedding", "", "embedding CSV for triplet-embedding mode"},
      {"gen.theta_p", "0.5", "ontology positive-similarity threshold"},
      {"gen.theta_n", "0.3", "ontology negative-similarity threshold"},
      {"gen.pool", "0", "labeled instances drawn for ontology triplets (0 = all)"},
      {"gen.weak_restarts", "5", "k-means restarts of the difficulty weak learner"},
      {"ontology.path", "", "ontology edge list"},
      {"classmap.path", "", "class id to ontology node map"},
      {"noise.degree", "0", "fraction of flipped pairwise constraints added"},
      {"negative_ratio.sets", "20", "constraint sets in the negative-ratio harness"},
      {"negative_ratio.pairs", "3600", "pairs per constraint set"},
      {"evaluate.labels", "", "ground-truth labels for evaluate"},
      {"evaluate.assignments", "", "predicted assignments for evaluate"},
      {"output.dir", "runs", "root for every written artifact"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool known_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return key == k.name; });
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ": line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (!known_key(key)) {
      throw FormatError(origin + ": line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ArgumentError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ArgumentError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& text = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ArgumentError(key + ": expected a number, got '" + text + "'");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const auto& text = get(key);
  if (!text.empty() && text.front() != '-') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(text, &used);
      if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
  }
  throw ArgumentError(key + ": expected a non-negative integer, got '" + text + "'");
}

std::size_t RunConfig::get_count(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const auto& text = get(key);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ArgumentError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> RunConfig::get_counts(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : get_list(key)) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used == item.size() && item.front() != '-') {
        out.push_back(static_cast<std::size_t>(v));
        continue;
      }
    } catch (const std::exception&) {
    }
    throw ArgumentError(key + ": expected comma-separated counts, got '" + get(key) + "'");
  }
  return out;
}

std::optional<fs::path> RunConfig::get_path(const std::string& key) const {
  const auto& text = get(key);
  if (text.empty()) return std::nullopt;
  return fs::path(text);
}

fs::path RunConfig::output_dir() const {
  const auto dir = get("output.dir");
  if (dir.empty()) throw ArgumentError("output.dir must not be empty");
  return dir;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << " = " << get(k.name) << '\n';
  return out.str();
}

TrainConfig RunConfig::train_config(std::size_t input_width) const {
  TrainConfig t;
  t.clusters = get_count("train.clusters");
  t.max_epochs = get_count("train.max_epochs");
  t.batch_size = get_count("train.batch_size");
  t.learning_rate = get_double("train.learning_rate");
  t.lambda_ml = get_double("train.lambda_ml");
  t.triplet_margin = get_double("train.triplet_margin");
  t.constraint_batch_size = get_count("train.constraint_batch_size");
  t.convergence_tol = get_double("train.convergence_tol");
  t.init_mode = parse_init_mode(get("train.init_mode"));
  t.clustering_loss_enabled = get_bool("train.clustering_loss");
  t.seed = seed();
  t.horn_tau = get_double("train.horn_tau");
  t.kmeans_restarts = get_count("train.kmeans_restarts");
  t.checkpoint_every = get_count("train.checkpoint_every");
  t.dims = sdae_config(input_width).dims;
  t.validate();
  return t;
}

SdaeConfig RunConfig::sdae_config(std::size_t input_width) const {
  SdaeConfig s;
  s.dims = {input_width};
  for (auto w : get_counts("arch.dims")) s.dims.push_back(w);
  s.corruption_rate = get_double("pretrain.corruption");
  s.layerwise_epochs = get_count("pretrain.layerwise_epochs");
  s.finetune_epochs = get_count("pretrain.finetune_epochs");
  s.learning_rate = get_double("pretrain.learning_rate");
  s.batch_size = get_count("pretrain.batch_size");
  s.validate();
  return s;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const auto got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace dcc
