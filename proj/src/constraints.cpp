#include "dcc/constraints.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

namespace fs = std::filesystem;

namespace {

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos &&
      s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

void check_index(std::size_t i, std::size_t n, const char* what) {
  if (i >= n) {
    throw ArgumentError(std::string(what) + " index " + std::to_string(i) + " outside [0, " +
                        std::to_string(n) + ")");
  }
}

void check_pair(const IndexPair& p, std::size_t n, const char* what) {
  check_index(p.a, n, what);
  check_index(p.b, n, what);
  if (p.a == p.b) throw ArgumentError(std::string(what) + " pair links instance " + std::to_string(p.a) + " to itself");
}

std::size_t parse_index(const std::string& tok, const fs::path& path, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw FormatError(path.string() + ": line " + std::to_string(line) + ": bad index '" + tok + "'");
  }
  return v;
}

double parse_real(const std::string& tok, const fs::path& path, std::size_t line) {
  double v = 0.0;
  std::string_view s(tok);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(path.string() + ": line " + std::to_string(line) + ": bad number '" + tok + "'");
  }
  return v;
}

}  // namespace

bool ConstraintSet::empty() const {
  return must_links.empty() && cannot_links.empty() && triplets.empty() && !difficulty && !global_size &&
         !cardinality && horn_rules.empty();
}

void ConstraintSet::validate(std::size_t n) const {
  for (const auto& p : must_links) check_pair(p, n, "must-link");
  for (const auto& p : cannot_links) check_pair(p, n, "cannot-link");
  for (const auto& t : triplets) {
    check_index(t.anchor, n, "triplet");
    check_index(t.positive, n, "triplet");
    check_index(t.negative, n, "triplet");
    if (t.anchor == t.positive || t.anchor == t.negative || t.positive == t.negative) {
      throw ArgumentError("triplet (" + std::to_string(t.anchor) + ", " + std::to_string(t.positive) + ", " +
                          std::to_string(t.negative) + ") repeats an instance");
    }
  }
  if (difficulty) {
    if (difficulty->size() != n) {
      throw ArgumentError("difficulty vector has " + std::to_string(difficulty->size()) + " entries for " +
                          std::to_string(n) + " instances");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double m = (*difficulty)[i];
      if (!(m >= -1.0 && m <= 1.0)) {
        throw ArgumentError("difficulty of instance " + std::to_string(i) + " outside [-1, 1]");
      }
    }
  }
  if (cardinality) {
    if (cardinality->psv.size() != n) {
      throw ArgumentError("protected-status vector length does not match the dataset");
    }
    for (int g : cardinality->psv) {
      if (g != 0 && g != 1) throw ArgumentError("protected status must be 0 or 1");
    }
    if (cardinality->mode == CardinalitySpec::Mode::bounds &&
        !(cardinality->lower >= 0.0 && cardinality->lower <= cardinality->upper)) {
      throw ArgumentError("cardinality bounds need 0 <= L <= U");
    }
  }
  for (const auto& rule : horn_rules) {
    if (rule.body.empty()) throw ArgumentError("Horn rule with an empty body");
    for (const auto& p : rule.body) check_pair(p, n, "Horn body");
    check_pair(rule.head, n, "Horn head");
  }

  std::vector<IndexPair> ml;
  ml.reserve(must_links.size());
  for (const auto& p : must_links) ml.push_back(canonical(p));
  std::sort(ml.begin(), ml.end());
  for (const auto& p : cannot_links) {
    const auto c = canonical(p);
    if (std::binary_search(ml.begin(), ml.end(), c)) {
      throw ConsistencyError("pair (" + std::to_string(c.a) + ", " + std::to_string(c.b) +
                             ") is both must-link and cannot-link");
    }
  }
}

ConstraintSet read_constraints(const fs::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  ConstraintSet set;
  std::string line;
  std::size_t line_no = 0;
  auto arity_error = [&](const std::string& kind) {
    return FormatError(path.string() + ": line " + std::to_string(line_no) + ": malformed " + kind + " record");
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::vector<std::string> tok;
    for (std::string t; tokens >> t && t.front() != '#';) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& kind = tok.front();
    auto idx = [&](std::size_t i) { return parse_index(tok[i], path, line_no); };
    if (kind == "ML" || kind == "CL") {
      if (tok.size() != 3) throw arity_error(kind);
      (kind == "ML" ? set.must_links : set.cannot_links).push_back({idx(1), idx(2)});
    } else if (kind == "TRI") {
      if (tok.size() != 4) throw arity_error(kind);
      set.triplets.push_back({idx(1), idx(2), idx(3)});
    } else if (kind == "DIF") {
      if (tok.size() != 3) throw arity_error(kind);
      const auto i = idx(1);
      check_index(i, n, "difficulty");
      if (!set.difficulty) set.difficulty.emplace(n, 0.0);
      (*set.difficulty)[i] = parse_real(tok[2], path, line_no);
    } else if (kind == "PSV") {
      if (tok.size() != 3) throw arity_error(kind);
      const auto i = idx(1);
      check_index(i, n, "protected-status");
      if (!set.cardinality) set.cardinality.emplace(CardinalitySpec{std::vector<int>(n, 0)});
      set.cardinality->psv[i] = static_cast<int>(idx(2));
    } else if (kind == "HORN") {
      const auto arrow = std::find(tok.begin(), tok.end(), "->");
      const auto body_len = static_cast<std::size_t>(arrow - tok.begin()) - 1;
      if (arrow == tok.end() || body_len == 0 || body_len % 2 != 0 || tok.end() - arrow != 3) {
        throw arity_error(kind);
      }
      HornRule rule;
      for (std::size_t i = 1; i + 1 < 1 + body_len + 1; i += 2) rule.body.push_back({idx(i), idx(i + 1)});
      const auto head = static_cast<std::size_t>(arrow - tok.begin()) + 1;
      rule.head = {idx(head), idx(head + 1)};
      set.horn_rules.push_back(std::move(rule));
    } else {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": unknown record '" + kind + "'");
    }
  }
  return set;
}

void write_constraints(const fs::path& path, const ConstraintSet& set) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& p : set.must_links) out << "ML " << p.a << ' ' << p.b << '\n';
  for (const auto& p : set.cannot_links) out << "CL " << p.a << ' ' << p.b << '\n';
  for (const auto& t : set.triplets) out << "TRI " << t.anchor << ' ' << t.positive << ' ' << t.negative << '\n';
  if (set.difficulty) {
    for (std::size_t i = 0; i < set.difficulty->size(); ++i) {
      const double m = (*set.difficulty)[i];
      if (m != 0.0) out << "DIF " << i << ' ' << format_real(m) << '\n';
    }
  }
  if (set.cardinality) {
    for (std::size_t i = 0; i < set.cardinality->psv.size(); ++i) {
      out << "PSV " << i << ' ' << set.cardinality->psv[i] << '\n';
    }
  }
  for (const auto& rule : set.horn_rules) {
    out << "HORN";
    for (const auto& p : rule.body) out << ' ' << p.a << ' ' << p.b;
    out << " -> " << rule.head.a << ' ' << rule.head.b << '\n';
  }
}

ConstraintSet merge(ConstraintSet base, const ConstraintSet& extra) {
  base.must_links.insert(base.must_links.end(), extra.must_links.begin(), extra.must_links.end());
  base.cannot_links.insert(base.cannot_links.end(), extra.cannot_links.begin(), extra.cannot_links.end());
  base.triplets.insert(base.triplets.end(), extra.triplets.begin(), extra.triplets.end());
  base.horn_rules.insert(base.horn_rules.end(), extra.horn_rules.begin(), extra.horn_rules.end());
  if (extra.difficulty) base.difficulty = extra.difficulty;
  if (extra.cardinality) base.cardinality = extra.cardinality;
  base.global_size = base.global_size || extra.global_size;
  return base;
}

}  // namespace dcc
