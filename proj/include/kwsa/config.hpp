#pragma once

// Flat key/value configuration for the command-line tool. A config file has
// sections named after the library modules:
//
//   [schedule]
//   alpha0 = 1
//   delta  = 0.25
//
// Keys are unique across sections so each one can be overridden on the
// command line as `--key value`. Values are type-checked when set.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kwsa/error.hpp"
#include "kwsa/text.hpp"

namespace kwsa {

enum class ValueKind { u64, count, real, real_or_auto, real_list, text, choice };

struct KeySpec {
  std::string section;
  std::string key;
  ValueKind kind;
  std::string default_value;
  std::string help;
  std::vector<std::string> choices = {};
};

inline const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = {
      {"experiment", "seed", ValueKind::u64, "1", "root seed; every random stream derives from it"},
      {"experiment", "runs", ValueKind::count, "100", "Monte Carlo runs per p_fail"},
      {"experiment", "iters", ValueKind::count, "10000", "iterations per run (K)"},
      {"experiment", "pfail", ValueKind::real_list, "0,0.5,0.7", "comma-separated link failure probabilities"},
      {"experiment", "jobs", ValueKind::count, "1", "parallel runs"},
      {"experiment", "baseline", ValueKind::choice, "kwsa", "fusion-centre baseline", {"sgd", "kwsa", "none"}},
      {"experiment", "window", ValueKind::real, "0.25", "tail fraction of the log-k range used for rate fits"},
      {"experiment", "grid_ratio", ValueKind::real, "1.05", "geometric spacing of recorded iterations"},
      {"experiment", "truth_tol", ValueKind::real, "1e-9", "gradient-norm tolerance for the reference minimiser"},
      {"experiment", "out", ValueKind::text, "out", "output directory"},
      {"experiment", "data", ValueKind::text, "", "directory written by `gen` (empty: generate from the seed)"},
      {"schedule", "alpha0", ValueKind::real, "1", "innovation gain: alpha_k = alpha0/(k+1)"},
      {"schedule", "beta0", ValueKind::real_or_auto, "auto", "consensus gain; auto = 1/max degree"},
      {"schedule", "c0", ValueKind::real, "1", "finite-difference spacing: c_k = c0/(k+1)^delta"},
      {"schedule", "delta", ValueKind::real, "0.25", "spacing decay exponent"},
      {"schedule", "tau", ValueKind::real, "0.5", "consensus decay exponent"},
      {"network", "nodes", ValueKind::count, "10", "number of agents"},
      {"network", "radius", ValueKind::real_or_auto, "auto", "geometric graph radius; auto = connecting radius + 10%"},
      {"network", "max_degree", ValueKind::count, "7", "regenerate placements whose max degree exceeds this"},
      {"network", "retry_limit", ValueKind::count, "1000", "placement attempts before giving up"},
      {"objective", "points", ValueKind::count, "10", "datapoints per node"},
      {"objective", "feature_dim", ValueKind::count, "4", "features per datapoint (d = feature_dim + 1)"},
      {"objective", "kappa", ValueKind::real, "0.3", "l2 regularisation"},
      {"objective", "noise", ValueKind::choice, "gaussian", "oracle noise model", {"gaussian", "state-scaled"}},
      {"objective", "sigma", ValueKind::real, "1", "oracle noise standard deviation"},
      {"objective", "c_f", ValueKind::real, "0", "state-scaled noise coefficient"},
  };
  return schema;
}

inline const KeySpec* find_key(std::string_view key) {
  for (const auto& k : config_schema())
    if (k.key == key) return &k;
  return nullptr;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<double> parse_real_list(std::string_view text, std::string_view key) {
  std::vector<double> out;
  std::string s(text);
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_double(trim(item), key));
  if (out.empty()) throw ParseError(std::string(key) + ": empty list");
  return out;
}

inline std::uint64_t parse_u64(std::string_view s, std::string_view key) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty())
    throw ParseError(std::string(key) + ": expected a nonnegative integer, got \"" + std::string(s) + "\"");
  return v;
}

}  // namespace detail

class Config {
 public:
  static Config defaults() {
    Config c;
    for (const auto& k : config_schema()) c.values_[k.key] = k.default_value;
    return c;
  }

  /// Sets a known key after checking the value against its type.
  void set(const std::string& key, const std::string& raw) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("unknown key \"" + key + "\"");
    const std::string value = detail::trim(raw);
    try {
      check(*spec, value);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
    values_[key] = value;
  }

  /// Reads "[section]" headers and "key = value" lines; '#' starts a comment.
  void load_ini(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::string where = "config line " + std::to_string(lineno) + ": ";
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where + "unterminated section header");
        section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
        const auto& schema = config_schema();
        if (std::none_of(schema.begin(), schema.end(), [&](const KeySpec& k) { return k.section == section; }))
          throw ConfigError(where + "unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
      const std::string key = detail::trim(std::string_view(line).substr(0, eq));
      const KeySpec* spec = find_key(key);
      if (!spec) throw ConfigError(where + "unknown key \"" + key + "\"");
      if (spec->section != section)
        throw ConfigError(where + "key \"" + key + "\" belongs in section [" + spec->section + "]");
      set(key, line.substr(eq + 1));
    }
  }

  const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key \"" + key + "\"");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const { return detail::parse_u64(raw(key), key); }
  double real(const std::string& key) const { return parse_double(raw(key), key); }
  std::vector<double> reals(const std::string& key) const { return detail::parse_real_list(raw(key), key); }
  const std::string& text(const std::string& key) const { return raw(key); }

  /// nullopt for "auto".
  std::optional<double> real_or_auto(const std::string& key) const {
    const auto& v = raw(key);
    if (v == "auto") return std::nullopt;
    return parse_double(v, key);
  }

  /// Canonical "[section]\nkey = value" rendering of every key.
  std::string to_ini() const {
    std::ostringstream os;
    std::string section;
    for (const auto& k : config_schema()) {
      if (k.section != section) {
        if (!section.empty()) os << '\n';
        section = k.section;
        os << '[' << section << "]\n";
      }
      os << k.key << " = " << raw(k.key) << '\n';
    }
    return os.str();
  }

 private:
  static void check(const KeySpec& spec, const std::string& v) {
    switch (spec.kind) {
      case ValueKind::u64:
        detail::parse_u64(v, spec.key);
        break;
      case ValueKind::count:
        if (detail::parse_u64(v, spec.key) == 0) throw ParseError(spec.key + ": must be positive");
        break;
      case ValueKind::real:
        parse_double(v, spec.key);
        break;
      case ValueKind::real_or_auto:
        if (v != "auto") parse_double(v, spec.key);
        break;
      case ValueKind::real_list:
        detail::parse_real_list(v, spec.key);
        break;
      case ValueKind::text:
        break;
      case ValueKind::choice:
        if (std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end())
          throw ParseError(spec.key + ": \"" + v + "\" is not one of the allowed values");
        break;
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace kwsa
