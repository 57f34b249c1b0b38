#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/nn/model.hpp"
#include "actscore/scoring/profile.hpp"
#include "actscore/ssl/pipeline.hpp"
#include "actscore/stats/bins.hpp"

namespace actscore::app {

class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Effective settings of a CLI run. Text form is `key=value` lines with `#`
/// comments; see effective_config_text() for every key.
struct RunConfig {
  std::string out_dir = "out";
  std::string data_dir;    // empty: read inputs from out_dir
  std::string checkpoint;  // empty: <out_dir>/model.amd

  std::size_t num_classes = 4;
  std::size_t per_class = 1000;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.8;
  double split_train = 0.375;
  double split_additional = 0.375;
  double split_test = 0.25;

  nn::DefaultArchitecture arch;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::optional<double> ssl_learning_rate;  // empty: learning_rate
  std::size_t pretrain_epochs = 15;
  std::size_t ssl_epochs = 10;

  scoring::ScoreConfig score{scoring::Norm::max, 2.0, scoring::ThresholdBasis::mean};

  ssl::SelectionMode mode = ssl::SelectionMode::score;
  double alpha_default = 0.3;
  std::map<std::size_t, double> alpha_overrides;
  std::size_t update_interval = 1;
  ssl::ProfileScope scope = ssl::ProfileScope::per_class;

  std::size_t bootstrap_resamples = 10000;
  std::size_t bootstrap_last_k = 50;
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> bin_edges = stats::default_bin_edges();
  std::size_t bin_quantiles = 0;  // > 0: edges at train-score quantiles instead of bin_edges

  /// alpha_c for c in [0, num_classes).
  std::vector<double> alpha() const {
    std::vector<double> a(num_classes, alpha_default);
    for (const auto& [c, v] : alpha_overrides) {
      if (c >= num_classes)
        throw ConfigError("alpha." + std::to_string(c) + " refers to a class outside [0, " +
                          std::to_string(num_classes) + ")");
      a[c] = v;
    }
    return a;
  }

  ssl::SelectionPolicy policy() const { return {mode, alpha(), update_interval, scope}; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("invalid value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  return value;
}

inline double parse_fraction(std::string_view key, std::string_view text) {
  const double v = parse_number<double>(key, text);
  if (!(v >= 0.0 && v <= 1.0))
    throw ConfigError("'" + std::string(key) + "' must be in [0, 1], got " + std::string(text));
  return v;
}

inline std::size_t parse_positive(std::string_view key, std::string_view text) {
  const auto v = parse_number<std::size_t>(key, text);
  if (v == 0) throw ConfigError("'" + std::string(key) + "' must be positive");
  return v;
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<T>(key, trim(text.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("'" + std::string(key) + "' needs at least one value");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += shortest(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

inline void apply(RunConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k(key);
  if (k == "out") {
    cfg.out_dir = value;
  } else if (k == "data_dir") {
    cfg.data_dir = value;
  } else if (k == "checkpoint") {
    cfg.checkpoint = value;
  } else if (k == "num_classes") {
    cfg.num_classes = parse_number<std::size_t>(key, value);
    if (cfg.num_classes < 2 || cfg.num_classes > 16) throw ConfigError("'num_classes' must be in [2, 16]");
  } else if (k == "per_class") {
    cfg.per_class = parse_positive(key, value);
  } else if (k == "height") {
    cfg.height = parse_positive(key, value);
  } else if (k == "width") {
    cfg.width = parse_positive(key, value);
  } else if (k == "noise") {
    cfg.noise = parse_fraction(key, value);
  } else if (k == "split.train") {
    cfg.split_train = parse_fraction(key, value);
  } else if (k == "split.additional") {
    cfg.split_additional = parse_fraction(key, value);
  } else if (k == "split.test") {
    cfg.split_test = parse_fraction(key, value);
  } else if (k == "conv1_channels") {
    cfg.arch.conv1_channels = parse_positive(key, value);
  } else if (k == "conv2_channels") {
    cfg.arch.conv2_channels = parse_positive(key, value);
  } else if (k == "hidden_units") {
    cfg.arch.hidden_units = parse_positive(key, value);
  } else if (k == "keep_prob") {
    cfg.arch.keep_prob = parse_fraction(key, value);
    if (cfg.arch.keep_prob == 0.0) throw ConfigError("'keep_prob' must be in (0, 1]");
  } else if (k == "batch_size") {
    cfg.batch_size = parse_positive(key, value);
  } else if (k == "lr") {
    cfg.learning_rate = parse_number<double>(key, value);
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("'lr' must be positive");
  } else if (k == "ssl_lr") {
    if (value.empty()) {
      cfg.ssl_learning_rate.reset();
    } else {
      cfg.ssl_learning_rate = parse_number<double>(key, value);
      if (!(*cfg.ssl_learning_rate > 0.0)) throw ConfigError("'ssl_lr' must be positive");
    }
  } else if (k == "pretrain_epochs") {
    cfg.pretrain_epochs = parse_number<std::size_t>(key, value);
  } else if (k == "ssl_epochs") {
    cfg.ssl_epochs = parse_number<std::size_t>(key, value);
  } else if (k == "norm") {
    if (value == "max") cfg.score.norm = scoring::Norm::max;
    else if (value == "l1") cfg.score.norm = scoring::Norm::l1;
    else if (value == "l2") cfg.score.norm = scoring::Norm::l2;
    else throw ConfigError("invalid norm '" + std::string(value) + "' (valid: max, l1, l2)");
  } else if (k == "divisor") {
    cfg.score.divisor = parse_number<double>(key, value);
    if (!(cfg.score.divisor > 0.0)) throw ConfigError("'divisor' must be positive");
  } else if (k == "threshold_basis") {
    if (value == "sum") cfg.score.basis = scoring::ThresholdBasis::sum;
    else if (value == "mean") cfg.score.basis = scoring::ThresholdBasis::mean;
    else throw ConfigError("invalid threshold_basis '" + std::string(value) + "' (valid: sum, mean)");
  } else if (k == "mode") {
    if (value == "score") cfg.mode = ssl::SelectionMode::score;
    else if (value == "softmax") cfg.mode = ssl::SelectionMode::softmax;
    else throw ConfigError("invalid mode '" + std::string(value) + "' (valid: score, softmax)");
  } else if (k == "scope") {
    if (value == "per_class") cfg.scope = ssl::ProfileScope::per_class;
    else if (value == "global") cfg.scope = ssl::ProfileScope::global;
    else throw ConfigError("invalid scope '" + std::string(value) + "' (valid: per_class, global)");
  } else if (k == "alpha.default") {
    cfg.alpha_default = parse_fraction(key, value);
  } else if (k.starts_with("alpha.")) {
    const auto c = parse_number<std::size_t>(key, std::string_view(k).substr(6));
    cfg.alpha_overrides[c] = parse_fraction(key, value);
  } else if (k == "update_interval") {
    cfg.update_interval = parse_positive(key, value);
  } else if (k == "bootstrap.resamples") {
    cfg.bootstrap_resamples = parse_positive(key, value);
  } else if (k == "bootstrap.last_k") {
    cfg.bootstrap_last_k = parse_positive(key, value);
  } else if (k == "seeds") {
    cfg.seeds = parse_list<std::uint64_t>(key, value);
  } else if (k == "bin_edges") {
    cfg.bin_edges = parse_list<double>(key, value);
    if (cfg.bin_edges.size() < 2) throw ConfigError("'bin_edges' needs at least two values");
    for (std::size_t i = 1; i < cfg.bin_edges.size(); ++i)
      if (!(cfg.bin_edges[i] > cfg.bin_edges[i - 1])) throw ConfigError("'bin_edges' must be strictly increasing");
  } else if (k == "bin_quantiles") {
    cfg.bin_quantiles = parse_number<std::size_t>(key, value);
  } else {
    throw ConfigError("unknown key '" + k + "'");
  }
}

}  // namespace detail

/// Parses `key=value` lines over the defaults. Errors name the line number.
inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + std::string(line) + "'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    try {
      detail::apply(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (cfg.split_train + cfg.split_additional + cfg.split_test > 1.0 + 1e-12)
    throw ConfigError("split fractions sum to more than 1");
  cfg.alpha();
  return cfg;
}

/// Canonical text of every effective setting; parse_config() of this text
/// reproduces the config.
inline std::string effective_config_text(const RunConfig& c) {
  using detail::shortest;
  std::ostringstream o;
  auto norm = c.score.norm == scoring::Norm::max ? "max" : c.score.norm == scoring::Norm::l1 ? "l1" : "l2";
  o << "out=" << c.out_dir << "\n"
    << "data_dir=" << c.data_dir << "\n"
    << "checkpoint=" << c.checkpoint << "\n"
    << "num_classes=" << c.num_classes << "\n"
    << "per_class=" << c.per_class << "\n"
    << "height=" << c.height << "\n"
    << "width=" << c.width << "\n"
    << "noise=" << shortest(c.noise) << "\n"
    << "split.train=" << shortest(c.split_train) << "\n"
    << "split.additional=" << shortest(c.split_additional) << "\n"
    << "split.test=" << shortest(c.split_test) << "\n"
    << "conv1_channels=" << c.arch.conv1_channels << "\n"
    << "conv2_channels=" << c.arch.conv2_channels << "\n"
    << "hidden_units=" << c.arch.hidden_units << "\n"
    << "keep_prob=" << shortest(c.arch.keep_prob) << "\n"
    << "batch_size=" << c.batch_size << "\n"
    << "lr=" << shortest(c.learning_rate) << "\n"
    << "ssl_lr=" << (c.ssl_learning_rate ? shortest(*c.ssl_learning_rate) : std::string()) << "\n"
    << "pretrain_epochs=" << c.pretrain_epochs << "\n"
    << "ssl_epochs=" << c.ssl_epochs << "\n"
    << "norm=" << norm << "\n"
    << "divisor=" << shortest(c.score.divisor) << "\n"
    << "threshold_basis=" << (c.score.basis == scoring::ThresholdBasis::sum ? "sum" : "mean") << "\n"
    << "mode=" << ssl::mode_name(c.mode) << "\n"
    << "scope=" << ssl::scope_name(c.scope) << "\n"
    << "alpha.default=" << shortest(c.alpha_default) << "\n";
  for (const auto& [k, v] : c.alpha_overrides) o << "alpha." << k << "=" << shortest(v) << "\n";
  o << "update_interval=" << c.update_interval << "\n"
    << "bootstrap.resamples=" << c.bootstrap_resamples << "\n"
    << "bootstrap.last_k=" << c.bootstrap_last_k << "\n"
    << "seeds=" << detail::join(c.seeds) << "\n"
    << "bin_edges=" << detail::join(c.bin_edges) << "\n"
    << "bin_quantiles=" << c.bin_quantiles << "\n";
  return o.str();
}

/// 64-bit FNV-1a, used to fingerprint the effective config in manifests.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace actscore::app
