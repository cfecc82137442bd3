#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mgnn/io.hpp"
#include "mgnn/pipeline.hpp"

namespace mgnn {

// Fully resolved run configuration. Text form: `section.key = value` lines,
// `#` comments. Precedence: built-in defaults < config file < command line.
struct RunConfig {
  TrainConfig train;
  std::size_t scale_count = 5;
  double scale_init_max = 2.5;
  std::string kernel_family = "sx_exp";
  bool normalized = false;
  bool approximate = false;
  int approx_order = 30;
  std::vector<Eigen::Index> widths{2000, 128, 32};
  int folds = 3;
  std::string manifest;
  bool absolute_values = false;
  std::string out_dir;
  std::uint64_t seed = 0;
  int workers = 1;

  // Synthetic population generation.
  Eigen::Index synth_n = 20;
  double synth_sigma = 0.05;
  std::vector<int> synth_counts{60, 60};
  std::vector<std::string> synth_templates;
  double synth_separation = 5.0;
  double synth_density = 0.3;

  SpectralOptions spectral() const { return {normalized, approximate, approx_order}; }
  ModelSpec model_spec() const { return {scale_count, scale_init_max, widths}; }
  TrainConfig train_config() const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
  }
  Kernel kernel() const { return Kernel::from_name(kernel_family); }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    const std::string copy(text);
    value = std::strtod(copy.c_str(), &end);
    if (copy.empty() || *end != '\0' || !std::isfinite(value)) {
      throw std::invalid_argument("expected a number, got '" + text + "'");
    }
  } else {
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      throw std::invalid_argument("expected an integer, got '" + text + "'");
    }
  }
  return value;
}

inline bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_number<T>(item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_same_v<T, std::string>) {
      out += v[i];
    } else if constexpr (std::is_floating_point_v<T>) {
      out += io::format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

inline std::string resolve_path(const std::string& value, const std::filesystem::path& base) {
  if (value.empty()) return value;
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal().string();
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<Key>& keys() {
  using P = const std::filesystem::path&;
  static const std::vector<Key> table = {
      {"approx.K", [](RunConfig& c, const std::string& v, P) { c.approx_order = parse_number<int>(v); },
       [](const RunConfig& c) { return std::to_string(c.approx_order); }},
      {"cv.folds", [](RunConfig& c, const std::string& v, P) { c.folds = parse_number<int>(v); },
       [](const RunConfig& c) { return std::to_string(c.folds); }},
      {"data.absolute_values",
       [](RunConfig& c, const std::string& v, P) { c.absolute_values = parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.absolute_values ? "true" : "false"); }},
      {"data.manifest",
       [](RunConfig& c, const std::string& v, P base) { c.manifest = resolve_path(v, base); },
       [](const RunConfig& c) { return c.manifest; }},
      {"kernel.family", [](RunConfig& c, const std::string& v, P) { c.kernel_family = v; },
       [](const RunConfig& c) { return c.kernel_family; }},
      {"laplacian.normalized",
       [](RunConfig& c, const std::string& v, P) { c.normalized = parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.normalized ? "true" : "false"); }},
      {"model.widths",
       [](RunConfig& c, const std::string& v, P) { c.widths = parse_list<Eigen::Index>(v); },
       [](const RunConfig& c) { return join(c.widths); }},
      {"output.dir",
       [](RunConfig& c, const std::string& v, P base) { c.out_dir = resolve_path(v, base); },
       [](const RunConfig& c) { return c.out_dir; }},
      {"run.seed", [](RunConfig& c, const std::string& v, P) { c.seed = parse_number<std::uint64_t>(v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"run.workers", [](RunConfig& c, const std::string& v, P) { c.workers = parse_number<int>(v); },
       [](const RunConfig& c) { return std::to_string(c.workers); }},
      {"scales.count",
       [](RunConfig& c, const std::string& v, P) { c.scale_count = parse_number<std::size_t>(v); },
       [](const RunConfig& c) { return std::to_string(c.scale_count); }},
      {"scales.init_max",
       [](RunConfig& c, const std::string& v, P) { c.scale_init_max = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.scale_init_max); }},
      {"synth.counts",
       [](RunConfig& c, const std::string& v, P) { c.synth_counts = parse_list<int>(v); },
       [](const RunConfig& c) { return join(c.synth_counts); }},
      {"synth.density",
       [](RunConfig& c, const std::string& v, P) { c.synth_density = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.synth_density); }},
      {"synth.n", [](RunConfig& c, const std::string& v, P) { c.synth_n = parse_number<Eigen::Index>(v); },
       [](const RunConfig& c) { return std::to_string(c.synth_n); }},
      {"synth.separation",
       [](RunConfig& c, const std::string& v, P) { c.synth_separation = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.synth_separation); }},
      {"synth.sigma",
       [](RunConfig& c, const std::string& v, P) { c.synth_sigma = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.synth_sigma); }},
      {"synth.templates",
       [](RunConfig& c, const std::string& v, P base) {
         c.synth_templates.clear();
         for (const std::string& item : split_list(v)) c.synth_templates.push_back(resolve_path(item, base));
       },
       [](const RunConfig& c) { return join(c.synth_templates); }},
      {"train.batch_size",
       [](RunConfig& c, const std::string& v, P) { c.train.batch_size = parse_number<int>(v); },
       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      {"train.bias", [](RunConfig& c, const std::string& v, P) { c.train.use_bias = parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.train.use_bias ? "true" : "false"); }},
      {"train.dropout_rate",
       [](RunConfig& c, const std::string& v, P) { c.train.dropout_rate = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.train.dropout_rate); }},
      {"train.epochs", [](RunConfig& c, const std::string& v, P) { c.train.epochs = parse_number<int>(v); },
       [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
      {"train.leaky_slope",
       [](RunConfig& c, const std::string& v, P) { c.train.leaky_slope = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.train.leaky_slope); }},
      {"train.loss",
       [](RunConfig& c, const std::string& v, P) {
         if (v == "per_class_bce") {
           c.train.loss = LossKind::kPerClassBinary;
         } else if (v == "categorical") {
           c.train.loss = LossKind::kCategorical;
         } else {
           throw std::invalid_argument("expected per_class_bce or categorical, got '" + v + "'");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.train.loss == LossKind::kPerClassBinary ? "per_class_bce" : "categorical");
       }},
      {"train.lr_scales",
       [](RunConfig& c, const std::string& v, P) { c.train.lr_scales = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.train.lr_scales); }},
      {"train.lr_weights",
       [](RunConfig& c, const std::string& v, P) { c.train.lr_weights = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.train.lr_weights); }},
      {"train.optimizer",
       [](RunConfig& c, const std::string& v, P) {
         if (v == "adam") {
           c.train.optimizer = OptimizerKind::kAdam;
         } else if (v == "gd") {
           c.train.optimizer = OptimizerKind::kGradientDescent;
         } else {
           throw std::invalid_argument("expected adam or gd, got '" + v + "'");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.train.optimizer == OptimizerKind::kAdam ? "adam" : "gd");
       }},
      {"train.theta1",
       [](RunConfig& c, const std::string& v, P) { c.train.theta1 = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.train.theta1); }},
      {"train.theta2",
       [](RunConfig& c, const std::string& v, P) { c.train.theta2 = parse_number<double>(v); },
       [](const RunConfig& c) { return io::format_double(c.train.theta2); }},
      {"transform.mode",
       [](RunConfig& c, const std::string& v, P) {
         if (v == "exact") {
           c.approximate = false;
         } else if (v == "approx") {
           c.approximate = true;
         } else {
           throw std::invalid_argument("expected exact or approx, got '" + v + "'");
         }
       },
       [](const RunConfig& c) { return std::string(c.approximate ? "approx" : "exact"); }},
  };
  return table;
}

inline const Key* find_key(const std::string& name) {
  for (const Key& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = "configuration invalid (" + std::to_string(errors.size()) + " problem" +
                    (errors.size() == 1 ? "" : "s") + "):";
  for (const std::string& e : errors) msg += "\n  - " + e;
  return msg;
}

}  // namespace config_detail

// Applies `section.key = value` lines on top of `cfg`. Relative paths resolve
// against `base_dir`. All problems are reported together.
inline void apply_config_text(RunConfig& cfg, const std::string& text,
                              const std::filesystem::path& base_dir = {},
                              const std::string& source = "config") {
  using namespace config_detail;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected 'section.key = value'");
      continue;
    }
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* key = find_key(name);
    if (key == nullptr) {
      errors.push_back(where + ": unknown key '" + name + "'");
      continue;
    }
    try {
      key->set(cfg, value, base_dir);
    } catch (const std::exception& e) {
      errors.push_back(where + ": " + name + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(join_errors(errors));
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), std::filesystem::absolute(path).parent_path(), path.string());
}

// Command-line override of a single key; paths resolve against the cwd.
inline void apply_override(RunConfig& cfg, const std::string& name, const std::string& value) {
  const config_detail::Key* key = config_detail::find_key(name);
  if (key == nullptr) throw ConfigError("unknown key '" + name + "'");
  try {
    key->set(cfg, value, std::filesystem::current_path());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

// Semantic checks across keys; every problem is listed.
inline void validate(const RunConfig& c) {
  std::vector<std::string> errors;
  auto check = [&errors](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  check(c.train.theta1 >= 0, "train.theta1 must be >= 0");
  check(c.train.theta2 >= 0, "train.theta2 must be >= 0");
  check(c.train.lr_weights >= 0, "train.lr_weights must be >= 0");
  check(c.train.lr_scales >= 0, "train.lr_scales must be >= 0");
  check(c.train.dropout_rate >= 0 && c.train.dropout_rate < 1, "train.dropout_rate must be in [0, 1)");
  check(c.train.leaky_slope >= 0, "train.leaky_slope must be >= 0");
  check(c.train.epochs >= 0, "train.epochs must be >= 0");
  check(c.train.batch_size >= 1, "train.batch_size must be >= 1");
  check(c.scale_count >= 1, "scales.count must be >= 1");
  check(c.scale_init_max > kScaleMin, "scales.init_max must exceed 1e-3");
  check(c.kernel_family == "sx_exp", "kernel.family must be sx_exp");
  check(!c.approximate || c.normalized,
        "transform.mode = approx requires laplacian.normalized = true");
  check(c.approx_order >= 0, "approx.K must be >= 0");
  check(!c.widths.empty(), "model.widths must list at least one hidden width");
  for (Eigen::Index w : c.widths) check(w >= 1, "model.widths entries must be positive");
  check(c.folds >= 2, "cv.folds must be >= 2");
  check(c.workers >= 1, "run.workers must be >= 1");
  check(c.synth_n >= 2, "synth.n must be >= 2");
  check(c.synth_sigma >= 0, "synth.sigma must be >= 0");
  check(!c.synth_counts.empty(), "synth.counts must list at least one class");
  for (int n : c.synth_counts) check(n >= 1, "synth.counts entries must be positive");
  check(c.synth_separation > 0, "synth.separation must be positive");
  check(c.synth_density > 0 && c.synth_density <= 1, "synth.density must be in (0, 1]");
  if (!errors.empty()) throw ConfigError(config_detail::join_errors(errors));
}

// Canonical text form: every key, sorted, suitable for feeding back via --config.
inline std::string to_text(const RunConfig& c) {
  std::string out = "# resolved configuration\n";
  for (const config_detail::Key& k : config_detail::keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace mgnn
