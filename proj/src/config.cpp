#include "dnl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dnl/errors.hpp"

namespace dnl {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string> words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("invalid value for " + key + ": '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("invalid value for " + key + ": '" + text + "' (expected true or false)");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string bool_string(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& items, const std::string& sep) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out << sep;
    out << items[i];
  }
  return out.str();
}

bool has_prefix(const KeyValues& kv, std::string_view prefix) {
  return std::any_of(kv.begin(), kv.end(),
                     [&](const auto& entry) { return entry.first.starts_with(prefix); });
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "data.hsi",           "data.lidar",          "data.labels",
      "data.train_counts",  "data.test_counts",    "data.class_names",
      "scene.classes",      "scene.height",        "scene.width",
      "scene.bands",        "scene.noise_sigma",   "scene.seed",
      "sample.train_per_class", "sample.test_per_class", "sample.seed",
      "sample.normalize",   "extractor.hsi_bands", "extractor.patch_size",
      "extractor.feature_channels", "extractor.residual_blocks", "extractor.lidar_layers",
      "attention.type",     "attention.embed_channels", "wiring",
      "train.lr",           "train.epochs",        "train.batch_size",
      "train.seed",         "train.repetitions",   "ablate.wirings",
      "render.mask_unlabeled", "output.dir"};
  return keys;
}

std::string nearest_key(std::string_view key) {
  const auto& keys = config_keys();
  return *std::min_element(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    return edit_distance(key, a) < edit_distance(key, b);
  });
}

static void check_key(const std::string& key) {
  const auto& keys = config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw ConfigError("unknown config key '" + key + "' (did you mean '" + nearest_key(key) +
                      "'?)");
  }
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    check_key(key);
    if (kv.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    kv[key] = trim(std::string_view(content).substr(eq + 1));
  }
  return kv;
}

void apply_override(KeyValues& kv, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  check_key(key);
  kv[key] = trim(assignment.substr(eq + 1));
}

ExperimentConfig build_config(const KeyValues& kv, std::filesystem::path base_dir) {
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto size_field = [&](const std::string& key, std::size_t& out) {
    if (const auto* v = get(key)) out = parse_number<std::size_t>(key, *v);
  };
  auto u64_field = [&](const std::string& key, std::uint64_t& out) {
    if (const auto* v = get(key)) out = parse_number<std::uint64_t>(key, *v);
  };
  auto double_field = [&](const std::string& key, double& out) {
    if (const auto* v = get(key)) out = parse_number<double>(key, *v);
  };

  const bool has_files = has_prefix(kv, "data.");
  const bool has_scene = has_prefix(kv, "scene.");
  if (has_files && has_scene) {
    throw ConfigError("config sets both data.* and scene.*; choose exactly one data source");
  }
  if (!has_files && !has_scene) {
    throw ConfigError("config has no data source; set data.* paths or scene.* keys");
  }
  if (has_files) {
    FileSource f;
    if (const auto* v = get("data.hsi")) f.hsi = *v;
    if (const auto* v = get("data.lidar")) f.lidar = *v;
    if (const auto* v = get("data.labels")) f.labels = *v;
    if (const auto* v = get("data.train_counts")) {
      for (const auto& w : words(*v)) {
        f.train_counts.push_back(parse_number<std::size_t>("data.train_counts", w));
      }
    }
    if (const auto* v = get("data.test_counts")) {
      for (const auto& w : words(*v)) {
        if (w == "all") {
          f.test_counts.push_back(std::nullopt);
        } else {
          f.test_counts.push_back(parse_number<std::size_t>("data.test_counts", w));
        }
      }
    }
    if (const auto* v = get("data.class_names")) {
      if (!v->empty()) f.class_names = split(*v, ',');
    }
    c.files = std::move(f);
  } else {
    SceneSpec s;
    size_field("scene.classes", s.classes);
    size_field("scene.height", s.height);
    size_field("scene.width", s.width);
    size_field("scene.bands", s.bands);
    double_field("scene.noise_sigma", s.noise_sigma);
    u64_field("scene.seed", s.seed);
    c.scene = s;
  }

  size_field("sample.train_per_class", c.sampling.train_per_class);
  size_field("sample.test_per_class", c.sampling.test_per_class);
  u64_field("sample.seed", c.sampling.seed);
  if (const auto* v = get("sample.normalize")) {
    c.sampling.normalize = parse_bool("sample.normalize", *v);
  }

  if (const auto* v = get("extractor.hsi_bands")) {
    c.extractor.hsi_bands = parse_number<std::size_t>("extractor.hsi_bands", *v);
    c.hsi_bands_explicit = true;
  } else if (c.scene) {
    c.extractor.hsi_bands = c.scene->bands;
  }
  size_field("extractor.patch_size", c.extractor.patch_size);
  size_field("extractor.feature_channels", c.extractor.feature_channels);
  size_field("extractor.residual_blocks", c.extractor.residual_blocks);
  size_field("extractor.lidar_layers", c.extractor.lidar_layers);

  if (const auto* v = get("attention.type")) c.attention.type = parse_attention_type(*v);
  size_field("attention.embed_channels", c.attention.embed_channels);
  if (const auto* v = get("wiring")) c.attention.wiring = WiringConfig::parse(*v);

  double_field("train.lr", c.train.learning_rate);
  size_field("train.epochs", c.train.epochs);
  size_field("train.batch_size", c.train.batch_size);
  u64_field("train.seed", c.train.seed);
  size_field("train.repetitions", c.train.repetitions);

  if (const auto* v = get("ablate.wirings")) {
    c.ablation_wirings.clear();
    for (const auto& w : split(*v, ',')) c.ablation_wirings.push_back(WiringConfig::parse(w));
  }
  if (const auto* v = get("render.mask_unlabeled")) {
    c.render_mask_unlabeled = parse_bool("render.mask_unlabeled", *v);
  }
  if (const auto* v = get("output.dir")) c.output_dir = *v;

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (files.has_value() == scene.has_value()) {
    throw ConfigError("exactly one data source (data.* paths or scene.*) is required");
  }
  if (files) {
    if (files->hsi.empty() || files->lidar.empty() || files->labels.empty()) {
      throw ConfigError("data.hsi, data.lidar and data.labels are all required");
    }
    if (files->train_counts.empty()) throw ConfigError("data.train_counts is required");
    if (files->train_counts.size() < 2) throw ConfigError("at least two classes are required");
    if (files->test_counts.size() != files->train_counts.size()) {
      throw ConfigError("data.test_counts has " + std::to_string(files->test_counts.size()) +
                        " entries but data.train_counts has " +
                        std::to_string(files->train_counts.size()));
    }
    if (!files->class_names.empty() && files->class_names.size() != files->train_counts.size()) {
      throw ConfigError("data.class_names has " + std::to_string(files->class_names.size()) +
                        " entries but there are " + std::to_string(files->train_counts.size()) +
                        " classes");
    }
  } else {
    scene->validate();
    if (sampling.train_per_class == 0) throw ConfigError("sample.train_per_class must be positive");
    if (sampling.test_per_class == 0) throw ConfigError("sample.test_per_class must be positive");
  }
  extractor.validate();
  if (attention.embed_channels == 0) throw ConfigError("attention.embed_channels must be positive");
  train.validate();
  if (ablation_wirings.empty()) throw ConfigError("ablate.wirings must list at least one wiring");
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

std::size_t ExperimentConfig::classes() const {
  return files ? files->train_counts.size() : scene->classes;
}

std::vector<std::string> ExperimentConfig::class_names() const {
  if (files && !files->class_names.empty()) return files->class_names;
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= classes(); ++k) names.push_back("class " + std::to_string(k));
  return names;
}

ExperimentConfig parse_config(std::string_view text, std::filesystem::path base_dir) {
  return build_config(parse_key_values(text), std::move(base_dir));
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  KeyValues kv = parse_key_values(text.str());
  for (const auto& o : overrides) apply_override(kv, o);
  return build_config(kv, path.parent_path());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto line = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  if (c.files) {
    const FileSource& f = *c.files;
    line("data.hsi", f.hsi);
    line("data.lidar", f.lidar);
    line("data.labels", f.labels);
    line("data.train_counts", join(f.train_counts, " "));
    std::vector<std::string> tests;
    for (const auto& t : f.test_counts) tests.push_back(t ? std::to_string(*t) : "all");
    line("data.test_counts", join(tests, " "));
    if (!f.class_names.empty()) line("data.class_names", join(f.class_names, ", "));
  }
  if (c.scene) {
    const SceneSpec& s = *c.scene;
    line("scene.classes", std::to_string(s.classes));
    line("scene.height", std::to_string(s.height));
    line("scene.width", std::to_string(s.width));
    line("scene.bands", std::to_string(s.bands));
    line("scene.noise_sigma", format_double(s.noise_sigma));
    line("scene.seed", std::to_string(s.seed));
  }
  line("sample.train_per_class", std::to_string(c.sampling.train_per_class));
  line("sample.test_per_class", std::to_string(c.sampling.test_per_class));
  line("sample.seed", std::to_string(c.sampling.seed));
  line("sample.normalize", bool_string(c.sampling.normalize));
  if (c.hsi_bands_explicit) line("extractor.hsi_bands", std::to_string(c.extractor.hsi_bands));
  line("extractor.patch_size", std::to_string(c.extractor.patch_size));
  line("extractor.feature_channels", std::to_string(c.extractor.feature_channels));
  line("extractor.residual_blocks", std::to_string(c.extractor.residual_blocks));
  line("extractor.lidar_layers", std::to_string(c.extractor.lidar_layers));
  line("attention.type", std::string(attention_type_name(c.attention.type)));
  line("attention.embed_channels", std::to_string(c.attention.embed_channels));
  line("wiring", c.attention.wiring.to_string());
  line("train.lr", format_double(c.train.learning_rate));
  line("train.epochs", std::to_string(c.train.epochs));
  line("train.batch_size", std::to_string(c.train.batch_size));
  line("train.seed", std::to_string(c.train.seed));
  line("train.repetitions", std::to_string(c.train.repetitions));
  std::vector<std::string> wirings;
  for (const auto& w : c.ablation_wirings) wirings.push_back(w.to_string());
  line("ablate.wirings", join(wirings, ", "));
  line("render.mask_unlabeled", bool_string(c.render_mask_unlabeled));
  if (!c.output_dir.empty()) line("output.dir", c.output_dir);
  return out.str();
}

}  // namespace dnl
