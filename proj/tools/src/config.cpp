#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cloudpatch/models.hpp"

namespace cloudpatch::cli {

namespace {

struct FieldError {
  std::string message;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc{} || ptr != end) {
    if constexpr (std::is_floating_point_v<T>) {
      throw FieldError{"expected a number, got '" + std::string(value) + "'"};
    } else {
      throw FieldError{"expected a non-negative integer, got '" + std::string(value) + "'"};
    }
  }
  return out;
}

std::vector<std::string> parse_list(std::string_view value) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto item = trim(value.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (!item.empty()) items.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

// Value in (lo, hi), or (lo, hi] when upper_inclusive.
double bounded(double v, double lo, double hi, bool upper_inclusive) {
  if (v > lo && (v < hi || (upper_inclusive && v == hi))) return v;
  throw FieldError{"value " + std::to_string(v) + " out of range"};
}

void check_model_name(const std::string& name) {
  if (name == "baseline") return;
  try {
    parse_model_kind(name);
  } catch (const Error&) {
    throw FieldError{"unknown model '" + name + "'"};
  }
}

}  // namespace

void set_field(PipelineConfig& cfg, std::string_view field, std::string_view value) {
  using std::size_t;
  using std::uint64_t;
  value = trim(value);
  try {
    if (field == "paths.input") cfg.input = std::string(value);
    else if (field == "paths.out") cfg.out = std::string(value);
    else if (field == "synth.height") cfg.scene.height = parse_number<size_t>(value);
    else if (field == "synth.width") cfg.scene.width = parse_number<size_t>(value);
    else if (field == "synth.dates") cfg.scene.n_dates = parse_number<size_t>(value);
    else if (field == "synth.seed") cfg.scene.seed = parse_number<uint64_t>(value);
    else if (field == "synth.bloom_amplitude") cfg.scene.bloom_amplitude = parse_number<double>(value);
    else if (field == "synth.noise_sd") cfg.scene.noise_sd = parse_number<double>(value);
    else if (field == "mask.ratio") cfg.grf.mask_ratio = bounded(parse_number<double>(value), 0.0, 1.0, false);
    else if (field == "mask.variance") cfg.grf.variance_sigma2 = bounded(parse_number<double>(value), 0.0, HUGE_VAL, false);
    else if (field == "mask.range") cfg.grf.range_d = bounded(parse_number<double>(value), 0.0, 2.0, true);
    else if (field == "mask.seed") cfg.grf.seed = parse_number<uint64_t>(value);
    else if (field == "train.epochs") cfg.train.max_epochs = parse_number<size_t>(value);
    else if (field == "train.lr") cfg.train.lr = parse_number<double>(value);
    else if (field == "train.batch_size") cfg.train.batch_size = parse_number<size_t>(value);
    else if (field == "train.patience") cfg.train.early_stop_patience = parse_number<size_t>(value);
    else if (field == "train.runs") cfg.train.n_runs = parse_number<size_t>(value);
    else if (field == "train.seed") cfg.train.base_seed = parse_number<uint64_t>(value);
    else if (field == "train.train_fraction") cfg.train.train_fraction = parse_number<double>(value);
    else if (field == "train.val_fraction") cfg.train.val_fraction = parse_number<double>(value);
    else if (field == "train.test_fraction") cfg.train.test_fraction = parse_number<double>(value);
    else if (field == "models.kinds") {
      auto kinds = parse_list(value);
      for (const auto& k : kinds) check_model_name(k);
      cfg.models = std::move(kinds);
    } else if (field == "indices.kind") {
      cfg.index_kind = parse_index_kind(value);
    } else if (field == "indices.orientation") {
      cfg.orientation = parse_orientation(value);
    } else {
      throw FieldError{"unknown field"};
    }
  } catch (const FieldError& e) {
    throw Error(ErrorKind::kConfigError, "field '" + std::string(field) + "': " + e.message);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfigError, "field '" + std::string(field) + "': " + e.what());
  }
}

void PipelineConfig::validate() const {
  const auto require = [](bool ok, const char* field, const char* rule) {
    if (!ok) throw Error(ErrorKind::kConfigError, std::string("field '") + field + "': " + rule);
  };
  require(grf.mask_ratio > 0.0 && grf.mask_ratio < 1.0, "mask.ratio", "must be in (0, 1)");
  require(grf.variance_sigma2 > 0.0, "mask.variance", "must be > 0");
  require(grf.range_d > 0.0 && grf.range_d <= 2.0, "mask.range", "must be in (0, 2]");
  require(train.max_epochs >= 1, "train.epochs", "must be >= 1");
  require(train.lr > 0.0, "train.lr", "must be > 0");
  require(train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(train.early_stop_patience >= 1, "train.patience", "must be >= 1");
  require(train.n_runs >= 1, "train.runs", "must be >= 1");
  try {
    scene.validate();
    grf.validate();
    train.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfigError, e.what());
  }
  if (models.empty()) throw Error(ErrorKind::kConfigError, "field 'models.kinds': no model selected");
  if (out.empty()) throw Error(ErrorKind::kConfigError, "field 'paths.out': empty path");
  if (!input.empty() && !std::filesystem::exists(input)) {
    throw Error(ErrorKind::kConfigError,
                "field 'paths.input': '" + input.string() + "' does not exist");
  }
}

PipelineConfig parse_config(std::string_view text, const std::string& source) {
  PipelineConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    std::string_view line = trim(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::kConfigError, where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "paths" && section != "synth" && section != "mask" && section != "train" &&
          section != "models" && section != "indices") {
        throw Error(ErrorKind::kConfigError, where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kConfigError, where + "expected 'key = value'");
    }
    if (section.empty()) throw Error(ErrorKind::kConfigError, where + "key outside any section");
    const std::string field = section + "." + std::string(trim(line.substr(0, eq)));
    try {
      set_field(cfg, field, line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfigError, where + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfigError, "cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

}  // namespace cloudpatch::cli
