#include "conmask/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "conmask/error.hpp"

namespace conmask {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw UsageError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("bad value for " + key + ": '" + value + "' (expected true or false)");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  auto size_field = [](std::size_t TrainConfig::*f) -> Setter {
    return [f](TrainConfig& c, const std::string& k, const std::string& v) {
      c.*f = parse_number<std::size_t>(k, v);
    };
  };
  auto double_field = [](double TrainConfig::*f) -> Setter {
    return [f](TrainConfig& c, const std::string& k, const std::string& v) {
      c.*f = parse_number<double>(k, v);
    };
  };
  auto bool_field = [](bool TrainConfig::*f) -> Setter {
    return [f](TrainConfig& c, const std::string& k, const std::string& v) { c.*f = parse_bool(k, v); };
  };
  static const std::map<std::string, Setter> table{
      {"dim", size_field(&TrainConfig::dim)},
      {"max_content_len", size_field(&TrainConfig::max_content_len)},
      {"max_name_len", size_field(&TrainConfig::max_name_len)},
      {"mask_window", size_field(&TrainConfig::mask_window)},
      {"fcn_layers", size_field(&TrainConfig::fcn_layers)},
      {"keep_p", double_field(&TrainConfig::keep_p)},
      {"pool", size_field(&TrainConfig::pool)},
      {"batch_size", size_field(&TrainConfig::batch_size)},
      {"learning_rate", double_field(&TrainConfig::learning_rate)},
      {"positives", size_field(&TrainConfig::positives)},
      {"negatives", size_field(&TrainConfig::negatives)},
      {"epochs", size_field(&TrainConfig::epochs)},
      {"seed", [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.seed = parse_number<std::uint64_t>(k, v);
       }},
      {"freeze_embeddings", bool_field(&TrainConfig::freeze_embeddings)},
      {"checkpoint_interval", size_field(&TrainConfig::checkpoint_interval)},
      {"conv_width", size_field(&TrainConfig::conv_width)},
      {"val_interval", size_field(&TrainConfig::val_interval)},
      {"mask_mode", [](TrainConfig& c, const std::string&, const std::string& v) {
         c.mask_mode = parse_mask_mode(v);
       }},
      {"detach_mask_weights", bool_field(&TrainConfig::detach_mask_weights)},
      {"detach_mask_content", bool_field(&TrainConfig::detach_mask_content)},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw UsageError(std::string(name) + " must be positive");
  };
  positive(dim, "dim");
  positive(max_content_len, "max_content_len");
  positive(max_name_len, "max_name_len");
  positive(pool, "pool");
  positive(batch_size, "batch_size");
  positive(positives, "positives");
  positive(epochs, "epochs");
  if (fcn_layers != kFcnLayers) throw UsageError("fcn_layers is fixed at 3");
  if (conv_width % 2 == 0) throw UsageError("conv_width must be odd");
  if (!(keep_p > 0.0 && keep_p <= 1.0)) throw UsageError("keep_p must be in (0, 1]");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
}

ModelOptions TrainConfig::model_options() const {
  ModelOptions o;
  o.mask.window = mask_window;
  o.mask.mode = mask_mode;
  o.mask.detach_weights = detach_mask_weights;
  o.mask.detach_content = detach_mask_content;
  o.fusion.keep_p = keep_p;
  o.fusion.pool = pool;
  return o;
}

SamplingOptions TrainConfig::sampling_options() const { return {positives, negatives}; }

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "dim = " << dim << "\n"
      << "max_content_len = " << max_content_len << "\n"
      << "max_name_len = " << max_name_len << "\n"
      << "mask_window = " << mask_window << "\n"
      << "fcn_layers = " << fcn_layers << "\n"
      << "keep_p = " << format_double(keep_p) << "\n"
      << "pool = " << pool << "\n"
      << "batch_size = " << batch_size << "\n"
      << "learning_rate = " << format_double(learning_rate) << "\n"
      << "positives = " << positives << "\n"
      << "negatives = " << negatives << "\n"
      << "epochs = " << epochs << "\n"
      << "seed = " << seed << "\n"
      << "freeze_embeddings = " << b(freeze_embeddings) << "\n"
      << "checkpoint_interval = " << checkpoint_interval << "\n"
      << "conv_width = " << conv_width << "\n"
      << "val_interval = " << val_interval << "\n"
      << "mask_mode = " << to_string(mask_mode) << "\n"
      << "detach_mask_weights = " << b(detach_mask_weights) << "\n"
      << "detach_mask_content = " << b(detach_mask_content) << "\n";
  return out.str();
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
  it->second(config, key, value);
}

TrainConfig parse_config(const std::string& text, const std::string& origin) {
  TrainConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace conmask
