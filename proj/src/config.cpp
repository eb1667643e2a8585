#include "insmt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "insmt/errors.hpp"

namespace insmt {

namespace {

template <typename Number>
Number parse_value(std::string_view key, std::string_view text) {
  Number value{};
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, value);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("config '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError("config '" + std::string(key) + "': expected a boolean, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Field {
  const char* name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename M>
Field field(const char* name, M RunConfig::*member) {
  Field f;
  f.name = name;
  f.set = [name, member](RunConfig& c, std::string_view text) {
    if constexpr (std::is_same_v<M, bool>) {
      c.*member = parse_bool(name, text);
    } else {
      c.*member = parse_value<M>(name, text);
    }
  };
  f.get = [member](const RunConfig& c) -> std::string {
    if constexpr (std::is_same_v<M, bool>) {
      return c.*member ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<M>) {
      return format_double(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("hidden_dim", &RunConfig::hidden_dim),
      field("char_embed_dim", &RunConfig::char_embed_dim),
      field("batch_size", &RunConfig::batch_size),
      field("learning_rate", &RunConfig::learning_rate),
      field("beta1", &RunConfig::beta1),
      field("beta2", &RunConfig::beta2),
      field("adam_epsilon", &RunConfig::adam_epsilon),
      field("tau", &RunConfig::tau),
      field("alpha", &RunConfig::alpha),
      field("em_iterations", &RunConfig::em_iterations),
      field("max_chunk_chars", &RunConfig::max_chunk_chars),
      field("patience", &RunConfig::patience),
      field("eval_interval", &RunConfig::eval_interval),
      field("seed", &RunConfig::seed),
      field("lowercase", &RunConfig::lowercase),
      field("max_epochs", &RunConfig::max_epochs),
      field("clip_norm", &RunConfig::clip_norm),
      field("init_scale", &RunConfig::init_scale),
      field("workers", &RunConfig::workers),
  };
  return table;
}

const Field& find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (key == f.name) return f;
  }
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.hidden_dim = hidden_dim;
  m.char_embed_dim = char_embed_dim;
  m.max_chunk_chars = max_chunk_chars;
  m.init_scale = init_scale;
  return m;
}

AdamOptions RunConfig::adam_options() const {
  return AdamOptions{learning_rate, beta1, beta2, adam_epsilon};
}

align::Ibm1Options RunConfig::aligner_options() const {
  align::Ibm1Options o;
  o.iterations = em_iterations;
  o.alpha = alpha;
  return o;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.emplace_back(f.name);
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_field(key).set(config, trim(value));
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return find_field(key).get(config);
}

void validate(const RunConfig& c) {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0)) throw ValidationError("config '" + std::string(name) + "' must be positive");
  };
  positive("hidden_dim", c.hidden_dim);
  positive("char_embed_dim", c.char_embed_dim);
  positive("batch_size", c.batch_size);
  positive("learning_rate", c.learning_rate);
  positive("beta1", c.beta1);
  positive("beta2", c.beta2);
  positive("adam_epsilon", c.adam_epsilon);
  positive("tau", c.tau);
  positive("alpha", c.alpha);
  positive("em_iterations", c.em_iterations);
  positive("max_chunk_chars", c.max_chunk_chars);
  positive("patience", c.patience);
  positive("eval_interval", c.eval_interval);
  positive("clip_norm", c.clip_norm);
  positive("init_scale", c.init_scale);
  positive("workers", c.workers);
  if (c.beta1 >= 1.0 || c.beta2 >= 1.0) throw ValidationError("config Adam betas must be below 1");
  if (c.max_epochs < 0) throw ValidationError("config 'max_epochs' must be nonnegative");
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value, got '" + raw + "'");
    try {
      set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.name) + "=" + f.get(config) + "\n";
  return out;
}

}  // namespace insmt
