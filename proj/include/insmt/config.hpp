#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "insmt/adam.hpp"
#include "insmt/align.hpp"
#include "insmt/model.hpp"

namespace insmt {

// Every training and alignment knob, with the defaults a run falls back to.
// Serialized as flat key=value text whose keys are exactly the field names.
struct RunConfig {
  int hidden_dim = 256;
  int char_embed_dim = 64;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double tau = 0.1;
  double alpha = 0.01;
  int em_iterations = 5;
  int max_chunk_chars = 32;
  int patience = 3;
  int eval_interval = 1;
  std::uint64_t seed = 1;
  bool lowercase = true;
  int max_epochs = 50;
  double clip_norm = 5.0;
  double init_scale = 0.1;
  int workers = 1;

  bool operator==(const RunConfig&) const = default;

  ModelConfig model_config() const;
  AdamOptions adam_options() const;
  align::Ibm1Options aligner_options() const;
};

std::vector<std::string> config_keys();

// Throws ValidationError for unknown keys or unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

// Throws ValidationError naming the first offending field.
void validate(const RunConfig& config);

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
// Resolved configuration, one key=value per line in config_keys() order.
std::string to_text(const RunConfig& config);

}  // namespace insmt
