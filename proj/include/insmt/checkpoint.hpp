#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "insmt/model.hpp"

namespace insmt {

// Binary checkpoint container, all integers little-endian:
//
//   magic "INSMTCKP" | u32 version
//   u32 n, n x u32 code points          (source characters)
//   u32 n, n x u32 code points          (target characters)
//   u32 length, UTF-8 key=value lines   (configuration block)
//   u32 count, count x { u32 name length, name, u32 rank, rank x u32 dims,
//                        u64 byte offset into the data section }
//   data section: row-major float32 values
inline constexpr std::string_view kCheckpointMagic = "INSMTCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

using ConfigEntries = std::map<std::string, std::string>;

struct Checkpoint {
  ModelParams<float> model;
  // Every key=value of the configuration block, model keys included.
  ConfigEntries config;
};

// Model keys (hidden_dim, char_embed_dim, max_chunk_chars, init_scale) are
// always written from `model.config`, overriding same-named `extra` entries.
std::string serialize_checkpoint(const ModelParams<float>& model, const ConfigEntries& extra = {});
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& model,
                     const ConfigEntries& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

ConfigEntries parse_config_entries(std::string_view text);
std::string format_config_entries(const ConfigEntries& entries);

}  // namespace insmt
