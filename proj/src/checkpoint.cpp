#include "insmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "insmt/errors.hpp"

namespace insmt {

namespace {

static_assert(sizeof(float) == 4);

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(bytes(n));
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  void seek(std::size_t pos) {
    if (pos > in_.size()) throw IoError("checkpoint truncated");
    pos_ = pos;
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_vocab(Writer& w, const CharVocab& vocab) {
  w.u32(static_cast<std::uint32_t>(vocab.characters().size()));
  for (char32_t c : vocab.characters()) w.u32(static_cast<std::uint32_t>(c));
}

CharVocab read_vocab(Reader& r) {
  const std::uint32_t n = r.u32();
  if (n > r.remaining() / 4) throw IoError("checkpoint vocabulary size is implausible");
  std::vector<char32_t> chars(n);
  for (auto& c : chars) c = static_cast<char32_t>(r.u32());
  return CharVocab(std::move(chars));
}

int int_entry(const ConfigEntries& entries, const std::string& key) {
  auto it = entries.find(key);
  if (it == entries.end()) throw IoError("checkpoint configuration lacks '" + key + "'");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw IoError("checkpoint configuration has bad '" + key + "' = '" + it->second + "'");
  }
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

ConfigEntries parse_config_entries(std::string_view text) {
  ConfigEntries entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError(line_no, "expected key=value, got '" + line + "'");
    entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return entries;
}

std::string format_config_entries(const ConfigEntries& entries) {
  std::string out;
  for (const auto& [key, value] : entries) out += key + "=" + value + "\n";
  return out;
}

std::string serialize_checkpoint(const ModelParams<float>& model, const ConfigEntries& extra) {
  ConfigEntries config = extra;
  config["hidden_dim"] = std::to_string(model.config.hidden_dim);
  config["char_embed_dim"] = std::to_string(model.config.char_embed_dim);
  config["max_chunk_chars"] = std::to_string(model.config.max_chunk_chars);
  config["init_scale"] = format_double(model.config.init_scale);

  Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  write_vocab(w, model.source_vocab);
  write_vocab(w, model.target_vocab);
  w.str(format_config_entries(config));
  w.u32(static_cast<std::uint32_t>(model.params.size()));
  std::uint64_t offset = 0;
  for (const auto& p : model.params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.u64(offset);
    offset += p.value.size() * sizeof(float);
  }
  for (const auto& p : model.params) {
    for (float v : p.value.values()) w.f32(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.remaining() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  CharVocab source = read_vocab(r);
  CharVocab target = read_vocab(r);
  Checkpoint ckpt;
  try {
    ckpt.config = parse_config_entries(r.str());
  } catch (const ParseError& e) {
    throw IoError(std::string("checkpoint configuration block: ") + e.what());
  }
  ModelConfig config;
  config.hidden_dim = int_entry(ckpt.config, "hidden_dim");
  config.char_embed_dim = int_entry(ckpt.config, "char_embed_dim");
  config.max_chunk_chars = int_entry(ckpt.config, "max_chunk_chars");
  if (auto it = ckpt.config.find("init_scale"); it != ckpt.config.end()) config.init_scale = std::stod(it->second);

  ckpt.model = make_model<float>(config, std::move(source), std::move(target), 0, Initialization::kZero);

  struct TableEntry {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  const std::uint32_t count = r.u32();
  if (count != ckpt.model.params.size()) {
    throw IoError("checkpoint has " + std::to_string(count) + " parameters, layout expects " +
                  std::to_string(ckpt.model.params.size()));
  }
  std::vector<TableEntry> table;
  for (std::uint32_t k = 0; k < count; ++k) {
    TableEntry e;
    e.name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw IoError("checkpoint parameter '" + e.name + "' has implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<int>(r.u32()));
    e.offset = r.u64();
    table.push_back(std::move(e));
  }
  const std::size_t data_start = r.position();
  for (const TableEntry& e : table) {
    if (!ckpt.model.params.contains(e.name)) {
      throw IoError("checkpoint parameter '" + e.name + "' is not part of the model layout");
    }
    Tensor<float>& value = ckpt.model.params[ckpt.model.params.index_of(e.name)].value;
    if (value.shape() != e.shape) {
      throw IoError("checkpoint parameter '" + e.name + "' has shape " + shape_string(e.shape) +
                    ", layout expects " + shape_string(value.shape()));
    }
    r.seek(data_start + e.offset);
    for (float& v : value.values()) v = r.f32();
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& model,
                     const ConfigEntries& extra) {
  const std::string bytes = serialize_checkpoint(model, extra);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace insmt
