#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "insmt/align.hpp"
#include "insmt/errors.hpp"

namespace insmt::align {

namespace {

std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  if (sep == ' ') {
    while (in >> field) fields.push_back(field);
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

template <typename Number>
bool parse_number(const std::string& text, Number& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

void write_posterior_matrices(std::ostream& out, std::span<const ProbMatrix> matrices) {
  for (std::size_t k = 0; k < matrices.size(); ++k) {
    const ProbMatrix& m = matrices[k];
    if (k) out << '\n';
    out << m.rows << ' ' << m.cols << '\n';
    for (int i = 0; i < m.rows; ++i) {
      for (int j = 0; j < m.cols; ++j) {
        const double p = m.at(i, j);
        if (p != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << format_probability(p) << '\n';
      }
    }
  }
}

std::vector<ProbMatrix> read_posterior_matrices(std::istream& in) {
  std::vector<ProbMatrix> matrices;
  std::string line;
  std::size_t line_no = 0;
  bool in_record = false;
  std::size_t record_line = 0;
  std::set<std::pair<int, int>> seen;

  auto finish_record = [&] {
    if (!in_record) return;
    try {
      validate(matrices.back());
    } catch (const ValidationError& e) {
      throw ValidationError("record starting at line " + std::to_string(record_line) + ": " + e.what());
    }
    in_record = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) {
      finish_record();
      continue;
    }
    const std::vector<std::string> fields = split_fields(line, ' ');
    if (!in_record) {
      int rows = 0, cols = 0;
      if (fields.size() != 2 || !parse_number(fields[0], rows) || !parse_number(fields[1], cols) ||
          rows < 0 || cols < 0) {
        throw ParseError(line_no, "expected record header 'N M', got '" + line + "'");
      }
      matrices.emplace_back(rows, cols);
      seen.clear();
      in_record = true;
      record_line = line_no;
      continue;
    }
    int i = 0, j = 0;
    double p = 0.0;
    if (fields.size() != 3 || !parse_number(fields[0], i) || !parse_number(fields[1], j) ||
        !parse_number(fields[2], p)) {
      throw ParseError(line_no, "expected 'i j p', got '" + line + "'");
    }
    ProbMatrix& m = matrices.back();
    if (i < 1 || i > m.rows || j < 1 || j > m.cols) {
      throw ParseError(line_no, "link (" + fields[0] + "," + fields[1] + ") outside " +
                                    std::to_string(m.rows) + "x" + std::to_string(m.cols));
    }
    if (!seen.emplace(i, j).second) {
      throw ParseError(line_no, "duplicate link (" + fields[0] + "," + fields[1] + ")");
    }
    m.at(i - 1, j - 1) = p;
  }
  finish_record();
  return matrices;
}

void export_posteriors(const std::filesystem::path& forward_path,
                       const std::filesystem::path& backward_path,
                       std::span<const AlignmentPosteriors> posteriors) {
  std::vector<ProbMatrix> fwd, bwd;
  for (const auto& p : posteriors) {
    fwd.push_back(p.forward);
    bwd.push_back(p.backward);
  }
  for (const auto& [path, mats] : {std::pair{forward_path, &fwd}, std::pair{backward_path, &bwd}}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_posterior_matrices(out, *mats);
    if (!out) throw IoError("write failed for " + path.string());
  }
}

std::vector<AlignmentPosteriors> import_posteriors(const std::filesystem::path& forward_path,
                                                   const std::filesystem::path& backward_path) {
  auto read = [](const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
      return read_posterior_matrices(in);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), path.string() + ": " + e.detail());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  };
  std::vector<ProbMatrix> fwd = read(forward_path);
  std::vector<ProbMatrix> bwd = read(backward_path);
  if (fwd.size() != bwd.size()) {
    throw ValidationError("forward file has " + std::to_string(fwd.size()) +
                          " records, backward file has " + std::to_string(bwd.size()));
  }
  std::vector<AlignmentPosteriors> out;
  out.reserve(fwd.size());
  for (std::size_t s = 0; s < fwd.size(); ++s) {
    AlignmentPosteriors p{std::move(fwd[s]), std::move(bwd[s])};
    try {
      validate(p);
    } catch (const ValidationError& e) {
      throw ValidationError("record " + std::to_string(s + 1) + ": " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_chunked(std::ostream& out, std::span<const AlignedSentencePair> pairs) {
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const AlignedSentencePair& pair = pairs[s];
    if (s) out << '\n';
    for (std::size_t i = 0; i < pair.source_tokens.size(); ++i) {
      std::string chunk = pair.chunks[i];
      for (char& c : chunk) {
        if (c == ' ') c = kUnitSeparator;
      }
      out << pair.source_tokens[i] << '\t' << chunk << '\t';
      if (pair.gold_target_index[i]) {
        out << *pair.gold_target_index[i];
      } else {
        out << '-';
      }
      out << '\n';
    }
  }
}

std::vector<AlignedSentencePair> read_chunked(std::istream& in) {
  std::vector<AlignedSentencePair> pairs;
  AlignedSentencePair current;
  std::size_t line_no = 0;
  std::size_t sentence_line = 0;
  auto flush = [&] {
    if (current.source_tokens.empty()) return;
    try {
      current.gold_insertion = derive_gold_insertions(current.gold_target_index);
      check_invariants(current);
    } catch (const std::exception& e) {
      throw ValidationError("sentence starting at line " + std::to_string(sentence_line) + ": " + e.what());
    }
    pairs.push_back(std::move(current));
    current = AlignedSentencePair();
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const std::vector<std::string> fields = split_fields(line, '\t');
    if (fields.size() != 3 || fields[0].empty()) {
      throw ParseError(line_no, "expected 'token<TAB>chunk<TAB>index', got '" + line + "'");
    }
    if (current.source_tokens.empty()) sentence_line = line_no;
    std::string chunk = fields[1];
    for (char& c : chunk) {
      if (c == kUnitSeparator) c = ' ';
    }
    std::optional<int> index;
    if (fields[2] != "-") {
      int value = 0;
      if (!parse_number(fields[2], value) || value < 1) {
        throw ParseError(line_no, "bad gold target index '" + fields[2] + "'");
      }
      index = value;
    }
    if (chunk.empty() != !index.has_value()) {
      throw ParseError(line_no, "gold index must be '-' exactly when the chunk is empty");
    }
    current.source_tokens.push_back(fields[0]);
    current.chunks.push_back(std::move(chunk));
    current.gold_target_index.push_back(index);
  }
  flush();
  return pairs;
}

std::vector<AlignedSentencePair> read_chunked_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_chunked(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

void write_chunked_file(const std::filesystem::path& path,
                        std::span<const AlignedSentencePair> pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_chunked(out, pairs);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace insmt::align
