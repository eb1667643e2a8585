#include "insmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "json.hpp"

#include "insmt/errors.hpp"

namespace insmt {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const TokenList& tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<std::ptrdiff_t>(tokens.size());
  for (std::ptrdiff_t start = 0; start + n <= len; ++start) {
    ++counts[std::vector<std::string>(tokens.begin() + start, tokens.begin() + start + n)];
  }
  return counts;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

BleuReport bleu(std::span<const TokenList> hypotheses, std::span<const TokenList> references, int max_n) {
  if (hypotheses.size() != references.size()) {
    throw ValidationError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                          std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw ValidationError("bleu: empty corpus");
  if (max_n < 1) throw ContractViolation("bleu: max_n must be positive");

  BleuReport report;
  report.max_n = max_n;
  report.matches.assign(static_cast<std::size_t>(max_n), 0);
  report.totals.assign(static_cast<std::size_t>(max_n), 0);
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    report.hypothesis_length += hypotheses[s].size();
    report.reference_length += references[s].size();
    for (int n = 1; n <= max_n; ++n) {
      const NgramCounts hyp = count_ngrams(hypotheses[s], n);
      const NgramCounts ref = count_ngrams(references[s], n);
      for (const auto& [gram, count] : hyp) {
        auto it = ref.find(gram);
        if (it != ref.end()) report.matches[n - 1] += std::min(count, it->second);
        report.totals[n - 1] += count;
      }
    }
  }

  double log_sum = 0.0;
  int counted = 0;
  bool zero = false;
  for (int n = 0; n < max_n; ++n) {
    if (report.totals[n] == 0) {
      report.precisions.push_back(0.0);
      continue;
    }
    const double p = static_cast<double>(report.matches[n]) / static_cast<double>(report.totals[n]);
    report.precisions.push_back(p);
    ++counted;
    if (p == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  const double c = static_cast<double>(report.hypothesis_length);
  const double r = static_cast<double>(report.reference_length);
  if (c < r) report.brevity_penalty = c == 0.0 ? 0.0 : std::exp(1.0 - r / c);
  if (counted == 0 || zero) {
    report.bleu = (counted == 0 && r == 0.0) ? 1.0 : 0.0;
  } else {
    report.bleu = report.brevity_penalty * std::exp(log_sum / counted);
  }
  return report;
}

void print_key_values(std::ostream& out, const BleuReport& report) {
  out << "# " << kBleuRegime << '\n';
  out << "bleu=" << format_double(report.bleu) << '\n';
  out << "bleu_percent=" << format_double(report.bleu * 100.0) << '\n';
  for (int n = 0; n < report.max_n; ++n) {
    out << "p" << n + 1 << '=' << format_double(report.precisions[n]) << " (" << report.matches[n] << '/'
        << report.totals[n] << ")\n";
  }
  out << "brevity_penalty=" << format_double(report.brevity_penalty) << '\n';
  out << "hypothesis_length=" << report.hypothesis_length << '\n';
  out << "reference_length=" << report.reference_length << '\n';
}

std::string to_json(const BleuReport& report) {
  nlohmann::json j;
  j["bleu"] = report.bleu;
  j["bleu_percent"] = report.bleu * 100.0;
  j["precisions"] = report.precisions;
  j["matches"] = report.matches;
  j["totals"] = report.totals;
  j["brevity_penalty"] = report.brevity_penalty;
  j["hypothesis_length"] = report.hypothesis_length;
  j["reference_length"] = report.reference_length;
  j["max_n"] = report.max_n;
  j["regime"] = kBleuRegime;
  return j.dump();
}

}  // namespace insmt
