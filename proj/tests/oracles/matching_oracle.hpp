#pragma once

// Exhaustive search over consistent 1-to-1 link sets.

#include <algorithm>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

struct Link {
  double score;
  int source;  // 1-based
  int target;  // 1-based
};

// Links ordered by confidence: higher score first, then lower source, then lower target.
inline bool more_confident(const Link& a, const Link& b) {
  return std::make_tuple(-a.score, a.source, a.target) < std::make_tuple(-b.score, b.source, b.target);
}

// Set A outranks set B when, comparing their links from most to least
// confident, A holds the more confident link at the first difference, or B
// runs out first.
inline bool outranks(std::vector<Link> a, std::vector<Link> b) {
  std::sort(a.begin(), a.end(), more_confident);
  std::sort(b.begin(), b.end(), more_confident);
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
    if (more_confident(a[k], b[k])) return true;
    if (more_confident(b[k], a[k])) return false;
  }
  return a.size() > b.size();
}

// `score(i, j)` for 1-based i <= n, j <= m. Returns sorted (source, target) pairs.
template <typename Score>
std::vector<std::pair<int, int>> best_matching(int n, int m, double tau, const Score& score) {
  std::vector<Link> eligible;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      if (score(i, j) >= tau) eligible.push_back({score(i, j), i, j});
    }
  }
  std::vector<Link> best, current;
  std::vector<char> used_source(static_cast<std::size_t>(n) + 1, 0), used_target(static_cast<std::size_t>(m) + 1, 0);
  auto recurse = [&](auto& self, std::size_t k) -> void {
    if (k == eligible.size()) {
      if (outranks(current, best)) best = current;
      return;
    }
    self(self, k + 1);
    const Link& l = eligible[k];
    if (!used_source[l.source] && !used_target[l.target]) {
      used_source[l.source] = used_target[l.target] = 1;
      current.push_back(l);
      self(self, k + 1);
      current.pop_back();
      used_source[l.source] = used_target[l.target] = 0;
    }
  };
  recurse(recurse, 0);
  std::vector<std::pair<int, int>> out;
  for (const Link& l : best) out.emplace_back(l.source, l.target);
  std::sort(out.begin(), out.end());
  return out;
}

// The (|set|, product of scores) ranking, used only on the small fixed examples.
template <typename Score>
std::vector<std::pair<int, int>> best_by_size_then_product(int n, int m, double tau, const Score& score) {
  std::vector<Link> eligible;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      if (score(i, j) >= tau) eligible.push_back({score(i, j), i, j});
    }
  }
  std::vector<Link> best, current;
  double best_product = -1.0;
  std::vector<char> used_source(static_cast<std::size_t>(n) + 1, 0), used_target(static_cast<std::size_t>(m) + 1, 0);
  auto recurse = [&](auto& self, std::size_t k) -> void {
    if (k == eligible.size()) {
      double product = 1.0;
      for (const Link& l : current) product *= l.score;
      if (current.size() > best.size() || (current.size() == best.size() && product > best_product)) {
        best = current;
        best_product = product;
      }
      return;
    }
    self(self, k + 1);
    const Link& l = eligible[k];
    if (!used_source[l.source] && !used_target[l.target]) {
      used_source[l.source] = used_target[l.target] = 1;
      current.push_back(l);
      self(self, k + 1);
      current.pop_back();
      used_source[l.source] = used_target[l.target] = 0;
    }
  };
  recurse(recurse, 0);
  std::vector<std::pair<int, int>> out;
  for (const Link& l : best) out.emplace_back(l.source, l.target);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
