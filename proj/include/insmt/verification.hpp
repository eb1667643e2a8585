#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace insmt {

struct VerificationCase {
  std::string name;
  int configuration = 0;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

struct VerificationReport {
  std::vector<VerificationCase> cases;
  double max_relative_error = 0.0;
  std::string worst_case;
  int configurations = 0;
  double seconds = 0.0;
};

// Finite-difference checks (64-bit) of every op kind, every layer, and the
// full sentence loss, each on `configurations` random tiny shapes.
VerificationReport run_verification(int configurations = 20, std::uint64_t seed = 1,
                                    double epsilon = 1e-5);

}  // namespace insmt
