#pragma once

// Randomized gradient verification of the two training losses.

#include <cstdint>
#include <string>
#include <vector>

#include "dcq/gradcheck.hpp"

namespace dcq {

struct GradSuiteCase {
  std::string loss;  // "dcq" or "cosface"
  std::vector<Index> dims;
  Index batch = 0;
  Index negatives = 0;  // queue size K or class count C
  double s = 0.0;
  double m = 0.0;
  GradCheckReport report;
};

/// `configs` random problems with at most 3 layers, D <= 8, B <= 4, K <= 6;
/// each checks both losses against central differences with step h.
std::vector<GradSuiteCase> run_gradient_suite(int configs, std::uint64_t seed, double h = 1e-5);

}  // namespace dcq
