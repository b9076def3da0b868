#pragma once

#include <string>
#include <vector>

#include "deepsep/types.hpp"

namespace deepsep {

// Outputs of one algorithm on one sequence. Column t of y is y(t).
struct RunRecord {
  std::string algorithm;
  std::string config_digest;
  Matrix y;
  // ||s(t) - y(t)||^2; empty when no reference sources were attached.
  std::vector<double> sq_err;
  // Same after the best permutation/sign alignment over the whole run.
  std::vector<double> aligned_sq_err;

  int T() const { return static_cast<int>(y.cols()); }
};

}  // namespace deepsep
