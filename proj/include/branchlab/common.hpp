#pragma once

#include <stdexcept>
#include <string>

namespace branchlab {

// Numeric tolerances shared by the LP solver, the search engine and the
// oracle. The oracle must replicate the engine's pruning decisions exactly,
// so these live in one place.
inline constexpr double kFeasTol = 1e-7;   // LP feasibility/optimality
inline constexpr double kIntTol = 1e-6;    // integrality test on binaries
inline constexpr double kPruneTol = 1e-9;  // prune when bound >= incumbent - kPruneTol
inline constexpr double kContinuousBox = 1e6;  // box for non-binary variables

// Thrown when an oracle call exceeds its exponential-search cap.
struct OracleCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when training produces a non-finite loss or gradient.
struct TrainingDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace branchlab
