#pragma once

#include <vector>

#include "branchlab/instances.hpp"

namespace branchlab {

// Bound fixings applied to binary variables at a search node.
struct Fixings {
  std::vector<int> zero;  // sorted binary indices fixed to 0
  std::vector<int> one;   // sorted binary indices fixed to 1

  bool empty() const { return zero.empty() && one.empty(); }
  int depth() const { return static_cast<int>(zero.size() + one.size()); }
  bool fixes(int j) const;
  Fixings with(int j, int value) const;  // returns a copy with one more fixing

  // Empty iff zero/one are sorted, disjoint and subsets of the binary set.
  std::vector<std::string> validate(const MilpInstance& instance) const;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;  // structural values, present iff optimal
  double objective = 0.0;
  int iterations = 0;
};

// Two-phase primal simplex on the bounded-variable standard form.
// Binaries are relaxed to [0,1] (or pinned by fixings); continuous
// variables are boxed in [-kContinuousBox, kContinuousBox]. Dantzig
// pricing with a Bland's-rule fallback after 50 consecutive degenerate
// pivots. Deterministic: identical inputs give identical pivot sequences.
LpResult solve_relaxation(const MilpInstance& instance, const Fixings& fixings);

}  // namespace branchlab
