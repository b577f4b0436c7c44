#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "branchlab/lp.hpp"

namespace branchlab {

enum class ChildOrder {
  engine_rule,         // replicate the engine's rounding-first visit order
  minimize_over_order  // additionally minimize over both child orders
};

struct OracleResult {
  int64_t min_tree_size = 0;
  std::vector<int> optimal_first_actions;  // argmin actions at the root call
  std::optional<double> milp_optimum;      // empty iff infeasible
  int64_t nodes_explored = 0;
};

// Exact minimum DFS tree size over all branching choices at every node,
// with incumbent propagation matching the engine. Memoized on
// (fixings, incumbent bucket). Hard cap: at most 14 unfixed binaries,
// otherwise throws OracleCapError.
OracleResult min_tree_size(const MilpInstance& instance, const Fixings& fixings,
                           std::optional<double> incumbent, ChildOrder child_order);

struct BruteForceResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<int> assignment;  // binary values in J order
};

// Enumerates all 2^|J| assignments, solving the continuous remainder by LP
// when present. Cap |J| <= 20, otherwise throws OracleCapError.
BruteForceResult brute_force_optimum(const MilpInstance& instance);

struct Prop2Report {
  int64_t greedy_size = 0;      // per-node minimal-subtree actions, composed
  int64_t global_min_size = 0;  // exhaustive minimum over complete DFS policies
  bool equal = false;
};

// Confirms that greedily taking a minimal-subtree action at every node
// achieves the global minimum tree size over all complete DFS policies.
// The global side threads the incumbent through an explicit open-node
// stack, so it does not assume the subtree decomposition it is checking.
// Cap |J| <= 6, otherwise throws OracleCapError.
Prop2Report verify_prop2(const MilpInstance& instance);

}  // namespace branchlab
