#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "branchlab/lp.hpp"

namespace branchlab {

enum class NodeOutcome { branched, pruned_bound, pruned_infeasible, integral_leaf };

std::string to_string(NodeOutcome outcome);

struct NodeState {
  int id = -1;
  int depth = 0;
  Fixings fixings;
  LpResult lp;
  std::optional<int> parent;
  std::optional<double> incumbent_at_entry;
  NodeOutcome outcome = NodeOutcome::pruned_infeasible;
  int action = -1;  // branching variable, valid iff branched
  int child0 = -1;  // x_action = 0 child id
  int child1 = -1;  // x_action = 1 child id
};

struct Decision {
  int node_id = -1;
  int action = -1;
  bool was_random = false;
};

// A fully expanded DFS tree. `v[i]` is the subtree size of node i, node
// inclusive: leaves have v = 1, branched nodes v = 1 + v(child0) + v(child1),
// and v(root) equals the node count.
struct TreeRecord {
  std::vector<NodeState> nodes;  // indexed by node id
  std::vector<int64_t> v;
  int64_t total_nodes = 0;
  std::optional<double> incumbent;  // MILP optimum; empty iff infeasible
  std::vector<double> best_x;
  std::vector<Decision> decisions;
  std::vector<int> expansion_order;  // ids in DFS pop order
};

// Read-only view handed to a branching policy. `candidates` lists the
// unfixed binaries in increasing index order; the returned action must be
// one of them.
struct BranchView {
  const MilpInstance& instance;
  const NodeState& node;
  const std::vector<int>& candidates;
};

class BranchingPolicy {
 public:
  virtual ~BranchingPolicy() = default;
  // Must be safe to call concurrently from parallel engine runs.
  virtual int choose(const BranchView& view) const = 0;
  virtual std::string name() const = 0;
};

struct SolveConfig {
  uint64_t seed = 0;
  double epsilon = 0.0;        // per-node probability of a uniform random action
  int64_t node_limit = 50000;  // expansion budget per episode
};

struct SolveResult {
  TreeRecord record;
  bool truncated = false;  // node_limit hit; record is partial, v not computed
};

// Depth-first B&B over the binary variables. Prunes on infeasibility, on
// bound >= incumbent - kPruneTol and on integral LP solutions (which update
// the incumbent). The child whose fixing agrees with rounding x_j is
// visited first; ties at 0.5 visit the 1-child first.
SolveResult solve(const MilpInstance& instance, const BranchingPolicy& policy,
                  const SolveConfig& config);

// Recomputes subtree sizes bottom-up. Throws on dangling child references.
std::vector<int64_t> compute_subtree_sizes(const TreeRecord& record);

// argmin_j |x_j - 0.5| over fractional unfixed binaries, lowest index on
// ties; falls back to the lowest unfixed index if none is fractional.
class MostFractionalPolicy final : public BranchingPolicy {
 public:
  int choose(const BranchView& view) const override;
  std::string name() const override { return "mostfrac"; }
};

// Uniform over unfixed binaries. Stateless: the draw is a pure function of
// (seed, node id, depth), so shared use across parallel runs stays
// deterministic.
class RandomPolicy final : public BranchingPolicy {
 public:
  explicit RandomPolicy(uint64_t seed) : seed_(seed) {}
  int choose(const BranchView& view) const override;
  std::string name() const override { return "random"; }

 private:
  uint64_t seed_;
};

// Full strong branching: solves both child LPs of every candidate and
// scores by max(delta0, 1e-6) * max(delta1, 1e-6), infeasible children
// contributing 1e6. Highest score wins, lowest index on ties.
class StrongBranchingPolicy final : public BranchingPolicy {
 public:
  explicit StrongBranchingPolicy(bool parallel = false) : parallel_(parallel) {}
  int choose(const BranchView& view) const override;
  std::string name() const override { return "sb"; }

 private:
  bool parallel_;
};

// Candidate scores used by StrongBranchingPolicy. The parallel variant
// solves the per-candidate child LPs across OpenMP threads; both variants
// produce identical scores since candidates do not interact.
std::vector<double> strong_branching_scores(const MilpInstance& instance, const NodeState& node,
                                            const std::vector<int>& candidates, bool parallel);

std::unique_ptr<BranchingPolicy> most_fractional_policy();
std::unique_ptr<BranchingPolicy> random_policy(uint64_t seed);
std::unique_ptr<BranchingPolicy> strong_branching_policy(bool parallel = false);

// JSON dump of nodes, outcomes, subtree sizes and decisions.
void export_tree(const TreeRecord& record, const std::filesystem::path& path);

}  // namespace branchlab
