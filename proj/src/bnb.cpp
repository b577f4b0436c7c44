#include "branchlab/bnb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "branchlab/common.hpp"
#include "branchlab/rng.hpp"
#include "json.hpp"

namespace branchlab {

std::string to_string(NodeOutcome outcome) {
  switch (outcome) {
    case NodeOutcome::branched: return "branched";
    case NodeOutcome::pruned_bound: return "pruned_bound";
    case NodeOutcome::pruned_infeasible: return "pruned_infeasible";
    case NodeOutcome::integral_leaf: return "integral_leaf";
  }
  return "unknown";
}

namespace {

std::vector<int> unfixed_binaries(const MilpInstance& instance, const Fixings& fixings) {
  std::vector<int> out;
  out.reserve(instance.binaries.size());
  for (int j : instance.binaries)
    if (!fixings.fixes(j)) out.push_back(j);
  return out;
}

bool integral_on_binaries(const MilpInstance& instance, const std::vector<double>& x) {
  for (int j : instance.binaries)
    if (std::abs(x[j] - std::round(x[j])) > kIntTol) return false;
  return true;
}

}  // namespace

SolveResult solve(const MilpInstance& instance, const BranchingPolicy& policy,
                  const SolveConfig& config) {
  SolveResult result;
  TreeRecord& rec = result.record;
  Rng rng(derive_seed(config.seed, "explore"));

  rec.nodes.emplace_back();
  rec.nodes[0].id = 0;
  std::vector<int> stack{0};
  int64_t expanded = 0;

  while (!stack.empty()) {
    if (expanded >= config.node_limit) {
      result.truncated = true;
      return result;
    }
    int id = stack.back();
    stack.pop_back();
    ++expanded;
    rec.expansion_order.push_back(id);

    NodeState& node = rec.nodes[id];
    node.incumbent_at_entry = rec.incumbent;
    node.lp = solve_relaxation(instance, node.fixings);

    if (node.lp.status == LpStatus::unbounded)
      throw std::runtime_error("bnb: LP relaxation unbounded; generator contract violated");
    if (node.lp.status == LpStatus::infeasible) {
      node.outcome = NodeOutcome::pruned_infeasible;
      continue;
    }
    if (rec.incumbent && node.lp.objective >= *rec.incumbent - kPruneTol) {
      node.outcome = NodeOutcome::pruned_bound;
      continue;
    }
    if (integral_on_binaries(instance, node.lp.x)) {
      node.outcome = NodeOutcome::integral_leaf;
      rec.incumbent = node.lp.objective;
      rec.best_x = node.lp.x;
      continue;
    }

    std::vector<int> candidates = unfixed_binaries(instance, node.fixings);
    if (candidates.empty())
      throw std::logic_error("bnb: fractional LP with no unfixed binaries");

    int action;
    bool was_random = false;
    if (config.epsilon > 0.0 && rng.next_double() < config.epsilon) {
      action = candidates[rng.uniform_int(0, static_cast<int>(candidates.size()) - 1)];
      was_random = true;
    } else {
      BranchView view{instance, node, candidates};
      action = policy.choose(view);
      if (!std::binary_search(candidates.begin(), candidates.end(), action))
        throw std::logic_error("bnb: policy returned a fixed or non-binary action");
    }
    rec.decisions.push_back({id, action, was_random});

    int child0 = static_cast<int>(rec.nodes.size());
    int child1 = child0 + 1;
    node.outcome = NodeOutcome::branched;
    node.action = action;
    node.child0 = child0;
    node.child1 = child1;

    double xa = node.lp.x[action];
    rec.nodes.emplace_back();
    rec.nodes.emplace_back();
    for (int k = 0; k < 2; ++k) {
      NodeState& child = rec.nodes[child0 + k];
      child.id = child0 + k;
      child.depth = rec.nodes[id].depth + 1;
      child.parent = id;
      child.fixings = rec.nodes[id].fixings.with(action, k);
    }
    // Rounding-first visit order: ties at 0.5 take the 1-child first.
    int first = xa >= 0.5 ? child1 : child0;
    int second = first == child1 ? child0 : child1;
    stack.push_back(second);
    stack.push_back(first);
  }

  rec.total_nodes = static_cast<int64_t>(rec.nodes.size());
  rec.v = compute_subtree_sizes(rec);
  return result;
}

std::vector<int64_t> compute_subtree_sizes(const TreeRecord& record) {
  const int n = static_cast<int>(record.nodes.size());
  std::vector<int64_t> v(n, 0);
  // Children always carry larger ids than their parent, so one reverse
  // sweep resolves the recursion.
  for (int i = n - 1; i >= 0; --i) {
    const NodeState& node = record.nodes[i];
    if (node.outcome == NodeOutcome::branched) {
      if (node.child0 < 0 || node.child0 >= n || node.child1 < 0 || node.child1 >= n ||
          node.child0 <= i || node.child1 <= i)
        throw std::runtime_error("compute_subtree_sizes: dangling child reference at node " +
                                 std::to_string(i));
      v[i] = 1 + v[node.child0] + v[node.child1];
    } else {
      v[i] = 1;
    }
  }
  return v;
}

int MostFractionalPolicy::choose(const BranchView& view) const {
  int best = view.candidates.front();
  double best_dist = 2.0;
  bool any_fractional = false;
  for (int j : view.candidates) {
    double xj = view.node.lp.x[j];
    if (std::abs(xj - std::round(xj)) <= kIntTol) continue;
    double dist = std::abs(xj - 0.5);
    // Distances within 1e-12 count as ties and keep the lower index.
    if (!any_fractional || dist < best_dist - 1e-12) {
      any_fractional = true;
      best_dist = dist;
      best = j;
    }
  }
  return best;
}

int RandomPolicy::choose(const BranchView& view) const {
  Rng rng(derive_seed(seed_, "draw",
                      (static_cast<uint64_t>(view.node.id) << 16) ^
                          static_cast<uint64_t>(view.node.depth)));
  int pick = rng.uniform_int(0, static_cast<int>(view.candidates.size()) - 1);
  return view.candidates[pick];
}

std::vector<double> strong_branching_scores(const MilpInstance& instance, const NodeState& node,
                                            const std::vector<int>& candidates, bool parallel) {
  const double parent_bound = node.lp.objective;
  const int count = static_cast<int>(candidates.size());
  std::vector<double> scores(count, 0.0);

  auto score_one = [&](int idx) {
    double deltas[2];
    for (int k = 0; k < 2; ++k) {
      LpResult child = solve_relaxation(instance, node.fixings.with(candidates[idx], k));
      deltas[k] = child.status == LpStatus::infeasible
                      ? 1e6
                      : std::max(child.objective - parent_bound, 1e-6);
    }
    scores[idx] = deltas[0] * deltas[1];
  };

  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
    for (int idx = 0; idx < count; ++idx) score_one(idx);
#else
    for (int idx = 0; idx < count; ++idx) score_one(idx);
#endif
  } else {
    for (int idx = 0; idx < count; ++idx) score_one(idx);
  }
  return scores;
}

int StrongBranchingPolicy::choose(const BranchView& view) const {
  std::vector<double> scores =
      strong_branching_scores(view.instance, view.node, view.candidates, parallel_);
  int best = 0;
  for (int idx = 1; idx < static_cast<int>(scores.size()); ++idx)
    if (scores[idx] > scores[best]) best = idx;
  return view.candidates[best];
}

std::unique_ptr<BranchingPolicy> most_fractional_policy() {
  return std::make_unique<MostFractionalPolicy>();
}

std::unique_ptr<BranchingPolicy> random_policy(uint64_t seed) {
  return std::make_unique<RandomPolicy>(seed);
}

std::unique_ptr<BranchingPolicy> strong_branching_policy(bool parallel) {
  return std::make_unique<StrongBranchingPolicy>(parallel);
}

void export_tree(const TreeRecord& record, const std::filesystem::path& path) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const NodeState& node : record.nodes) {
    nlohmann::json j{{"id", node.id},
                     {"depth", node.depth},
                     {"outcome", to_string(node.outcome)},
                     {"fixed_zero", node.fixings.zero},
                     {"fixed_one", node.fixings.one}};
    if (node.parent) j["parent"] = *node.parent;
    if (node.lp.status == LpStatus::optimal) j["objective"] = node.lp.objective;
    if (node.outcome == NodeOutcome::branched) {
      j["action"] = node.action;
      j["child0"] = node.child0;
      j["child1"] = node.child1;
    }
    nodes.push_back(std::move(j));
  }
  nlohmann::json decisions = nlohmann::json::array();
  for (const Decision& d : record.decisions)
    decisions.push_back({{"node", d.node_id}, {"action", d.action}, {"was_random", d.was_random}});
  nlohmann::json root{{"total_nodes", record.total_nodes},
                      {"v", record.v},
                      {"nodes", std::move(nodes)},
                      {"decisions", std::move(decisions)},
                      {"expansion_order", record.expansion_order}};
  if (record.incumbent) {
    root["incumbent"] = *record.incumbent;
    root["best_x"] = record.best_x;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << root.dump(1) << "\n";
}

}  // namespace branchlab
