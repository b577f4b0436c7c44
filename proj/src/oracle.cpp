#include "branchlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "branchlab/common.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

namespace {

// Fixings over binary POSITIONS (index into instance.binaries) as bitmasks;
// keeps memo keys compact for |J| <= 20.
struct Masks {
  uint32_t zero = 0;
  uint32_t one = 0;
  uint32_t fixed() const { return zero | one; }
};

Fixings to_fixings(const MilpInstance& inst, Masks m) {
  Fixings fix;
  for (size_t p = 0; p < inst.binaries.size(); ++p) {
    if (m.zero & (1u << p)) fix.zero.push_back(inst.binaries[p]);
    if (m.one & (1u << p)) fix.one.push_back(inst.binaries[p]);
  }
  return fix;
}

Masks to_masks(const MilpInstance& inst, const Fixings& fix) {
  Masks m;
  for (size_t p = 0; p < inst.binaries.size(); ++p) {
    if (std::binary_search(fix.zero.begin(), fix.zero.end(), inst.binaries[p])) m.zero |= 1u << p;
    if (std::binary_search(fix.one.begin(), fix.one.end(), inst.binaries[p])) m.one |= 1u << p;
  }
  return m;
}

int64_t incumbent_key(std::optional<double> inc) {
  if (!inc) return INT64_MIN;
  return static_cast<int64_t>(std::llround(*inc * 1e9));  // 1e-9 buckets
}

struct PairHash {
  size_t operator()(uint64_t v) const { return static_cast<size_t>(mix_u64(v)); }
};

// Shared node classification replicating the engine's pruning exactly.
enum class NodeClass { infeasible, bound_pruned, integral, fractional };

class OracleContext {
 public:
  explicit OracleContext(const MilpInstance& inst) : inst_(inst) {}

  const LpResult& lp(Masks m) {
    uint64_t key = (static_cast<uint64_t>(m.zero) << 32) | m.one;
    auto it = lp_cache_.find(key);
    if (it != lp_cache_.end()) return it->second;
    return lp_cache_.emplace(key, solve_relaxation(inst_, to_fixings(inst_, m))).first->second;
  }

  NodeClass classify(const LpResult& res, std::optional<double> inc) const {
    if (res.status == LpStatus::infeasible) return NodeClass::infeasible;
    if (inc && res.objective >= *inc - kPruneTol) return NodeClass::bound_pruned;
    for (int j : inst_.binaries)
      if (std::abs(res.x[j] - std::round(res.x[j])) > kIntTol) return NodeClass::fractional;
    return NodeClass::integral;
  }

  // Child visited first under the engine's rounding rule.
  int first_child_value(const LpResult& res, int var) const {
    return res.x[var] >= 0.5 ? 1 : 0;
  }

  std::vector<int> candidate_positions(Masks m) const {
    std::vector<int> out;
    for (size_t p = 0; p < inst_.binaries.size(); ++p)
      if (!(m.fixed() & (1u << p))) out.push_back(static_cast<int>(p));
    return out;
  }

  Masks child(Masks m, int pos, int value) const {
    Masks c = m;
    if (value == 0) c.zero |= 1u << pos;
    else c.one |= 1u << pos;
    return c;
  }

  const MilpInstance& inst_;
  std::unordered_map<uint64_t, LpResult, PairHash> lp_cache_;
};

struct MemoKey {
  uint64_t masks;
  int64_t inc;
  bool operator==(const MemoKey& o) const { return masks == o.masks && inc == o.inc; }
};

struct MemoKeyHash {
  size_t operator()(const MemoKey& k) const {
    return static_cast<size_t>(mix_u64(k.masks ^ mix_u64(static_cast<uint64_t>(k.inc))));
  }
};

struct SubtreeValue {
  int64_t size = 0;
  std::optional<double> incumbent_out;
};

class MinTreeSolver {
 public:
  MinTreeSolver(OracleContext& ctx, ChildOrder order) : ctx_(ctx), order_(order) {}

  SubtreeValue solve(Masks m, std::optional<double> inc) {
    MemoKey key{(static_cast<uint64_t>(m.zero) << 32) | m.one, incumbent_key(inc)};
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    ++nodes_explored_;

    SubtreeValue result;
    const LpResult& res = ctx_.lp(m);
    switch (ctx_.classify(res, inc)) {
      case NodeClass::infeasible:
      case NodeClass::bound_pruned:
        result = {1, inc};
        break;
      case NodeClass::integral:
        result = {1, res.objective};
        break;
      case NodeClass::fractional: {
        int64_t best = INT64_MAX;
        std::optional<double> inc_out;
        for (int pos : ctx_.candidate_positions(m)) {
          auto [size, out] = action_value(m, res, pos, inc);
          if (size < best) best = size;
          inc_out = out;  // identical across actions: B&B finds the subtree optimum
        }
        result = {best, inc_out};
        break;
      }
    }
    memo_.emplace(key, result);
    return result;
  }

  // Minimal subtree size when branching on `pos` at this node.
  std::pair<int64_t, std::optional<double>> action_value(Masks m, const LpResult& res, int pos,
                                                         std::optional<double> inc) {
    int first = ctx_.first_child_value(res, ctx_.inst_.binaries[pos]);
    auto eval_order = [&](int first_value) {
      SubtreeValue a = solve(ctx_.child(m, pos, first_value), inc);
      SubtreeValue b = solve(ctx_.child(m, pos, 1 - first_value), a.incumbent_out);
      return std::make_pair(1 + a.size + b.size, b.incumbent_out);
    };
    auto engine = eval_order(first);
    if (order_ == ChildOrder::engine_rule) return engine;
    auto flipped = eval_order(1 - first);
    return flipped.first < engine.first ? flipped : engine;
  }

  int64_t nodes_explored() const { return nodes_explored_; }

 private:
  OracleContext& ctx_;
  ChildOrder order_;
  std::unordered_map<MemoKey, SubtreeValue, MemoKeyHash> memo_;
  int64_t nodes_explored_ = 0;
};

}  // namespace

OracleResult min_tree_size(const MilpInstance& instance, const Fixings& fixings,
                           std::optional<double> incumbent, ChildOrder child_order) {
  if (instance.binaries.size() > 32)
    throw OracleCapError("min_tree_size: more than 32 binaries");
  OracleContext ctx(instance);
  Masks root = to_masks(instance, fixings);
  std::vector<int> candidates = ctx.candidate_positions(root);
  if (candidates.size() > 14)
    throw OracleCapError("min_tree_size: " + std::to_string(candidates.size()) +
                         " unfixed binaries exceed the cap of 14");

  MinTreeSolver solver(ctx, child_order);
  OracleResult result;
  SubtreeValue root_value = solver.solve(root, incumbent);
  result.min_tree_size = root_value.size;
  result.milp_optimum = root_value.incumbent_out;

  const LpResult& res = ctx.lp(root);
  if (ctx.classify(res, incumbent) == NodeClass::fractional) {
    for (int pos : candidates) {
      auto [size, out] = solver.action_value(root, res, pos, incumbent);
      if (size == root_value.size)
        result.optimal_first_actions.push_back(instance.binaries[pos]);
    }
  }
  result.nodes_explored = solver.nodes_explored();
  return result;
}

BruteForceResult brute_force_optimum(const MilpInstance& instance) {
  const int nb = static_cast<int>(instance.binaries.size());
  if (nb > 20) throw OracleCapError("brute_force_optimum: |J| > 20");
  const bool pure_binary = nb == instance.num_vars;

  BruteForceResult best;
  for (uint32_t assign = 0; assign < (1u << nb); ++assign) {
    double objective;
    bool feasible;
    if (pure_binary) {
      feasible = true;
      objective = 0.0;
      for (int p = 0; p < nb; ++p)
        if (assign & (1u << p)) objective += instance.c[instance.binaries[p]];
      for (int i = 0; i < instance.num_cons && feasible; ++i) {
        double lhs = 0.0;
        for (int p = 0; p < nb; ++p)
          if (assign & (1u << p)) lhs += instance.at(i, instance.binaries[p]);
        feasible = lhs <= instance.b[i] + kFeasTol;
      }
    } else {
      Fixings fix;
      for (int p = 0; p < nb; ++p) {
        if (assign & (1u << p)) fix.one.push_back(instance.binaries[p]);
        else fix.zero.push_back(instance.binaries[p]);
      }
      LpResult res = solve_relaxation(instance, fix);
      feasible = res.status == LpStatus::optimal;
      objective = feasible ? res.objective : 0.0;
    }
    if (feasible && (!best.feasible || objective < best.objective)) {
      best.feasible = true;
      best.objective = objective;
      best.assignment.resize(nb);
      for (int p = 0; p < nb; ++p) best.assignment[p] = (assign >> p) & 1;
    }
  }
  return best;
}

namespace {

// Exhaustive minimum over complete DFS policies, threading the incumbent
// through an explicit open-node stack: no subtree decomposition is assumed,
// which is what makes this side an independent check.
class GlobalPolicySolver {
 public:
  explicit GlobalPolicySolver(OracleContext& ctx) : ctx_(ctx) {}

  int64_t solve(std::vector<Masks>& stack, std::optional<double> inc) {
    if (stack.empty()) return 0;
    std::vector<uint64_t> key;
    key.reserve(stack.size() + 1);
    for (const Masks& m : stack) key.push_back((static_cast<uint64_t>(m.zero) << 32) | m.one);
    key.push_back(static_cast<uint64_t>(incumbent_key(inc)));
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    Masks node = stack.back();
    stack.pop_back();
    const LpResult& res = ctx_.lp(node);
    int64_t result;
    NodeClass cls = ctx_.classify(res, inc);
    if (cls != NodeClass::fractional) {
      std::optional<double> next_inc = cls == NodeClass::integral ? res.objective : inc;
      result = 1 + solve(stack, next_inc);
    } else {
      result = INT64_MAX;
      for (int pos : ctx_.candidate_positions(node)) {
        int first = ctx_.first_child_value(res, ctx_.inst_.binaries[pos]);
        stack.push_back(ctx_.child(node, pos, 1 - first));
        stack.push_back(ctx_.child(node, pos, first));
        result = std::min(result, 1 + solve(stack, inc));
        stack.pop_back();
        stack.pop_back();
      }
    }
    stack.push_back(node);
    memo_.emplace(std::move(key), result);
    return result;
  }

 private:
  struct VecHash {
    size_t operator()(const std::vector<uint64_t>& v) const {
      uint64_t h = 0x9e3779b97f4a7c15ull;
      for (uint64_t x : v) h = mix_u64(h ^ mix_u64(x));
      return static_cast<size_t>(h);
    }
  };
  OracleContext& ctx_;
  std::unordered_map<std::vector<uint64_t>, int64_t, VecHash> memo_;
};

}  // namespace

Prop2Report verify_prop2(const MilpInstance& instance) {
  if (instance.binaries.size() > 6)
    throw OracleCapError("verify_prop2: |J| > 6 exceeds the policy-enumeration cap");
  OracleContext ctx(instance);

  MinTreeSolver greedy(ctx, ChildOrder::engine_rule);
  Prop2Report report;
  report.greedy_size = greedy.solve(Masks{}, std::nullopt).size;

  GlobalPolicySolver global(ctx);
  std::vector<Masks> stack{Masks{}};
  report.global_min_size = global.solve(stack, std::nullopt);

  report.equal = report.greedy_size == report.global_min_size;
  return report;
}

}  // namespace branchlab
