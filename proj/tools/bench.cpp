// Benchmark comparing the OpenMP kernels against their serial reference
// implementations: instance evaluation fan-out, strong-branching candidate
// scoring and the PCA scatter build.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "branchlab/oracle.hpp"
#include "branchlab/trainer.hpp"

using namespace branchlab;
using clock_type = std::chrono::steady_clock;

namespace {

double ms_since(clock_type::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

template <typename F>
double time_ms(F&& fn, int repeats = 1) {
  auto t0 = clock_type::now();
  for (int r = 0; r < repeats; ++r) fn();
  return ms_since(t0) / repeats;
}

}  // namespace

int main() {
  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("benchmark: serial reference vs OpenMP kernels (%d threads)\n\n", threads);

  FamilyConfig family;
  family.kind = FamilyKind::multi_knapsack;
  family.items = 18;
  family.resources = 5;
  family.seed = 42;
  std::vector<MilpInstance> instances = generate_family(family, 48);

  MostFractionalPolicy mostfrac;
  EvalSummary serial_eval, parallel_eval;
  double t_eval_serial =
      time_ms([&] { serial_eval = evaluate_serial(mostfrac, instances, 50000); });
  double t_eval_parallel =
      time_ms([&] { parallel_eval = evaluate(mostfrac, instances, 50000, 0); });
  bool eval_match = serial_eval.nodes == parallel_eval.nodes;
  std::printf("evaluate %zu instances   serial %8.1f ms   parallel %8.1f ms   speedup %.2fx   %s\n",
              instances.size(), t_eval_serial, t_eval_parallel,
              t_eval_serial / t_eval_parallel, eval_match ? "identical" : "MISMATCH");

  // Strong-branching scores at the root of each instance.
  std::vector<NodeState> roots;
  std::vector<std::vector<int>> candidate_sets;
  for (const MilpInstance& inst : instances) {
    NodeState node;
    node.id = 0;
    node.lp = solve_relaxation(inst, {});
    roots.push_back(std::move(node));
    std::vector<int> cands(inst.binaries.begin(), inst.binaries.end());
    candidate_sets.push_back(std::move(cands));
  }
  std::vector<std::vector<double>> serial_scores(instances.size()),
      parallel_scores(instances.size());
  double t_sb_serial = time_ms([&] {
    for (size_t i = 0; i < instances.size(); ++i)
      serial_scores[i] =
          strong_branching_scores(instances[i], roots[i], candidate_sets[i], false);
  });
  double t_sb_parallel = time_ms([&] {
    for (size_t i = 0; i < instances.size(); ++i)
      parallel_scores[i] =
          strong_branching_scores(instances[i], roots[i], candidate_sets[i], true);
  });
  bool sb_match = serial_scores == parallel_scores;
  std::printf("sb scores %zu roots      serial %8.1f ms   parallel %8.1f ms   speedup %.2fx   %s\n",
              instances.size(), t_sb_serial, t_sb_parallel, t_sb_serial / t_sb_parallel,
              sb_match ? "identical" : "MISMATCH");

  FamilyConfig wide = family;
  wide.items = 40;
  wide.resources = 12;
  std::vector<MilpInstance> wide_instances = generate_family(wide, 160);
  PcaModel serial_pca, parallel_pca;
  double t_pca_serial = time_ms([&] { serial_pca = fit_pca(wide_instances, 16, 1); }, 3);
  double t_pca_parallel = time_ms([&] { parallel_pca = fit_pca(wide_instances, 16, 0); }, 3);
  bool pca_match = serial_pca.components == parallel_pca.components &&
                   serial_pca.mean == parallel_pca.mean;
  std::printf("pca fit %zu x %d        serial %8.1f ms   parallel %8.1f ms   speedup %.2fx   %s\n",
              wide_instances.size(), serial_pca.d, t_pca_serial, t_pca_parallel,
              t_pca_serial / t_pca_parallel, pca_match ? "identical" : "MISMATCH");

  return eval_match && sb_match && pca_match ? 0 : 1;
}
