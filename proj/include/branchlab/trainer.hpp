#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "branchlab/bnb.hpp"
#include "branchlab/qnet.hpp"
#include "branchlab/replay.hpp"

namespace branchlab {

struct EpsSchedule {
  double start = 1.0;
  double end = 0.02;
  int horizon = 0;  // episodes of linear decay; 0 resolves to 60% of N
};

struct TrainConfig {
  int episodes = 300;
  EpsSchedule eps;
  double lr = 1e-3;
  int batch_size = 128;
  int steps_per_episode = 6;
  size_t buffer_capacity = 50000;
  int pca_k = 16;
  Arch arch = Arch::dueling_mul;
  uint64_t seed = 1;
  int64_t node_limit = 50000;
  int train_instances = 50;
  int test_instances = 100;
  int eval_every = 25;
  int jobs = 0;  // evaluation worker count, 0 = OpenMP default
  bool sb_baseline = true;
  std::filesystem::path diagnostics_dir;  // diverged-checkpoint target, empty = none

  std::vector<std::string> validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

struct MetricsRow {
  int iteration = 0;  // episodes completed
  double mean_test_nodes = 0.0;
  double median_test_nodes = 0.0;
  double mean_train_nodes = 0.0;  // window since the previous row
  double loss = 0.0;              // mean minibatch loss in the window
  double epsilon = 0.0;
  int64_t limit_hits = 0;  // truncated episodes in the window
  double wall_ms = 0.0;    // wall-clock only; excluded from determinism checks
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
  double random_baseline_mean = 0.0;
  double mostfrac_baseline_mean = 0.0;
  double sb_baseline_mean = 0.0;  // 0 when the SB baseline is disabled
};

// Greedy policy over a trained Q-network: argmin of the masked forward
// pass. Static encodings are precomputed per instance at construction, so
// the policy is immutable and safely shared across parallel runs.
class QNetPolicy final : public BranchingPolicy {
 public:
  QNetPolicy(const QNetwork& net, const PcaModel& pca,
             std::span<const MilpInstance> instances);
  int choose(const BranchView& view) const override;
  std::string name() const override { return "learned"; }

 private:
  const QNetwork& net_;
  std::unordered_map<std::string, std::vector<double>> static_cache_;
};

struct EvalSummary {
  double mean = 0.0;    // over completed instances
  double median = 0.0;  // even counts average the middle pair
  std::vector<int64_t> nodes;      // -1 where the node limit was hit
  std::vector<int> limit_hits;     // indices excluded from the mean
};

// Solves every instance with epsilon = 0 and merges results by index.
// evaluate() fans out across instances on an OpenMP team of `jobs`
// threads; evaluate_serial() is the reference loop the parallel kernel is
// tested against. Identical outputs by construction (no shared state).
EvalSummary evaluate(const BranchingPolicy& policy, std::span<const MilpInstance> instances,
                     int64_t node_limit, int jobs = 0);
EvalSummary evaluate_serial(const BranchingPolicy& policy,
                            std::span<const MilpInstance> instances, int64_t node_limit);

struct TrainResult {
  Checkpoint checkpoint;
  RunMetrics metrics;
};

// The learning loop: per episode, draw a training instance, solve it with
// the current policy under epsilon-greedy exploration, harvest one
// experience per branched node (target = observed subtree size, weight =
// 1/tree size), then fit minibatches drawn by prioritized replay.
// Deterministic end-to-end in config.seed.
TrainResult train(const FamilyConfig& family, const TrainConfig& config);

struct CvRow {
  int iteration = 0;
  double mean_test_nodes = 0.0;  // mean over folds
  double ci95_test_nodes = 0.0;  // 1.96 * sd / sqrt(folds)
  double mean_loss = 0.0;
  double mean_epsilon = 0.0;
};

struct CvMetrics {
  std::vector<CvRow> rows;
  int folds_completed = 0;
  std::vector<std::string> fold_errors;
  double random_baseline_mean = 0.0;
  double mostfrac_baseline_mean = 0.0;
  double sb_baseline_mean = 0.0;
};

// Repeats train/evaluate on `folds` independent random splits of the same
// family pool and aggregates per-iteration means with Gaussian confidence
// half-widths. Failed folds are recorded and skipped.
CvMetrics cross_validate(const FamilyConfig& family, const TrainConfig& config, int folds);

void write_metrics_csv(const RunMetrics& metrics, const std::filesystem::path& path);
void write_cv_csv(const CvMetrics& metrics, const std::filesystem::path& path);

}  // namespace branchlab
