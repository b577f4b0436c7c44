#include "branchlab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "branchlab/common.hpp"
#include "branchlab/report.hpp"
#include "branchlab/rng.hpp"

namespace branchlab {

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (episodes < 1) problems.push_back("episodes must be >= 1");
  if (eps.start < 0.0 || eps.start > 1.0 || eps.end < 0.0 || eps.end > 1.0)
    problems.push_back("epsilon schedule must stay in [0,1]");
  if (lr <= 0.0) problems.push_back("lr must be positive");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (steps_per_episode < 0) problems.push_back("steps_per_episode must be >= 0");
  if (buffer_capacity < 1) problems.push_back("buffer_capacity must be >= 1");
  if (pca_k < 1) problems.push_back("pca_k must be >= 1");
  if (node_limit < 1) problems.push_back("node_limit must be >= 1");
  if (train_instances < 1) problems.push_back("train_instances must be >= 1");
  if (test_instances < 1) problems.push_back("test_instances must be >= 1");
  if (eval_every < 1) problems.push_back("eval_every must be >= 1");
  return problems;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"episodes", c.episodes},
                     {"eps_start", c.eps.start},
                     {"eps_end", c.eps.end},
                     {"eps_horizon", c.eps.horizon},
                     {"lr", c.lr},
                     {"batch_size", c.batch_size},
                     {"steps_per_episode", c.steps_per_episode},
                     {"buffer_capacity", c.buffer_capacity},
                     {"pca_k", c.pca_k},
                     {"arch", to_string(c.arch)},
                     {"seed", c.seed},
                     {"node_limit", c.node_limit},
                     {"train_instances", c.train_instances},
                     {"test_instances", c.test_instances},
                     {"eval_every", c.eval_every},
                     {"jobs", c.jobs},
                     {"sb_baseline", c.sb_baseline}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.episodes = j.at("episodes").get<int>();
  c.eps.start = j.at("eps_start").get<double>();
  c.eps.end = j.at("eps_end").get<double>();
  c.eps.horizon = j.at("eps_horizon").get<int>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.steps_per_episode = j.at("steps_per_episode").get<int>();
  c.buffer_capacity = j.at("buffer_capacity").get<size_t>();
  c.pca_k = j.at("pca_k").get<int>();
  c.arch = arch_from_string(j.at("arch").get<std::string>());
  c.seed = j.at("seed").get<uint64_t>();
  c.node_limit = j.at("node_limit").get<int64_t>();
  c.train_instances = j.at("train_instances").get<int>();
  c.test_instances = j.at("test_instances").get<int>();
  c.eval_every = j.at("eval_every").get<int>();
  c.jobs = j.value("jobs", 0);
  c.sb_baseline = j.value("sb_baseline", true);
}

QNetPolicy::QNetPolicy(const QNetwork& net, const PcaModel& pca,
                       std::span<const MilpInstance> instances)
    : net_(net) {
  for (const MilpInstance& inst : instances)
    static_cache_.emplace(inst.id, encode_static(inst, pca));
}

int QNetPolicy::choose(const BranchView& view) const {
  auto it = static_cache_.find(view.instance.id);
  if (it == static_cache_.end())
    throw std::invalid_argument("QNetPolicy: unknown instance " + view.instance.id);
  std::vector<double> dyn =
      encode_dynamic(view.node, view.instance, view.node.incumbent_at_entry);
  std::vector<uint8_t> mask(view.instance.binaries.size(), 0);
  for (int j : view.candidates) mask[view.instance.binary_position(j)] = 1;
  int pos = select_action(net_, it->second, dyn, mask);
  return view.instance.binaries[pos];
}

namespace {

double mean_of(const std::vector<int64_t>& nodes) {
  double sum = 0.0;
  int64_t count = 0;
  for (int64_t n : nodes)
    if (n >= 0) {
      sum += static_cast<double>(n);
      ++count;
    }
  return count > 0 ? sum / count : 0.0;
}

double median_of(const std::vector<int64_t>& nodes) {
  std::vector<int64_t> completed;
  for (int64_t n : nodes)
    if (n >= 0) completed.push_back(n);
  if (completed.empty()) return 0.0;
  std::sort(completed.begin(), completed.end());
  size_t mid = completed.size() / 2;
  if (completed.size() % 2 == 1) return static_cast<double>(completed[mid]);
  return 0.5 * static_cast<double>(completed[mid - 1] + completed[mid]);
}

EvalSummary summarize(std::vector<int64_t> nodes) {
  EvalSummary summary;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i] < 0) summary.limit_hits.push_back(static_cast<int>(i));
  summary.mean = mean_of(nodes);
  summary.median = median_of(nodes);
  summary.nodes = std::move(nodes);
  return summary;
}

int64_t solve_one(const BranchingPolicy& policy, const MilpInstance& inst, int64_t node_limit,
                  size_t index) {
  SolveConfig cfg;
  cfg.seed = derive_seed(0x5eedba5eull, "eval", index);
  cfg.epsilon = 0.0;
  cfg.node_limit = node_limit;
  SolveResult res = solve(inst, policy, cfg);
  return res.truncated ? -1 : res.record.total_nodes;
}

}  // namespace

EvalSummary evaluate_serial(const BranchingPolicy& policy,
                            std::span<const MilpInstance> instances, int64_t node_limit) {
  std::vector<int64_t> nodes(instances.size(), 0);
  for (size_t i = 0; i < instances.size(); ++i)
    nodes[i] = solve_one(policy, instances[i], node_limit, i);
  return summarize(std::move(nodes));
}

EvalSummary evaluate(const BranchingPolicy& policy, std::span<const MilpInstance> instances,
                     int64_t node_limit, int jobs) {
  std::vector<int64_t> nodes(instances.size(), 0);
  const int count = static_cast<int>(instances.size());
  std::string error;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) \
    num_threads(jobs > 0 ? jobs : omp_get_max_threads())
#endif
  for (int i = 0; i < count; ++i) {
    try {
      nodes[i] = solve_one(policy, instances[i], node_limit, static_cast<size_t>(i));
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error("evaluate: " + error);
  return summarize(std::move(nodes));
}

namespace {

double epsilon_at(const EpsSchedule& eps, int episode, int resolved_horizon) {
  if (resolved_horizon <= 0) return eps.end;
  double f = std::min(1.0, static_cast<double>(episode) / resolved_horizon);
  return eps.start + (eps.end - eps.start) * f;
}

std::vector<Experience> harvest_episode(const TreeRecord& rec, const MilpInstance& inst,
                                        const QNetwork& net,
                                        const std::shared_ptr<const std::vector<double>>& stat) {
  std::vector<Experience> experiences;
  const int64_t v_root = rec.total_nodes;
  for (const Decision& d : rec.decisions) {
    const NodeState& node = rec.nodes[d.node_id];
    Experience exp;
    exp.instance_id = inst.id;
    exp.static_features = stat;
    exp.dynamic_features = encode_dynamic(node, inst, node.incumbent_at_entry);
    exp.action = inst.binary_position(d.action);
    exp.target = rec.v[d.node_id];
    exp.v_root = v_root;
    exp.predicted = forward(net, *stat, exp.dynamic_features)[exp.action];
    experiences.push_back(std::move(exp));
  }
  return experiences;
}

}  // namespace

TrainResult train(const FamilyConfig& family, const TrainConfig& config) {
  {
    std::vector<std::string> problems = config.validate();
    if (!problems.empty()) throw std::invalid_argument("train config: " + problems.front());
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto wall_ms = [&t0]() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  // Pool generation and split; the split permutation has its own stream so
  // cross-validation folds stay independent of the family seed.
  const int pool_size = config.train_instances + config.test_instances;
  std::vector<MilpInstance> pool = generate_family(family, pool_size);
  std::vector<int> perm(pool.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng split_rng(derive_seed(config.seed, "split"));
  for (int i = static_cast<int>(perm.size()) - 1; i > 0; --i)
    std::swap(perm[i], perm[split_rng.uniform_int(0, i)]);
  std::vector<MilpInstance> train_set, test_set;
  for (int i = 0; i < config.train_instances; ++i) train_set.push_back(pool[perm[i]]);
  for (int i = config.train_instances; i < pool_size; ++i) test_set.push_back(pool[perm[i]]);

  PcaModel pca = fit_pca(train_set, config.pca_k, config.jobs);
  const int num_actions = static_cast<int>(train_set[0].binaries.size());
  QNetwork net = make_network(config.arch, pca.k, dynamic_length(num_actions), num_actions,
                              derive_seed(config.seed, "init"));

  RunMetrics metrics;
  {
    RandomPolicy random_pol(derive_seed(config.seed, "random-baseline"));
    MostFractionalPolicy mostfrac_pol;
    metrics.random_baseline_mean =
        evaluate(random_pol, test_set, config.node_limit, config.jobs).mean;
    metrics.mostfrac_baseline_mean =
        evaluate(mostfrac_pol, test_set, config.node_limit, config.jobs).mean;
    if (config.sb_baseline) {
      StrongBranchingPolicy sb_pol(true);
      metrics.sb_baseline_mean = evaluate(sb_pol, test_set, config.node_limit, config.jobs).mean;
    }
  }

  // One policy instance wraps the live network for the whole run; static
  // encodings cover train and test so evaluation reuses the cache.
  QNetPolicy policy(net, pca, pool);
  std::unordered_map<std::string, std::shared_ptr<const std::vector<double>>> static_store;
  for (const MilpInstance& inst : train_set)
    static_store.emplace(inst.id,
                         std::make_shared<const std::vector<double>>(encode_static(inst, pca)));

  ReplayBuffer buffer(config.buffer_capacity);
  AdamState adam;
  Rng draw_rng(derive_seed(config.seed, "draw"));
  Rng replay_rng(derive_seed(config.seed, "replay"));
  const int horizon =
      config.eps.horizon > 0
          ? config.eps.horizon
          : static_cast<int>(std::lround(0.6 * static_cast<double>(config.episodes)));

  int64_t window_limit_hits = 0;
  double window_loss_sum = 0.0;
  int64_t window_loss_count = 0;
  double window_train_nodes = 0.0;
  int64_t window_train_count = 0;

  auto emit_row = [&](int iteration, double eps_now) {
    EvalSummary test_eval = evaluate(policy, test_set, config.node_limit, config.jobs);
    MetricsRow row;
    row.iteration = iteration;
    row.mean_test_nodes = test_eval.mean;
    row.median_test_nodes = test_eval.median;
    row.mean_train_nodes =
        window_train_count > 0 ? window_train_nodes / window_train_count : 0.0;
    row.loss = window_loss_count > 0 ? window_loss_sum / window_loss_count : 0.0;
    row.epsilon = eps_now;
    row.limit_hits = window_limit_hits;
    row.wall_ms = wall_ms();
    metrics.rows.push_back(row);
    window_limit_hits = 0;
    window_loss_sum = 0.0;
    window_loss_count = 0;
    window_train_nodes = 0.0;
    window_train_count = 0;
  };

  emit_row(0, epsilon_at(config.eps, 0, horizon));

  for (int t = 0; t < config.episodes; ++t) {
    double eps_now = epsilon_at(config.eps, t, horizon);
    const MilpInstance& inst = train_set[draw_rng.uniform_int(0, config.train_instances - 1)];

    SolveConfig solve_cfg;
    solve_cfg.seed = derive_seed(config.seed, "episode", static_cast<uint64_t>(t));
    solve_cfg.epsilon = eps_now;
    solve_cfg.node_limit = config.node_limit;
    SolveResult episode = solve(inst, policy, solve_cfg);

    if (episode.truncated) {
      // Censored subtree sizes would corrupt the targets; drop the episode.
      ++window_limit_hits;
    } else {
      window_train_nodes += static_cast<double>(episode.record.total_nodes);
      ++window_train_count;
      buffer.push(harvest_episode(episode.record, inst, net, static_store.at(inst.id)));
    }

    if (!buffer.empty()) {
      for (int step = 0; step < config.steps_per_episode; ++step) {
        std::vector<ReplayBuffer::Sampled> sampled =
            buffer.sample(config.batch_size, SampleMode::prioritized, replay_rng);
        std::vector<BatchItem> batch;
        batch.reserve(sampled.size());
        for (const auto& s : sampled)
          batch.push_back({*s.exp->static_features, s.exp->dynamic_features, s.exp->action,
                           static_cast<double>(s.exp->target),
                           static_cast<double>(s.exp->v_root)});
        std::vector<double> grad;
        double loss = loss_and_grad(net, batch, grad);
        if (!std::isfinite(loss)) {
          if (!config.diagnostics_dir.empty())
            save_checkpoint({net, pca, nlohmann::json(config).dump()},
                            config.diagnostics_dir / "diverged_checkpoint.bin");
          throw TrainingDivergedError("train: non-finite loss at episode " + std::to_string(t));
        }
        try {
          adam_step(net, grad, adam, config.lr);
        } catch (const TrainingDivergedError&) {
          if (!config.diagnostics_dir.empty())
            save_checkpoint({net, pca, nlohmann::json(config).dump()},
                            config.diagnostics_dir / "diverged_checkpoint.bin");
          throw;
        }
        window_loss_sum += loss;
        ++window_loss_count;

        // Refresh sampled priorities under the stepped network.
        std::vector<uint64_t> ids;
        std::vector<double> preds;
        ids.reserve(sampled.size());
        preds.reserve(sampled.size());
        for (const auto& s : sampled) {
          ids.push_back(s.id);
          preds.push_back(
              forward(net, *s.exp->static_features, s.exp->dynamic_features)[s.exp->action]);
        }
        buffer.update_priorities(ids, preds);
      }
    }

    if ((t + 1) % config.eval_every == 0)
      emit_row(t + 1, epsilon_at(config.eps, t + 1, horizon));
  }

  TrainResult result;
  result.checkpoint = {std::move(net), std::move(pca), nlohmann::json(config).dump()};
  result.metrics = std::move(metrics);
  return result;
}

CvMetrics cross_validate(const FamilyConfig& family, const TrainConfig& config, int folds) {
  if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  CvMetrics cv;
  std::vector<RunMetrics> per_fold;
  for (int f = 0; f < folds; ++f) {
    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, "fold", static_cast<uint64_t>(f));
    try {
      per_fold.push_back(train(family, fold_config).metrics);
    } catch (const std::exception& e) {
      cv.fold_errors.push_back("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  cv.folds_completed = static_cast<int>(per_fold.size());
  if (per_fold.empty()) return cv;

  const size_t rows = per_fold[0].rows.size();
  for (size_t r = 0; r < rows; ++r) {
    CvRow row;
    row.iteration = per_fold[0].rows[r].iteration;
    std::vector<double> means;
    for (const RunMetrics& fold : per_fold) {
      means.push_back(fold.rows[r].mean_test_nodes);
      row.mean_loss += fold.rows[r].loss;
      row.mean_epsilon += fold.rows[r].epsilon;
    }
    row.mean_loss /= per_fold.size();
    row.mean_epsilon /= per_fold.size();
    double mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
    row.mean_test_nodes = mean;
    if (means.size() > 1) {
      double ss = 0.0;
      for (double v : means) ss += (v - mean) * (v - mean);
      double sd = std::sqrt(ss / (means.size() - 1));
      row.ci95_test_nodes = 1.96 * sd / std::sqrt(static_cast<double>(means.size()));
    }
    cv.rows.push_back(row);
  }
  for (const RunMetrics& fold : per_fold) {
    cv.random_baseline_mean += fold.random_baseline_mean / per_fold.size();
    cv.mostfrac_baseline_mean += fold.mostfrac_baseline_mean / per_fold.size();
    cv.sb_baseline_mean += fold.sb_baseline_mean / per_fold.size();
  }
  return cv;
}

void write_metrics_csv(const RunMetrics& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "iteration,mean_test_nodes,median_test_nodes,mean_train_nodes,loss,epsilon,"
         "limit_hits,wall_ms\n";
  for (const MetricsRow& row : metrics.rows) {
    out << row.iteration << ',' << format_double(row.mean_test_nodes) << ','
        << format_double(row.median_test_nodes) << ',' << format_double(row.mean_train_nodes)
        << ',' << format_double(row.loss) << ',' << format_double(row.epsilon) << ','
        << row.limit_hits << ',' << format_double(row.wall_ms) << '\n';
  }
}

void write_cv_csv(const CvMetrics& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "iteration,mean_test_nodes,ci95_test_nodes,loss,epsilon\n";
  for (const CvRow& row : metrics.rows) {
    out << row.iteration << ',' << format_double(row.mean_test_nodes) << ','
        << format_double(row.ci95_test_nodes) << ',' << format_double(row.mean_loss) << ','
        << format_double(row.mean_epsilon) << '\n';
  }
}

}  // namespace branchlab
