#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "branchlab/common.hpp"
#include "branchlab/oracle.hpp"
#include "branchlab/report.hpp"
#include "branchlab/rng.hpp"
#include "branchlab/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace branchlab;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitOracleCap = 4;

bool g_quiet = false;

void say(const std::string& line) {
  if (!g_quiet) std::cout << line << "\n";
}

void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& body) {
  nlohmann::json manifest = body;
  manifest["command"] = command;
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(1) << "\n";
}

// Optional JSON config file mirroring the flags; explicit flags win because
// the file is applied as defaults before parsing.
nlohmann::json load_config_file(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw std::invalid_argument(std::string("cannot open config file: ") + argv[i + 1]);
      return nlohmann::json::parse(in);
    }
  return nlohmann::json::object();
}

FamilyKind parse_family(const std::string& name) {
  if (name == "knapsack" || name == "multi_knapsack") return FamilyKind::multi_knapsack;
  if (name == "lotsizing" || name == "lot_sizing") return FamilyKind::lot_sizing;
  throw std::invalid_argument("unknown family: " + name);
}

struct PolicyBox {
  std::unique_ptr<BranchingPolicy> owned;
  std::unique_ptr<QNetPolicy> learned;
  std::optional<Checkpoint> checkpoint;

  const BranchingPolicy& get() const { return learned ? *learned : *owned; }
};

PolicyBox make_policy(const std::string& name, uint64_t seed, const std::string& checkpoint_path,
                      const std::vector<MilpInstance>& instances) {
  PolicyBox box;
  if (name == "mostfrac") {
    box.owned = most_fractional_policy();
  } else if (name == "random") {
    box.owned = random_policy(derive_seed(seed, "random-policy"));
  } else if (name == "sb") {
    box.owned = strong_branching_policy(true);
  } else if (name == "learned") {
    if (checkpoint_path.empty())
      throw std::invalid_argument("--policy learned requires --checkpoint");
    box.checkpoint = load_checkpoint(checkpoint_path);
    if (!instances.empty()) {
      if (static_cast<int>(instances[0].binaries.size()) != box.checkpoint->net.num_actions)
        throw std::invalid_argument(
            "checkpoint action width does not match the instance family");
      if (static_cast<int>(flatten_instance(instances[0]).size()) != box.checkpoint->pca.d)
        throw std::invalid_argument("checkpoint PCA dimension does not match the family");
    }
    box.learned =
        std::make_unique<QNetPolicy>(box.checkpoint->net, box.checkpoint->pca, instances);
  } else {
    throw std::invalid_argument("unknown policy: " + name);
  }
  return box;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"branchlab: learned branch-and-bound variable selection laboratory"};
  app.require_subcommand(1);

  uint64_t seed = 1;
  std::string config_path, out_dir = "runs/out";
  app.add_option("--seed", seed, "global random seed");
  app.add_option("--config", config_path, "JSON config file mirroring the flags");
  app.add_flag("--quiet", g_quiet, "suppress progress output");

  nlohmann::json file_config;
  try {
    file_config = load_config_file(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  FamilyConfig family;
  if (file_config.contains("family")) {
    try {
      family = file_config["family"].get<FamilyConfig>();
    } catch (const std::exception& e) {
      std::cerr << "error: bad family config: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  TrainConfig tc;
  if (file_config.contains("train")) {
    try {
      tc = file_config["train"].get<TrainConfig>();
    } catch (const std::exception& e) {
      std::cerr << "error: bad train config: " << e.what() << "\n";
      return kExitUsage;
    }
  }

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic instance family archive");
  std::string gen_family = "knapsack";
  int gen_count = 10;
  gen->add_option("--family", gen_family, "knapsack | lotsizing");
  gen->add_option("--count", gen_count, "number of instances");
  gen->add_option("--items", family.items, "knapsack items (binaries)");
  gen->add_option("--periods", family.periods, "lot-sizing periods (binaries)");
  gen->add_option("--resources", family.resources, "knapsack capacity rows");
  gen->add_option("--tightness", family.tightness, "capacity tightness ratio");
  gen->add_option("--fluctuation", family.fluctuation, "per-instance jitter");
  gen->add_option("--density", family.density, "A-entry density");
  gen->add_option("--correlation", family.correlation, "value-weight correlation");
  gen->add_option("--weight-mean", family.weight.mean, "weight distribution mean");
  gen->add_option("--weight-spread", family.weight.spread, "weight distribution spread");
  gen->add_option("--cost-mean", family.cost.mean, "cost distribution mean");
  gen->add_option("--cost-spread", family.cost.spread, "cost distribution spread");
  gen->add_option("--out", out_dir, "output directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a branching policy on an archive");
  std::string train_instances_path, train_arch = "mda";
  int folds = 1;
  train_cmd->add_option("--instances", train_instances_path, "instance archive")->required();
  train_cmd->add_option("--arch", train_arch, "dense | dueling | mda");
  train_cmd->add_option("--episodes", tc.episodes, "training episodes");
  train_cmd->add_option("--lr", tc.lr, "learning rate");
  train_cmd->add_option("--batch-size", tc.batch_size, "minibatch size");
  train_cmd->add_option("--steps-per-episode", tc.steps_per_episode, "gradient steps per episode");
  train_cmd->add_option("--pca-k", tc.pca_k, "static PCA components");
  train_cmd->add_option("--node-limit", tc.node_limit, "per-episode node budget");
  train_cmd->add_option("--train-instances", tc.train_instances, "training split size");
  train_cmd->add_option("--test-instances", tc.test_instances, "held-out split size");
  train_cmd->add_option("--eval-every", tc.eval_every, "episodes between evaluations");
  train_cmd->add_option("--eps-start", tc.eps.start, "initial exploration rate");
  train_cmd->add_option("--eps-end", tc.eps.end, "final exploration rate");
  train_cmd->add_option("--eps-horizon", tc.eps.horizon,
                        "linear decay horizon in episodes (0 = 60% of episodes)");
  train_cmd->add_option("--folds", folds, "cross-validation folds (1 = single run)");
  train_cmd->add_option("--jobs", tc.jobs, "evaluation workers (0 = all cores)");
  bool no_sb = false;
  train_cmd->add_flag("--no-sb-baseline", no_sb, "skip the strong-branching baseline");
  train_cmd->add_option("--out", out_dir, "output directory");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against baselines");
  std::string eval_checkpoint, eval_instances_path, eval_baselines = "random,mostfrac,sb";
  int64_t eval_node_limit = 50000;
  int eval_jobs = 0;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--instances", eval_instances_path, "instance archive")->required();
  eval_cmd->add_option("--baselines", eval_baselines, "comma list: random,mostfrac,sb");
  eval_cmd->add_option("--node-limit", eval_node_limit, "per-solve node budget");
  eval_cmd->add_option("--jobs", eval_jobs, "parallel workers (0 = all cores)");
  eval_cmd->add_option("--out", out_dir, "output directory");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "solve one archived instance");
  std::string solve_instances_path, solve_policy = "mostfrac", solve_checkpoint;
  int solve_index = 0;
  int64_t solve_node_limit = 50000;
  bool solve_dump = false;
  solve_cmd->add_option("--instances", solve_instances_path, "instance archive")->required();
  solve_cmd->add_option("--index", solve_index, "instance index in the archive");
  solve_cmd->add_option("--policy", solve_policy, "mostfrac | random | sb | learned");
  solve_cmd->add_option("--checkpoint", solve_checkpoint, "checkpoint for --policy learned");
  solve_cmd->add_option("--node-limit", solve_node_limit, "node budget");
  solve_cmd->add_flag("--dump", solve_dump, "print decisions and export the tree JSON");
  solve_cmd->add_option("--out", out_dir, "output directory");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "exhaustive ground-truth checks");
  std::string oracle_instances_path, oracle_mode = "min-tree";
  int oracle_index = 0;
  oracle_cmd->add_option("--instances", oracle_instances_path, "instance archive")->required();
  oracle_cmd->add_option("--index", oracle_index, "instance index");
  oracle_cmd->add_option("--mode", oracle_mode, "min-tree | verify-prop2 | brute-opt");
  oracle_cmd->add_option("--out", out_dir, "output directory");

  // report
  auto* report_cmd = app.add_subcommand("report", "render learning curves as SVG");
  std::vector<std::string> report_metrics;
  std::string report_out = "report.svg";
  report_cmd->add_option("--metrics", report_metrics, "metrics CSV files")->required();
  report_cmd->add_option("--out", report_out, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  // Config-file seeds survive unless --seed was given explicitly.
  if (app.count("--seed") > 0 || !file_config.contains("train")) tc.seed = seed;
  if (app.count("--seed") > 0 || !file_config.contains("family")) family.seed = seed;

  try {
    if (*gen) {
      family.kind = parse_family(gen_family);
      if (gen_count < 1) throw std::invalid_argument("--count must be >= 1");
      std::vector<MilpInstance> instances = generate_family(family, gen_count);
      fs::create_directories(out_dir);
      fs::path archive = fs::path(out_dir) / "instances.json";
      save_instances(family, instances, archive);
      write_manifest(out_dir, "gen",
                     {{"family", family}, {"count", gen_count}, {"seed", seed}});
      const MilpInstance& first = instances[0];
      say("wrote " + archive.string());
      say("structure: m=" + std::to_string(first.num_cons) + " n=" +
          std::to_string(first.num_vars) + " |J|=" + std::to_string(first.binaries.size()) +
          " instances=" + std::to_string(instances.size()));
    } else if (*train_cmd) {
      tc.arch = arch_from_string(train_arch);
      tc.sb_baseline = !no_sb;
      InstanceArchive archive = load_instances(train_instances_path);
      if (static_cast<int>(archive.instances.size()) < tc.train_instances + tc.test_instances)
        throw std::invalid_argument(
            "archive holds " + std::to_string(archive.instances.size()) +
            " instances; need train+test = " +
            std::to_string(tc.train_instances + tc.test_instances));
      fs::create_directories(out_dir);
      tc.diagnostics_dir = out_dir;
      write_manifest(out_dir, "train",
                     {{"family", archive.config}, {"train", tc}, {"folds", folds},
                      {"instances", train_instances_path}, {"seed", seed}});
      if (folds > 1) {
        CvMetrics cv = cross_validate(archive.config, tc, folds);
        write_cv_csv(cv, fs::path(out_dir) / "metrics.csv");
        say("cross-validated " + std::to_string(cv.folds_completed) + "/" +
            std::to_string(folds) + " folds; metrics in " +
            (fs::path(out_dir) / "metrics.csv").string());
        for (const std::string& err : cv.fold_errors) say("fold failure: " + err);
      } else {
        TrainResult result = train(archive.config, tc);
        save_checkpoint(result.checkpoint, fs::path(out_dir) / "checkpoint.bin");
        write_metrics_csv(result.metrics, fs::path(out_dir) / "metrics.csv");
        nlohmann::json baselines{{"random", result.metrics.random_baseline_mean},
                                 {"mostfrac", result.metrics.mostfrac_baseline_mean}};
        if (tc.sb_baseline) baselines["sb"] = result.metrics.sb_baseline_mean;
        std::ofstream bl(fs::path(out_dir) / "baselines.json");
        bl << baselines.dump(1) << "\n";
        const MetricsRow& last = result.metrics.rows.back();
        say("final mean test tree size: " + format_double(last.mean_test_nodes));
        say("baselines: random=" + format_double(result.metrics.random_baseline_mean) +
            " mostfrac=" + format_double(result.metrics.mostfrac_baseline_mean) +
            (tc.sb_baseline ? " sb=" + format_double(result.metrics.sb_baseline_mean) : ""));
        say("wrote checkpoint.bin, metrics.csv, baselines.json, manifest.json in " + out_dir);
      }
    } else if (*eval_cmd) {
      InstanceArchive archive = load_instances(eval_instances_path);
      PolicyBox learned = make_policy("learned", seed, eval_checkpoint, archive.instances);
      fs::create_directories(out_dir);
      write_manifest(out_dir, "eval",
                     {{"checkpoint", eval_checkpoint}, {"instances", eval_instances_path},
                      {"baselines", eval_baselines}, {"node_limit", eval_node_limit},
                      {"seed", seed}});
      std::ofstream csv(fs::path(out_dir) / "eval.csv");
      csv << "policy,mean_nodes,median_nodes,limit_hits\n";
      auto report_policy = [&](const std::string& name, const BranchingPolicy& pol) {
        EvalSummary s = evaluate(pol, archive.instances, eval_node_limit, eval_jobs);
        say(name + ": mean=" + format_double(s.mean) + " median=" + format_double(s.median) +
            " limit_hits=" + std::to_string(s.limit_hits.size()));
        csv << name << ',' << format_double(s.mean) << ',' << format_double(s.median) << ','
            << s.limit_hits.size() << '\n';
      };
      report_policy("learned", learned.get());
      std::stringstream names(eval_baselines);
      std::string name;
      while (std::getline(names, name, ',')) {
        if (name.empty()) continue;
        PolicyBox base = make_policy(name, seed, "", archive.instances);
        report_policy(name, base.get());
      }
      say("wrote eval.csv in " + out_dir);
    } else if (*solve_cmd) {
      InstanceArchive archive = load_instances(solve_instances_path);
      if (solve_index < 0 || solve_index >= static_cast<int>(archive.instances.size()))
        throw std::invalid_argument("--index out of range (archive has " +
                                    std::to_string(archive.instances.size()) + " instances)");
      const MilpInstance& inst = archive.instances[solve_index];
      PolicyBox box = make_policy(solve_policy, seed, solve_checkpoint, archive.instances);
      SolveConfig cfg;
      cfg.seed = derive_seed(seed, "solve");
      cfg.node_limit = solve_node_limit;
      SolveResult res = solve(inst, box.get(), cfg);
      fs::create_directories(out_dir);
      write_manifest(out_dir, "solve",
                     {{"instances", solve_instances_path}, {"index", solve_index},
                      {"policy", solve_policy}, {"node_limit", solve_node_limit},
                      {"seed", seed}});
      if (res.truncated) {
        say("node limit hit after " + std::to_string(res.record.expansion_order.size()) +
            " expansions");
      } else {
        say("tree size: " + std::to_string(res.record.total_nodes));
        say(res.record.incumbent ? "optimum: " + format_double(*res.record.incumbent)
                                 : "instance infeasible");
        if (solve_dump) {
          for (const Decision& d : res.record.decisions)
            say("node " + std::to_string(d.node_id) + ": branch on x" +
                std::to_string(d.action) + (d.was_random ? " (random)" : ""));
          fs::path tree = fs::path(out_dir) / "tree.json";
          export_tree(res.record, tree);
          say("wrote " + tree.string());
        }
      }
    } else if (*oracle_cmd) {
      InstanceArchive archive = load_instances(oracle_instances_path);
      if (oracle_index < 0 || oracle_index >= static_cast<int>(archive.instances.size()))
        throw std::invalid_argument("--index out of range (archive has " +
                                    std::to_string(archive.instances.size()) + " instances)");
      const MilpInstance& inst = archive.instances[oracle_index];
      fs::create_directories(out_dir);
      write_manifest(out_dir, "oracle",
                     {{"instances", oracle_instances_path}, {"index", oracle_index},
                      {"mode", oracle_mode}, {"seed", seed}});
      if (oracle_mode == "min-tree") {
        OracleResult r = min_tree_size(inst, {}, std::nullopt, ChildOrder::engine_rule);
        say("min tree size: " + std::to_string(r.min_tree_size));
        say(r.milp_optimum ? "milp optimum: " + format_double(*r.milp_optimum)
                           : "instance infeasible");
        std::string acts;
        for (int a : r.optimal_first_actions) acts += " x" + std::to_string(a);
        say("optimal first actions:" + (acts.empty() ? " (root is a leaf)" : acts));
        say("oracle nodes explored: " + std::to_string(r.nodes_explored));
      } else if (oracle_mode == "verify-prop2") {
        Prop2Report r = verify_prop2(inst);
        say("greedy per-node minimal subtree size: " + std::to_string(r.greedy_size));
        say("global minimum over complete DFS policies: " + std::to_string(r.global_min_size));
        say(r.equal ? "EQUAL: local minimization achieves the global optimum"
                    : "MISMATCH: implementation bug (this equality is provable)");
      } else if (oracle_mode == "brute-opt") {
        BruteForceResult r = brute_force_optimum(inst);
        if (!r.feasible) {
          say("no feasible binary assignment");
        } else {
          say("brute-force optimum: " + format_double(r.objective));
          std::string bits;
          for (int v : r.assignment) bits += std::to_string(v);
          say("assignment (J order): " + bits);
        }
      } else {
        throw std::invalid_argument("unknown oracle mode: " + oracle_mode);
      }
    } else if (*report_cmd) {
      std::vector<MetricsTable> tables;
      for (const std::string& file : report_metrics) tables.push_back(read_metrics_csv(file));
      fs::path svg = report_out;
      if (!svg.parent_path().empty()) fs::create_directories(svg.parent_path());
      auto sibling = [&svg](const std::string& suffix) {
        fs::path p = svg.parent_path() / (svg.stem().string() + suffix);
        return p;
      };
      fs::path merged = sibling("_merged.csv");
      render_report(tables, svg, merged);
      nlohmann::json manifest{{"command", "report"}, {"metrics", report_metrics},
                              {"out", report_out}};
      std::ofstream mf(sibling(".manifest.json"));
      mf << manifest.dump(1) << "\n";
      say("wrote " + svg.string() + " and " + merged.string());
    }
  } catch (const OracleCapError& e) {
    std::cerr << "oracle cap exceeded: " << e.what() << "\n";
    return kExitOracleCap;
  } catch (const TrainingDivergedError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
