#include "branchlab/instances.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "branchlab/rng.hpp"
#include "json.hpp"

namespace branchlab {

bool MilpInstance::is_binary(int j) const {
  return std::binary_search(binaries.begin(), binaries.end(), j);
}

int MilpInstance::binary_position(int j) const {
  auto it = std::lower_bound(binaries.begin(), binaries.end(), j);
  if (it == binaries.end() || *it != j) return -1;
  return static_cast<int>(it - binaries.begin());
}

std::string to_string(FamilyKind kind) {
  return kind == FamilyKind::multi_knapsack ? "multi_knapsack" : "lot_sizing";
}

FamilyKind family_kind_from_string(const std::string& s) {
  if (s == "multi_knapsack") return FamilyKind::multi_knapsack;
  if (s == "lot_sizing") return FamilyKind::lot_sizing;
  throw std::invalid_argument("unknown family kind: " + s);
}

namespace {

double positive_trunc(Rng& rng, double mean, double spread) {
  double lo = std::max(0.05 * mean, 1e-3);
  return rng.trunc_normal(mean, spread, lo, mean + 4.0 * spread);
}

// Per-instance multiplicative jitter around a family base value.
double jitter(Rng& rng, double base, double fluctuation) {
  if (fluctuation <= 0.0) return base;
  return base * rng.trunc_normal(1.0, fluctuation, 0.25, 1.75);
}

struct KnapsackTemplate {
  std::vector<uint8_t> mask;     // resources x items
  std::vector<double> weights;   // base values where mask is set
  std::vector<double> values;    // base item values
};

KnapsackTemplate knapsack_template(const FamilyConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "family"));
  int r = cfg.resources, n = cfg.items;
  KnapsackTemplate t;
  t.mask.assign(static_cast<size_t>(r) * n, 0);
  t.weights.assign(static_cast<size_t>(r) * n, 0.0);
  for (int i = 0; i < r; ++i) {
    int active = 0;
    for (int j = 0; j < n; ++j) {
      bool on = cfg.density >= 1.0 || rng.next_double() < cfg.density;
      t.mask[static_cast<size_t>(i) * n + j] = on ? 1 : 0;
      active += on;
    }
    if (active == 0) t.mask[static_cast<size_t>(i) * n + rng.uniform_int(0, n - 1)] = 1;
    for (int j = 0; j < n; ++j)
      if (t.mask[static_cast<size_t>(i) * n + j])
        t.weights[static_cast<size_t>(i) * n + j] =
            positive_trunc(rng, cfg.weight.mean, cfg.weight.spread);
  }
  t.values.resize(n);
  for (int j = 0; j < n; ++j) {
    double mass = 0.0;
    int rows = 0;
    for (int i = 0; i < r; ++i)
      if (t.mask[static_cast<size_t>(i) * n + j]) {
        mass += t.weights[static_cast<size_t>(i) * n + j];
        ++rows;
      }
    double mean_w = rows > 0 ? mass / rows : cfg.weight.mean;
    double indep = positive_trunc(rng, cfg.cost.mean, cfg.cost.spread);
    // Correlated values make capacity binding decisions non-trivial.
    t.values[j] = cfg.correlation * (cfg.cost.mean / cfg.weight.mean) * mean_w +
                  (1.0 - cfg.correlation) * indep;
  }
  return t;
}

MilpInstance make_knapsack(const FamilyConfig& cfg, const KnapsackTemplate& t, int index) {
  Rng rng(derive_seed(cfg.seed, "instance", static_cast<uint64_t>(index)));
  int r = cfg.resources, n = cfg.items;
  MilpInstance inst;
  inst.num_vars = n;
  inst.num_cons = r;
  inst.a.assign(static_cast<size_t>(r) * n, 0.0);
  inst.b.resize(r);
  inst.c.resize(n);
  inst.binaries.resize(n);
  for (int j = 0; j < n; ++j) inst.binaries[j] = j;
  for (int i = 0; i < r; ++i) {
    double row_mass = 0.0;
    for (int j = 0; j < n; ++j) {
      size_t idx = static_cast<size_t>(i) * n + j;
      if (!t.mask[idx]) continue;
      inst.a[idx] = jitter(rng, t.weights[idx], cfg.fluctuation * 0.3);
      row_mass += inst.a[idx];
    }
    inst.b[i] = cfg.tightness * row_mass;
  }
  for (int j = 0; j < n; ++j) inst.c[j] = -jitter(rng, t.values[j], cfg.fluctuation);
  return inst;
}

struct LotSizingTemplate {
  std::vector<double> demand, capacity, setup_cost, prod_cost, unmet_cost;
};

LotSizingTemplate lot_sizing_template(const FamilyConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "family"));
  int periods = cfg.periods;
  LotSizingTemplate t;
  t.demand.resize(periods);
  t.capacity.resize(periods);
  t.setup_cost.resize(periods);
  t.prod_cost.resize(periods);
  t.unmet_cost.resize(periods);
  for (int p = 0; p < periods; ++p) {
    t.demand[p] = positive_trunc(rng, cfg.weight.mean, cfg.weight.spread);
    t.capacity[p] = t.demand[p] / std::max(cfg.tightness, 0.05) +
                    positive_trunc(rng, cfg.weight.mean, cfg.weight.spread);
    t.setup_cost[p] = positive_trunc(rng, cfg.cost.mean, cfg.cost.spread);
    t.prod_cost[p] = positive_trunc(rng, cfg.cost.mean * 0.1, cfg.cost.spread * 0.1);
    t.unmet_cost[p] = positive_trunc(rng, cfg.cost.mean * 10.0, cfg.cost.spread);
  }
  return t;
}

// Variables: [y_0..y_{T-1} setup binaries][x_0..x_{T-1} production]
// [u_0..u_{T-1} unmet demand]. Rows: capacity links x_t <= cap_t * y_t,
// then cumulative demand cover sum_{tau<=t} x_tau + u_t >= D_t. The unmet
// slack keeps the all-zero setup plan feasible.
MilpInstance make_lot_sizing(const FamilyConfig& cfg, const LotSizingTemplate& t, int index) {
  Rng rng(derive_seed(cfg.seed, "instance", static_cast<uint64_t>(index)));
  int periods = cfg.periods;
  int n = 3 * periods, m = 2 * periods;
  MilpInstance inst;
  inst.num_vars = n;
  inst.num_cons = m;
  inst.a.assign(static_cast<size_t>(m) * n, 0.0);
  inst.b.assign(m, 0.0);
  inst.c.assign(n, 0.0);
  inst.binaries.resize(periods);
  for (int p = 0; p < periods; ++p) inst.binaries[p] = p;

  std::vector<double> demand(periods);
  for (int p = 0; p < periods; ++p) demand[p] = jitter(rng, t.demand[p], cfg.fluctuation);
  double cum = 0.0;
  for (int p = 0; p < periods; ++p) {
    double cap = jitter(rng, t.capacity[p], cfg.fluctuation * 0.5);
    inst.at(p, p) = -cap;           // -cap * y_p
    inst.at(p, periods + p) = 1.0;  // + x_p <= 0
    cum += demand[p];
    for (int tau = 0; tau <= p; ++tau) inst.at(periods + p, periods + tau) = -1.0;
    inst.at(periods + p, 2 * periods + p) = -1.0;
    inst.b[periods + p] = -cum;
    inst.c[p] = jitter(rng, t.setup_cost[p], cfg.fluctuation);
    inst.c[periods + p] = jitter(rng, t.prod_cost[p], cfg.fluctuation);
    inst.c[2 * periods + p] = jitter(rng, t.unmet_cost[p], cfg.fluctuation);
  }
  return inst;
}

}  // namespace

std::vector<MilpInstance> generate_family(const FamilyConfig& config, int count) {
  if (count < 1) throw std::invalid_argument("generate_family: count must be >= 1");
  int num_binaries =
      config.kind == FamilyKind::multi_knapsack ? config.items : config.periods;
  if (num_binaries < 1)
    throw std::invalid_argument("generate_family: config yields no binary variables");
  if (config.kind == FamilyKind::multi_knapsack && config.resources < 1)
    throw std::invalid_argument("generate_family: multi_knapsack needs >= 1 resource");

  std::vector<MilpInstance> out;
  out.reserve(static_cast<size_t>(count));
  KnapsackTemplate kt;
  LotSizingTemplate lt;
  if (config.kind == FamilyKind::multi_knapsack) kt = knapsack_template(config);
  else lt = lot_sizing_template(config);

  for (int i = 0; i < count; ++i) {
    MilpInstance inst;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      int draw = i + attempt * count;  // resamples shift to a fresh sub-stream
      inst = config.kind == FamilyKind::multi_knapsack ? make_knapsack(config, kt, draw)
                                                       : make_lot_sizing(config, lt, draw);
      // Feasibility of the all-zero binary point after eliminating the
      // continuous part: knapsack needs b >= 0, lot sizing is feasible by
      // slack construction, so only validation can reject it.
      ok = validate(inst).empty();
      if (config.kind == FamilyKind::multi_knapsack)
        for (double bi : inst.b) ok = ok && bi >= 0.0;
    }
    if (!ok)
      throw std::runtime_error("generate_family: resampling exhausted after 100 attempts for instance " +
                               std::to_string(i));
    inst.id = to_string(config.kind) + "-" + std::to_string(config.seed) + "-" + std::to_string(i);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<std::string> validate(const MilpInstance& inst) {
  std::vector<std::string> violations;
  if (inst.num_vars <= 0) violations.push_back("num_vars must be positive");
  if (inst.num_cons < 0) violations.push_back("num_cons must be nonnegative");
  if (inst.binaries.empty()) violations.push_back("binary set is empty");
  if (!std::is_sorted(inst.binaries.begin(), inst.binaries.end()))
    violations.push_back("binary indices not sorted");
  if (std::adjacent_find(inst.binaries.begin(), inst.binaries.end()) != inst.binaries.end())
    violations.push_back("duplicate binary index");
  for (int j : inst.binaries)
    if (j < 0 || j >= inst.num_vars) {
      violations.push_back("binary index out of range");
      break;
    }
  if (inst.a.size() != static_cast<size_t>(inst.num_cons) * inst.num_vars)
    violations.push_back("A has wrong dimensions");
  if (inst.b.size() != static_cast<size_t>(inst.num_cons)) violations.push_back("b has wrong length");
  if (inst.c.size() != static_cast<size_t>(inst.num_vars)) violations.push_back("c has wrong length");
  for (double v : inst.a)
    if (!std::isfinite(v)) {
      violations.push_back("non-finite constraint coefficient");
      break;
    }
  for (double v : inst.b)
    if (!std::isfinite(v)) {
      violations.push_back("non-finite right-hand side");
      break;
    }
  for (double v : inst.c)
    if (!std::isfinite(v)) {
      violations.push_back("non-finite objective coefficient");
      break;
    }
  return violations;
}

void to_json(nlohmann::json& j, const FamilyConfig& cfg) {
  j = nlohmann::json{{"kind", to_string(cfg.kind)},
                     {"items", cfg.items},
                     {"periods", cfg.periods},
                     {"resources", cfg.resources},
                     {"weight", {{"mean", cfg.weight.mean}, {"spread", cfg.weight.spread}}},
                     {"cost", {{"mean", cfg.cost.mean}, {"spread", cfg.cost.spread}}},
                     {"tightness", cfg.tightness},
                     {"fluctuation", cfg.fluctuation},
                     {"density", cfg.density},
                     {"correlation", cfg.correlation},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, FamilyConfig& cfg) {
  cfg.kind = family_kind_from_string(j.at("kind").get<std::string>());
  cfg.items = j.at("items").get<int>();
  cfg.periods = j.at("periods").get<int>();
  cfg.resources = j.at("resources").get<int>();
  cfg.weight = {j.at("weight").at("mean").get<double>(), j.at("weight").at("spread").get<double>()};
  cfg.cost = {j.at("cost").at("mean").get<double>(), j.at("cost").at("spread").get<double>()};
  cfg.tightness = j.at("tightness").get<double>();
  cfg.fluctuation = j.at("fluctuation").get<double>();
  cfg.density = j.at("density").get<double>();
  cfg.correlation = j.at("correlation").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
}

void save_instances(const FamilyConfig& config, const std::vector<MilpInstance>& instances,
                    const std::filesystem::path& path) {
  nlohmann::json root;
  root["family"] = config;
  nlohmann::json list = nlohmann::json::array();
  for (const MilpInstance& inst : instances) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < inst.num_cons; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < inst.num_vars; ++j) row.push_back(inst.at(i, j));
      rows.push_back(std::move(row));
    }
    list.push_back(nlohmann::json{{"id", inst.id},
                                  {"m", inst.num_cons},
                                  {"n", inst.num_vars},
                                  {"J", inst.binaries},
                                  {"A", std::move(rows)},
                                  {"b", inst.b},
                                  {"c", inst.c}});
  }
  root["instances"] = std::move(list);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << root.dump(1) << "\n";
}

InstanceArchive load_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open archive: " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("archive parse error in " + path.string() + ": " + e.what());
  }
  InstanceArchive archive;
  try {
    archive.config = root.at("family").get<FamilyConfig>();
    for (const nlohmann::json& j : root.at("instances")) {
      MilpInstance inst;
      inst.id = j.at("id").get<std::string>();
      inst.num_cons = j.at("m").get<int>();
      inst.num_vars = j.at("n").get<int>();
      inst.binaries = j.at("J").get<std::vector<int>>();
      const nlohmann::json& rows = j.at("A");
      if (static_cast<int>(rows.size()) != inst.num_cons)
        throw std::invalid_argument("instance " + inst.id + ": A has " + std::to_string(rows.size()) +
                                 " rows, expected m=" + std::to_string(inst.num_cons));
      inst.a.reserve(static_cast<size_t>(inst.num_cons) * inst.num_vars);
      for (const nlohmann::json& row : rows) {
        if (static_cast<int>(row.size()) != inst.num_vars)
          throw std::invalid_argument("instance " + inst.id + ": A row has " +
                                   std::to_string(row.size()) +
                                   " entries, expected n=" + std::to_string(inst.num_vars));
        for (const nlohmann::json& v : row) inst.a.push_back(v.get<double>());
      }
      inst.b = j.at("b").get<std::vector<double>>();
      inst.c = j.at("c").get<std::vector<double>>();
      std::vector<std::string> violations = validate(inst);
      if (!violations.empty())
        throw std::invalid_argument("instance " + inst.id + " invalid: " + violations.front());
      archive.instances.push_back(std::move(inst));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("archive field error in " + path.string() + ": " + e.what());
  }
  return archive;
}

}  // namespace branchlab
