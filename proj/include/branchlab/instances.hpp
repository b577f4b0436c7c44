#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace branchlab {

// Binary MILP instance: min c'x s.t. Ax <= b, x_J in {0,1}, the rest
// continuous (boxed by the LP solver). Within one family the sparsity
// pattern of A, the dimensions and the binary set J are identical across
// instances; only the coefficient values fluctuate.
struct MilpInstance {
  std::string id;
  int num_vars = 0;
  int num_cons = 0;
  std::vector<double> a;  // row-major num_cons x num_vars
  std::vector<double> b;
  std::vector<double> c;
  std::vector<int> binaries;  // sorted, unique, indices into [0, num_vars)

  double at(int row, int col) const { return a[static_cast<size_t>(row) * num_vars + col]; }
  double& at(int row, int col) { return a[static_cast<size_t>(row) * num_vars + col]; }
  bool is_binary(int j) const;
  int binary_position(int j) const;  // index into `binaries`, -1 if absent
};

enum class FamilyKind { multi_knapsack, lot_sizing };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& s);

struct CoeffDist {
  double mean = 10.0;
  double spread = 3.0;
};

// Parameters of a synthetic instance family. The structural template
// (sparsity mask and per-entry base values) is drawn once from `seed`;
// individual instances jitter around the template by `fluctuation`.
struct FamilyConfig {
  FamilyKind kind = FamilyKind::multi_knapsack;
  int items = 8;      // knapsack: number of binary items
  int periods = 4;    // lot sizing: number of time periods
  int resources = 2;  // knapsack: number of capacity rows
  CoeffDist weight{10.0, 3.0};  // A entries (weights / demands)
  CoeffDist cost{5.0, 2.0};     // objective magnitudes
  double tightness = 0.5;       // capacity = tightness * row weight mass
  double fluctuation = 0.15;    // relative per-instance jitter
  double density = 1.0;         // probability an A entry is structurally nonzero
  double correlation = 0.5;     // knapsack value-weight correlation
  uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const FamilyConfig& config);
void from_json(const nlohmann::json& j, FamilyConfig& config);

// Deterministic in (config, count). Throws std::invalid_argument on configs
// with no binary variables and std::runtime_error if feasibility cannot be
// enforced within 100 resampling attempts for some instance.
std::vector<MilpInstance> generate_family(const FamilyConfig& config, int count);

// Total function: empty list iff every MilpInstance invariant holds.
std::vector<std::string> validate(const MilpInstance& instance);

// JSON archive holding a family config plus its instances. Reals use
// shortest round-trippable decimals, so load(save(x)) == x bit-exactly.
void save_instances(const FamilyConfig& config, const std::vector<MilpInstance>& instances,
                    const std::filesystem::path& path);

struct InstanceArchive {
  FamilyConfig config;
  std::vector<MilpInstance> instances;
};

InstanceArchive load_instances(const std::filesystem::path& path);

}  // namespace branchlab
