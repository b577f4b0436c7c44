#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "branchlab/features.hpp"

namespace branchlab {

enum class Arch { dense, dueling_add, dueling_mul };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& s);

// Q-value regressor mapping a state encoding to |J| action values.
//   dense:       MLP over [static; dynamic], linear output.
//   dueling_add: Q = u + v with scalar u from a static-only block.
//   dueling_mul: Q = u * v elementwise (the multiplicative head); u keeps a
//                linear activation so the product can span target scales.
// Parameters live in one flat vector; gradients are hand-derived.
struct QNetwork {
  Arch arch = Arch::dense;
  int static_dim = 0;
  int dyn_dim = 0;
  int num_actions = 0;
  int joint_hidden = 64;
  int static_hidden = 32;
  std::vector<double> theta;

  int input_dim() const { return static_dim + dyn_dim; }
  size_t param_count() const { return theta.size(); }
};

// Kaiming-style uniform fan-in init; the dueling_mul static head's output
// bias starts at 1 so the product path is non-degenerate.
QNetwork make_network(Arch arch, int static_dim, int dyn_dim, int num_actions, uint64_t seed);

std::vector<double> forward(const QNetwork& net, std::span<const double> stat,
                            std::span<const double> dyn);

// argmin of forward() restricted to mask-true actions, lowest index on
// ties. Throws if the mask is all-false.
int select_action(const QNetwork& net, std::span<const double> stat, std::span<const double> dyn,
                  const std::vector<uint8_t>& mask);

struct BatchItem {
  std::span<const double> stat;
  std::span<const double> dyn;
  int action = 0;
  double target = 0.0;  // observed subtree size
  double v_root = 1.0;  // episode tree size; loss weight is 1/v_root
};

// loss = mean_i (1/v_root_i) * (target_i - Q(s_i, a_i))^2, gradient w.r.t.
// theta accumulated into `grad` (resized and zeroed internally).
double loss_and_grad(const QNetwork& net, const std::vector<BatchItem>& batch,
                     std::vector<double>& grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t t = 0;
};

// Adam with beta1=0.9, beta2=0.999, eps=1e-8. Throws TrainingDivergedError
// on non-finite gradient entries.
void adam_step(QNetwork& net, const std::vector<double>& grad, AdamState& state, double lr);

struct Checkpoint {
  QNetwork net;
  PcaModel pca;
  std::string config_json;  // echo of the training config
};

// Versioned little-endian binary container; theta round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace branchlab
