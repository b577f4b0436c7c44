#pragma once

#include <optional>
#include <string>
#include <vector>

#include "branchlab/bnb.hpp"
#include "branchlab/instances.hpp"

namespace branchlab {

// PCA over flattened (A, b, c) vectors of a family. Rows of `components`
// are orthonormal principal directions, sign-fixed so each row's
// largest-magnitude entry is positive.
struct PcaModel {
  int d = 0;  // m*n + m + n
  int k = 0;
  std::vector<double> mean;        // length d
  std::vector<double> components;  // row-major k x d
  std::string warning;             // set when k was reduced to the data rank

  const double* component(int i) const { return components.data() + static_cast<size_t>(i) * d; }
};

std::vector<double> flatten_instance(const MilpInstance& instance);

// Top-k principal directions of the centered flattened data. Uses the Gram
// matrix when fewer samples than dimensions. `jobs` controls the OpenMP
// team for the scatter-matrix build (0 = runtime default, 1 = serial);
// results are bit-identical across team sizes.
PcaModel fit_pca(const std::vector<MilpInstance>& instances, int k, int jobs = 1);

// components * (flatten(instance) - mean)
std::vector<double> encode_static(const MilpInstance& instance, const PcaModel& pca);

// [depth/|J|; per-binary min(x_j, 1-x_j) clamped to [0, 0.5];
//  clamp((incumbent - bound)/(1 + |incumbent|), 0, 1) or 1 without an
//  incumbent; one-hot branching state B of length 3|J|]
std::vector<double> encode_dynamic(const NodeState& node, const MilpInstance& instance,
                                   std::optional<double> incumbent);

inline int dynamic_length(int num_binaries) { return 2 + 4 * num_binaries; }

}  // namespace branchlab
