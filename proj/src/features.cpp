#include "branchlab/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "branchlab/common.hpp"

namespace branchlab {

std::vector<double> flatten_instance(const MilpInstance& inst) {
  std::vector<double> flat;
  flat.reserve(inst.a.size() + inst.b.size() + inst.c.size());
  flat.insert(flat.end(), inst.a.begin(), inst.a.end());
  flat.insert(flat.end(), inst.b.begin(), inst.b.end());
  flat.insert(flat.end(), inst.c.begin(), inst.c.end());
  return flat;
}

namespace {

// Cyclic Jacobi on a symmetric matrix; returns eigenvalues and eigenvectors
// (columns of V). Deterministic sweep order.
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eigenvalues,
                  std::vector<double>& vectors) {
  vectors.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) vectors[static_cast<size_t>(i) * n + i] = 1.0;
  auto at = [&](std::vector<double>& mat, int r, int c) -> double& {
    return mat[static_cast<size_t>(r) * n + c];
  };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    if (off < 1e-24 * n * n) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = at(a, p, q);
        if (std::abs(apq) < 1e-300) continue;
        double app = at(a, p, p), aqq = at(a, q, q);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double cos = 1.0 / std::sqrt(1.0 + t * t);
        double sin = t * cos;
        for (int k = 0; k < n; ++k) {
          double akp = at(a, k, p), akq = at(a, k, q);
          at(a, k, p) = cos * akp - sin * akq;
          at(a, k, q) = sin * akp + cos * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = at(a, p, k), aqk = at(a, q, k);
          at(a, p, k) = cos * apk - sin * aqk;
          at(a, q, k) = sin * apk + cos * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = at(vectors, k, p), vkq = at(vectors, k, q);
          at(vectors, k, p) = cos * vkp - sin * vkq;
          at(vectors, k, q) = sin * vkp + cos * vkq;
        }
      }
    }
  }
  eigenvalues.resize(n);
  for (int i = 0; i < n; ++i) eigenvalues[i] = a[static_cast<size_t>(i) * n + i];
}

void fix_sign(double* row, int d) {
  int arg = 0;
  for (int j = 1; j < d; ++j)
    if (std::abs(row[j]) > std::abs(row[arg])) arg = j;
  if (row[arg] < 0.0)
    for (int j = 0; j < d; ++j) row[j] = -row[j];
}

}  // namespace

PcaModel fit_pca(const std::vector<MilpInstance>& instances, int k, int jobs) {
  if (instances.empty()) throw std::invalid_argument("fit_pca: no instances");
  const int count = static_cast<int>(instances.size());
  std::vector<std::vector<double>> data(instances.size());
  for (size_t i = 0; i < instances.size(); ++i) data[i] = flatten_instance(instances[i]);
  const int d = static_cast<int>(data[0].size());
  for (const auto& row : data)
    if (static_cast<int>(row.size()) != d)
      throw std::invalid_argument("fit_pca: instances do not share a structure");
  if (k < 1) throw std::invalid_argument("fit_pca: k must be positive");

  PcaModel model;
  model.d = d;
  model.mean.assign(d, 0.0);
  for (const auto& row : data)
    for (int j = 0; j < d; ++j) model.mean[j] += row[j];
  for (int j = 0; j < d; ++j) model.mean[j] /= count;
  for (auto& row : data)
    for (int j = 0; j < d; ++j) row[j] -= model.mean[j];

  int requested = std::min(k, std::min(d, count));
  std::vector<double> eigenvalues, vectors;
  bool use_gram = count < d;
  int dim = use_gram ? count : d;

  // Scatter matrix: Gram (X Xt) when samples < dimensions, covariance
  // (Xt X) otherwise. Entries are independent, so the parallel build is
  // bit-identical to the serial one.
  std::vector<double> scatter(static_cast<size_t>(dim) * dim, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(jobs > 0 ? jobs : omp_get_max_threads())
#endif
  for (int r = 0; r < dim; ++r) {
    for (int c = r; c < dim; ++c) {
      double sum = 0.0;
      if (use_gram) {
        for (int j = 0; j < d; ++j) sum += data[r][j] * data[c][j];
      } else {
        for (int i = 0; i < count; ++i) sum += data[i][r] * data[i][c];
      }
      sum /= count;
      scatter[static_cast<size_t>(r) * dim + c] = sum;
      scatter[static_cast<size_t>(c) * dim + r] = sum;
    }
  }

  jacobi_eigen(scatter, dim, eigenvalues, vectors);
  std::vector<int> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return eigenvalues[a] > eigenvalues[b]; });

  double lambda_max = std::max(eigenvalues[order[0]], 0.0);
  double rank_tol = 1e-12 * std::max(lambda_max, 1.0);
  int usable = 0;
  while (usable < requested && eigenvalues[order[usable]] > rank_tol) ++usable;
  if (usable < k)
    model.warning = "k reduced from " + std::to_string(k) + " to " + std::to_string(usable) +
                    " (data rank)";
  model.k = usable;
  model.components.assign(static_cast<size_t>(usable) * d, 0.0);

  for (int i = 0; i < usable; ++i) {
    double* row = model.components.data() + static_cast<size_t>(i) * d;
    int col = order[i];
    if (use_gram) {
      // Lift the Gram eigenvector u to the data space: Xt u, then normalize.
      for (int s = 0; s < count; ++s) {
        double u = vectors[static_cast<size_t>(s) * dim + col];
        if (u == 0.0) continue;
        for (int j = 0; j < d; ++j) row[j] += u * data[s][j];
      }
      double norm = 0.0;
      for (int j = 0; j < d; ++j) norm += row[j] * row[j];
      norm = std::sqrt(norm);
      for (int j = 0; j < d; ++j) row[j] /= norm;
    } else {
      for (int j = 0; j < d; ++j) row[j] = vectors[static_cast<size_t>(j) * dim + col];
    }
    fix_sign(row, d);
  }
  return model;
}

std::vector<double> encode_static(const MilpInstance& instance, const PcaModel& pca) {
  std::vector<double> flat = flatten_instance(instance);
  if (static_cast<int>(flat.size()) != pca.d)
    throw std::invalid_argument("encode_static: instance dimension " +
                                std::to_string(flat.size()) + " != pca dimension " +
                                std::to_string(pca.d));
  std::vector<double> out(pca.k, 0.0);
  for (int i = 0; i < pca.k; ++i) {
    const double* row = pca.component(i);
    double sum = 0.0;
    for (int j = 0; j < pca.d; ++j) sum += row[j] * (flat[j] - pca.mean[j]);
    out[i] = sum;
  }
  return out;
}

std::vector<double> encode_dynamic(const NodeState& node, const MilpInstance& instance,
                                   std::optional<double> incumbent) {
  const int num_binaries = static_cast<int>(instance.binaries.size());
  std::vector<double> out;
  out.reserve(dynamic_length(num_binaries));
  out.push_back(static_cast<double>(node.depth) / num_binaries);
  for (int j : instance.binaries) {
    double xj = node.lp.x[j];
    out.push_back(std::clamp(std::min(xj, 1.0 - xj), 0.0, 0.5));
  }
  if (incumbent) {
    double gap = (*incumbent - node.lp.objective) / (1.0 + std::abs(*incumbent));
    out.push_back(std::clamp(gap, 0.0, 1.0));
  } else {
    out.push_back(1.0);
  }
  // One-hot branching state over [fixed-to-0 | fixed-to-1 | free] blocks.
  size_t base = out.size();
  out.resize(base + 3 * static_cast<size_t>(num_binaries), 0.0);
  for (int p = 0; p < num_binaries; ++p) {
    int j = instance.binaries[p];
    if (std::binary_search(node.fixings.zero.begin(), node.fixings.zero.end(), j))
      out[base + p] = 1.0;
    else if (std::binary_search(node.fixings.one.begin(), node.fixings.one.end(), j))
      out[base + num_binaries + p] = 1.0;
    else
      out[base + 2 * static_cast<size_t>(num_binaries) + p] = 1.0;
  }
  return out;
}

}  // namespace branchlab
