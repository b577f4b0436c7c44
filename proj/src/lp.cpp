#include "branchlab/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "branchlab/common.hpp"

namespace branchlab {

bool Fixings::fixes(int j) const {
  return std::binary_search(zero.begin(), zero.end(), j) ||
         std::binary_search(one.begin(), one.end(), j);
}

Fixings Fixings::with(int j, int value) const {
  Fixings next = *this;
  std::vector<int>& side = value == 0 ? next.zero : next.one;
  side.insert(std::upper_bound(side.begin(), side.end(), j), j);
  return next;
}

std::vector<std::string> Fixings::validate(const MilpInstance& instance) const {
  std::vector<std::string> violations;
  if (!std::is_sorted(zero.begin(), zero.end()) || !std::is_sorted(one.begin(), one.end()))
    violations.push_back("fixing sets not sorted");
  for (int j : zero)
    if (!instance.is_binary(j)) violations.push_back("fixed-to-0 index not binary");
  for (int j : one) {
    if (!instance.is_binary(j)) violations.push_back("fixed-to-1 index not binary");
    if (std::binary_search(zero.begin(), zero.end(), j))
      violations.push_back("index fixed to both 0 and 1");
  }
  return violations;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;    // minimum pivot magnitude
constexpr double kReducedTol = 1e-9;  // reduced-cost optimality threshold
constexpr double kDegenStep = 1e-10;  // step below which a pivot counts as degenerate
constexpr int kBlandTrigger = 50;     // consecutive degenerate pivots before Bland's rule

enum Status : uint8_t { kNbLower, kNbUpper, kNbInterior, kBasic };

// Dense tableau simplex on min c'x, Ax + s = b with bounded columns.
// The tableau rows are B^-1 [A | I | R]; reduced costs are rebuilt per
// phase and updated through the same eliminations. Continuous structurals
// start nonbasic at value 0 strictly inside their box, which keeps the
// initial point (and phase-1 arithmetic) at coefficient scale.
class Tableau {
 public:
  Tableau(const MilpInstance& inst, const Fixings& fix)
      : m_(inst.num_cons), n_(inst.num_vars) {
    ncols_ = n_ + m_;
    lower_.assign(ncols_, 0.0);
    upper_.assign(ncols_, kInf);
    for (int j = 0; j < n_; ++j) {
      lower_[j] = -kContinuousBox;
      upper_[j] = kContinuousBox;
    }
    for (int j : inst.binaries) {
      lower_[j] = 0.0;
      upper_[j] = 1.0;
    }
    for (int j : fix.zero) upper_[j] = 0.0;
    for (int j : fix.one) lower_[j] = 1.0;

    rows_.assign(static_cast<size_t>(m_), {});
    for (int i = 0; i < m_; ++i) {
      rows_[i].assign(ncols_, 0.0);
      for (int j = 0; j < n_; ++j) rows_[i][j] = inst.at(i, j);
      rows_[i][n_ + i] = 1.0;
    }
    cost_.assign(ncols_, 0.0);
    for (int j = 0; j < n_; ++j) cost_[j] = inst.c[j];

    value_.assign(ncols_, 0.0);
    status_.assign(ncols_, kNbLower);
    for (int j = 0; j < n_; ++j) {
      if (lower_[j] == 0.0 || lower_[j] == upper_[j]) {
        value_[j] = lower_[j];
        status_[j] = kNbLower;
      } else {
        value_[j] = 0.0;
        status_[j] = kNbInterior;
      }
    }

    // Slack basis; rows whose slack would start negative get an artificial.
    basis_.resize(m_);
    xb_.resize(m_);
    std::vector<int> art_rows;
    for (int i = 0; i < m_; ++i) {
      double s = inst.b[i];
      for (int j = 0; j < n_; ++j)
        if (value_[j] != 0.0) s -= rows_[i][j] * value_[j];
      if (s >= 0.0) {
        basis_[i] = n_ + i;
        xb_[i] = s;
      } else {
        art_rows.push_back(i);
        basis_[i] = -1;
        xb_[i] = -s;
      }
    }
    num_art_ = static_cast<int>(art_rows.size());
    first_artificial_ = ncols_;
    if (num_art_ > 0) {
      int base = ncols_;
      ncols_ += num_art_;
      lower_.resize(ncols_, 0.0);
      upper_.resize(ncols_, kInf);
      value_.resize(ncols_, 0.0);
      status_.resize(ncols_, kNbLower);
      cost_.resize(ncols_, 0.0);
      for (auto& row : rows_) row.resize(ncols_, 0.0);
      for (int k = 0; k < num_art_; ++k) {
        int i = art_rows[k];
        // Negating the row makes the artificial's basis column +e_i.
        for (int j = 0; j < ncols_; ++j) rows_[i][j] = -rows_[i][j];
        rows_[i][base + k] = 1.0;
        basis_[i] = base + k;
      }
    }
    for (int i = 0; i < m_; ++i) {
      status_[basis_[i]] = kBasic;
      value_[basis_[i]] = xb_[i];
    }
  }

  LpStatus run(int& iterations) {
    iterations = 0;
    if (num_art_ > 0) {
      std::vector<double> phase1(ncols_, 0.0);
      for (int j = first_artificial_; j < ncols_; ++j) phase1[j] = 1.0;
      build_reduced_costs(phase1);
      LpStatus st = iterate(iterations);
      if (st == LpStatus::unbounded)
        throw std::runtime_error("simplex: phase 1 unbounded (internal error)");
      double infeas = 0.0;
      for (int i = 0; i < m_; ++i)
        if (basis_[i] >= first_artificial_) infeas += xb_[i];
      if (infeas > kFeasTol) return LpStatus::infeasible;
      // Pin artificials at zero; any still basic are degenerate at 0.
      for (int j = first_artificial_; j < ncols_; ++j) upper_[j] = 0.0;
      for (int i = 0; i < m_; ++i)
        if (basis_[i] >= first_artificial_ && std::abs(xb_[i]) <= kFeasTol) {
          xb_[i] = 0.0;
          value_[basis_[i]] = 0.0;
        }
    }
    build_reduced_costs(cost_);
    return iterate(iterations);
  }

  double value(int j) const { return value_[j]; }

 private:
  void build_reduced_costs(const std::vector<double>& cost) {
    d_.assign(ncols_, 0.0);
    for (int j = 0; j < ncols_; ++j) {
      if (status_[j] == kBasic) continue;
      double d = cost[j];
      for (int i = 0; i < m_; ++i) {
        double cb = cost[basis_[i]];
        if (cb != 0.0) d -= cb * rows_[i][j];
      }
      d_[j] = d;
    }
  }

  // dir = +1 increases the entering variable, -1 decreases it.
  bool improving(int j, int& dir) const {
    if (status_[j] == kBasic) return false;
    if (lower_[j] == upper_[j]) return false;
    if (d_[j] < -kReducedTol && status_[j] != kNbUpper) {
      dir = 1;
      return true;
    }
    if (d_[j] > kReducedTol && status_[j] != kNbLower) {
      dir = -1;
      return true;
    }
    return false;
  }

  LpStatus iterate(int& iterations) {
    int degenerate_run = 0;
    bool bland = false;
    const int iter_limit = 2000 + 200 * (m_ + n_);
    for (;;) {
      if (++iterations > iter_limit)
        throw std::runtime_error("simplex: iteration limit exceeded");
      int entering = -1, dir = 0;
      if (!bland) {
        double best = 0.0;
        for (int j = 0; j < ncols_; ++j) {
          int dj;
          if (!improving(j, dj)) continue;
          double mag = std::abs(d_[j]);
          if (mag > best + 1e-15) {
            best = mag;
            entering = j;
            dir = dj;
          }
        }
      } else {
        for (int j = 0; j < ncols_ && entering < 0; ++j) {
          int dj;
          if (improving(j, dj)) {
            entering = j;
            dir = dj;
          }
        }
      }
      if (entering < 0) return LpStatus::optimal;

      // Travel limit of the entering variable itself.
      double self_limit =
          dir > 0 ? upper_[entering] - value_[entering] : value_[entering] - lower_[entering];
      double t_min = self_limit;
      for (int i = 0; i < m_; ++i) {
        double alpha = dir * rows_[i][entering];
        if (alpha > kPivotTol) {
          double limit = (xb_[i] - lower_[basis_[i]]) / alpha;
          if (limit < t_min) t_min = limit;
        } else if (alpha < -kPivotTol) {
          if (upper_[basis_[i]] == kInf) continue;
          double limit = (upper_[basis_[i]] - xb_[i]) / (-alpha);
          if (limit < t_min) t_min = limit;
        }
      }
      if (t_min == kInf) return LpStatus::unbounded;
      if (t_min < 0.0) t_min = 0.0;  // clip roundoff-negative steps

      int leave_row = -1;
      if (t_min < self_limit) {
        // Among rows tied at t_min: Bland picks the lowest basic column,
        // Dantzig the largest pivot magnitude (lowest row on ties).
        double best_mag = 0.0;
        int best_col = ncols_;
        for (int i = 0; i < m_; ++i) {
          double alpha = dir * rows_[i][entering];
          double limit;
          if (alpha > kPivotTol)
            limit = (xb_[i] - lower_[basis_[i]]) / alpha;
          else if (alpha < -kPivotTol && upper_[basis_[i]] < kInf)
            limit = (upper_[basis_[i]] - xb_[i]) / (-alpha);
          else
            continue;
          if (limit > t_min + 1e-9) continue;
          if (bland) {
            if (basis_[i] < best_col) {
              best_col = basis_[i];
              leave_row = i;
            }
          } else {
            double mag = std::abs(rows_[i][entering]);
            if (mag > best_mag + 1e-15) {
              best_mag = mag;
              leave_row = i;
            }
          }
        }
      }

      if (t_min < kDegenStep) {
        if (++degenerate_run >= kBlandTrigger) bland = true;
      } else {
        degenerate_run = 0;
      }

      if (leave_row < 0) {
        // Entering travels to a bound of its own; no basis change.
        for (int i = 0; i < m_; ++i) xb_[i] -= dir * rows_[i][entering] * t_min;
        value_[entering] = dir > 0 ? upper_[entering] : lower_[entering];
        status_[entering] = dir > 0 ? kNbUpper : kNbLower;
        for (int i = 0; i < m_; ++i) value_[basis_[i]] = xb_[i];
        continue;
      }

      int leaving = basis_[leave_row];
      double alpha_leave = dir * rows_[leave_row][entering];
      double enter_value = value_[entering] + dir * t_min;
      for (int i = 0; i < m_; ++i)
        if (i != leave_row) xb_[i] -= dir * rows_[i][entering] * t_min;
      // The leaving variable settles on the bound it ran into.
      if (alpha_leave > 0.0) {
        value_[leaving] = lower_[leaving];
        status_[leaving] = kNbLower;
      } else {
        value_[leaving] = upper_[leaving];
        status_[leaving] = kNbUpper;
      }
      status_[entering] = kBasic;
      basis_[leave_row] = entering;
      xb_[leave_row] = enter_value;
      value_[entering] = enter_value;

      // Gauss-Jordan elimination on the entering column.
      double inv = 1.0 / rows_[leave_row][entering];
      std::vector<double>& prow = rows_[leave_row];
      for (int j = 0; j < ncols_; ++j) prow[j] *= inv;
      prow[entering] = 1.0;
      for (int i = 0; i < m_; ++i) {
        if (i == leave_row) continue;
        double f = rows_[i][entering];
        if (f == 0.0) continue;
        std::vector<double>& row = rows_[i];
        for (int j = 0; j < ncols_; ++j) row[j] -= f * prow[j];
        row[entering] = 0.0;
      }
      double fd = d_[entering];
      if (fd != 0.0) {
        for (int j = 0; j < ncols_; ++j) d_[j] -= fd * prow[j];
        d_[entering] = 0.0;
      }
      for (int i = 0; i < m_; ++i) value_[basis_[i]] = xb_[i];
    }
  }

  int m_, n_, ncols_ = 0;
  int num_art_ = 0, first_artificial_ = 0;
  std::vector<std::vector<double>> rows_;
  std::vector<double> cost_, d_, lower_, upper_, value_, xb_;
  std::vector<int> basis_;
  std::vector<Status> status_;
};

}  // namespace

LpResult solve_relaxation(const MilpInstance& instance, const Fixings& fixings) {
  LpResult result;
  Tableau tab(instance, fixings);
  result.status = tab.run(result.iterations);
  if (result.status == LpStatus::optimal) {
    result.x.resize(instance.num_vars);
    double obj = 0.0;
    for (int j = 0; j < instance.num_vars; ++j) {
      result.x[j] = tab.value(j);
      obj += instance.c[j] * result.x[j];
    }
    result.objective = obj;
  }
  return result;
}

}  // namespace branchlab
