#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "gdm/baselines.hpp"
#include "gdm/solver.hpp"

namespace gdm {

// d x n matrix with J = Q Y; the basis of the analytic null.
struct QMatrix {
  Matrix q;         // d x n
  double scalar_s;  // 1 + lambda2 (Y^T Y - Y^T P Y), > 0
  GdmHyperParams hyper;
};

QMatrix build_q_matrix(const Matrix& x, const Vector& y,
                       const CovariateBasis& c, const GdmHyperParams& hyper,
                       const FitOptions& opts = {});

NullSpec analytic_null(const QMatrix& q);

struct PValues {
  Vector p;                          // in [0, 1]
  std::vector<bool> zero_sigma_flag; // sigma == 0 with nonzero statistic
};

PValues analytic_pvalues(const Vector& j, const NullSpec& null);

enum class PermMode { FullRefit, FixedQ };

struct PermStats {
  std::int64_t n_used = 0;
  bool exhaustive = false;
  Vector perm_mean;  // per-feature empirical mean of J under permutation
  Vector perm_std;   // per-feature empirical std
};

// Permutation-test oracle. full_refit recomputes J per relabeling; fixed_Q
// reuses Q from the observed labels. Exhaustive enumeration when n! fits in
// the budget. Deterministic given seed.
std::pair<PValues, PermStats> permutation_pvalues(
    const Matrix& x, const Vector& y, const CovariateBasis& c,
    const GdmHyperParams& hyper, std::int64_t n_perm, std::uint64_t seed,
    PermMode mode, const FitOptions& opts = {});

// Benjamini-Hochberg step-up at level q.
std::vector<bool> bh_fdr(const Vector& p_raw, double q);

struct InferenceResult {
  Vector j;
  Vector sigma;
  Vector p_raw;
  std::vector<bool> rejected;
  double q_level = 0.05;
  std::string method;  // "analytic" or "permutation"
  std::optional<std::int64_t> n_permutations;
  std::vector<bool> zero_sigma_flag;
};

struct AgreementPoint {
  std::int64_t n_perm = 0;
  double mean_abs_error = 0.0;
};

struct AgreementCurve {
  std::vector<AgreementPoint> points;        // sorted by budget
  std::optional<double> log_log_slope;       // absent with < 2 usable points
};

AgreementCurve pvalue_agreement(
    const Vector& p_analytic,
    const std::map<std::int64_t, Vector>& p_perm_by_budget);

}  // namespace gdm
