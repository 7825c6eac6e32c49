#include "gdm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gdm {

QMatrix build_q_matrix(const Matrix& x, const Vector& y,
                       const CovariateBasis& c, const GdmHyperParams& hyper,
                       const FitOptions& opts) {
  hyper.validate();
  const auto n = x.rows();
  if (y.size() != n || c.n() != n)
    throw DimensionError("q-matrix input dimension mismatch");

  QMatrix qm;
  qm.hyper = hyper;
  qm.scalar_s = generative_scalar(y, c, hyper.lambda2);
  if (!(qm.scalar_s > 0.0)) throw GdmError("non-positive generative scalar");

  const Matrix b = dual_inverse_block(x, c, hyper, qm.scalar_s,
                                      opts.condition_limit);

  const Matrix xxt = x * x.transpose();
  const Matrix p_xxt = project_onto_covariates(c, xxt);  // P X X^T
  // inner = I + lambda2 (X X^T P - X X^T) / s; X X^T P = (P X X^T)^T
  Matrix inner =
      hyper.lambda2 / qm.scalar_s * (p_xxt.transpose() - xxt);
  inner.diagonal().array() += 1.0;

  const Matrix px = project_onto_covariates(c, x);  // P X
  qm.q = (hyper.lambda2 * (x - px).transpose() -
          x.transpose() * (b * inner)) /
         qm.scalar_s;
  return qm;
}

NullSpec analytic_null(const QMatrix& q) {
  NullSpec spec;
  spec.sigma = q.q.rowwise().norm();
  return spec;
}

PValues analytic_pvalues(const Vector& j, const NullSpec& null) {
  const auto d = j.size();
  if (null.sigma.size() != d)
    throw DimensionError("p-value sigma length mismatch");
  if ((null.sigma.array() < 0.0).any())
    throw ValidationError("negative null sigma");

  PValues out;
  out.p.resize(d);
  out.zero_sigma_flag.assign(d, false);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (null.sigma[i] == 0.0) {
      if (j[i] == 0.0) {
        out.p[i] = 1.0;
      } else {
        out.p[i] = 0.0;
        out.zero_sigma_flag[i] = true;
      }
    } else {
      const double z = std::abs(j[i]) / null.sigma[i];
      out.p[i] = std::erfc(z / std::sqrt(2.0));  // 2 (1 - Phi(z))
    }
  }
  return out;
}

namespace {

// n! capped at limit + 1 to avoid overflow
std::int64_t capped_factorial(Eigen::Index n, std::int64_t limit) {
  std::int64_t f = 1;
  for (Eigen::Index i = 2; i <= n; ++i) {
    if (f > limit / i + 1) return limit + 1;
    f *= i;
  }
  return f;
}

}  // namespace

std::pair<PValues, PermStats> permutation_pvalues(
    const Matrix& x, const Vector& y, const CovariateBasis& c,
    const GdmHyperParams& hyper, std::int64_t n_perm, std::uint64_t seed,
    PermMode mode, const FitOptions& opts) {
  if (n_perm < 1) throw ValidationError("n_perm must be at least 1");
  const auto n = x.rows();
  const auto d = x.cols();

  FitOptions fit_opts = opts;
  fit_opts.check_standardized = false;

  const Vector j_obs = fit_gdm(x, y, c, hyper, fit_opts).j;

  QMatrix fixed_q;
  if (mode == PermMode::FixedQ)
    fixed_q = build_q_matrix(x, y, c, hyper, fit_opts);

  const auto j_of = [&](const Vector& y_perm) -> Vector {
    if (mode == PermMode::FixedQ) return fixed_q.q * y_perm;
    return fit_gdm(x, y_perm, c, hyper, fit_opts).j;
  };

  const std::int64_t n_fact = capped_factorial(n, n_perm);
  const bool exhaustive = n_fact <= n_perm;

  Eigen::VectorXi count = Eigen::VectorXi::Zero(d);
  Vector sum = Vector::Zero(d);
  Vector sum_sq = Vector::Zero(d);
  const Vector abs_obs = j_obs.cwiseAbs();
  std::int64_t used = 0;

  const auto accumulate = [&](const Vector& jp) {
    count += (jp.cwiseAbs().array() >= abs_obs.array() - 1e-15)
                 .cast<int>()
                 .matrix();
    sum += jp;
    sum_sq += jp.cwiseAbs2();
    ++used;
  };

  if (exhaustive) {
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Vector y_perm(n);
    do {
      for (Eigen::Index i = 0; i < n; ++i) y_perm[i] = y[idx[i]];
      accumulate(j_of(y_perm));
    } while (std::next_permutation(idx.begin(), idx.end()));
  } else {
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Vector y_perm(n);
    for (std::int64_t t = 0; t < n_perm; ++t) {
      std::shuffle(idx.begin(), idx.end(), rng);
      for (Eigen::Index i = 0; i < n; ++i) y_perm[i] = y[idx[i]];
      accumulate(j_of(y_perm));
    }
  }

  PValues pv;
  pv.p.resize(d);
  pv.zero_sigma_flag.assign(d, false);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (exhaustive)
      pv.p[i] = static_cast<double>(count[i]) / static_cast<double>(used);
    else
      pv.p[i] = (1.0 + count[i]) / static_cast<double>(n_perm + 1);
  }

  PermStats stats;
  stats.n_used = used;
  stats.exhaustive = exhaustive;
  stats.perm_mean = sum / static_cast<double>(used);
  stats.perm_std = (sum_sq / static_cast<double>(used) -
                    stats.perm_mean.cwiseAbs2())
                       .cwiseMax(0.0)
                       .cwiseSqrt();
  return {std::move(pv), std::move(stats)};
}

std::vector<bool> bh_fdr(const Vector& p_raw, double q) {
  const auto m = p_raw.size();
  if (m == 0) throw ValidationError("bh_fdr on empty input");
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("fdr_q out of range");
  if ((p_raw.array() < 0.0).any() || (p_raw.array() > 1.0).any())
    throw ValidationError("p-values outside [0, 1]");

  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return p_raw[a] < p_raw[b]; });

  double threshold = -1.0;
  for (Eigen::Index i = m; i >= 1; --i) {
    const double p = p_raw[order[i - 1]];
    if (p <= static_cast<double>(i) * q / static_cast<double>(m)) {
      threshold = p;
      break;
    }
  }

  std::vector<bool> rejected(m, false);
  if (threshold >= 0.0)
    for (Eigen::Index i = 0; i < m; ++i)
      rejected[i] = p_raw[i] <= threshold;  // ties rejected together
  return rejected;
}

AgreementCurve pvalue_agreement(
    const Vector& p_analytic,
    const std::map<std::int64_t, Vector>& p_perm_by_budget) {
  AgreementCurve curve;
  for (const auto& [budget, p_perm] : p_perm_by_budget) {
    if (p_perm.size() != p_analytic.size())
      throw DimensionError("agreement p-value length mismatch");
    curve.points.push_back(
        {budget, (p_perm - p_analytic).cwiseAbs().mean()});
  }

  std::vector<double> lx, ly;
  for (const auto& pt : curve.points) {
    if (pt.mean_abs_error > 0.0 && pt.n_perm > 0) {
      lx.push_back(std::log(static_cast<double>(pt.n_perm)));
      ly.push_back(std::log(pt.mean_abs_error));
    }
  }
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < lx.size(); ++i) {
      sxx += (lx[i] - mx) * (lx[i] - mx);
      sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx > 0.0) curve.log_log_slope = sxy / sxx;
  }
  return curve;
}

}  // namespace gdm
