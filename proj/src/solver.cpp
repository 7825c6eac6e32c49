#include "gdm/solver.hpp"

#include <cmath>
#include <sstream>

namespace gdm {

namespace {

constexpr double kLambda1Floor = 1e-12;

void check_fit_inputs(const Matrix& x, const Vector& y,
                      const CovariateBasis& c, const GdmHyperParams& hyper,
                      const FitOptions& opts) {
  hyper.validate();
  const auto n = x.rows();
  if (y.size() != n) throw DimensionError("label length does not match rows");
  if (c.n() != n) throw DimensionError("covariate rows do not match features");
  if (n < c.k() + 2)
    throw ValidationError("need at least k + 2 subjects to fit");
  if (!x.allFinite() || !y.allFinite())
    throw ValidationError("non-finite fit input");
  if (opts.check_standardized) {
    const double mean = y.mean();
    const double var = (y.array() - mean).square().mean();
    if (std::abs(mean) > 1e-6 || std::abs(var - 1.0) > 1e-6)
      throw ValidationError("labels must be standardized (mean 0, var 1)");
  }
}

// SPD solve with a column-pivoted fallback when conditioning is poor.
Vector solve_spd(const Matrix& a, const Vector& b, double condition_limit) {
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() == Eigen::Success) {
    const auto& diag = ldlt.vectorD();
    const double dmax = diag.maxCoeff();
    const double dmin = diag.minCoeff();
    if (dmin > 0.0 && dmax / dmin < condition_limit) return ldlt.solve(b);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  return qr.solve(b);
}

}  // namespace

void GdmHyperParams::validate() const {
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2))
    throw ValidationError("non-finite hyperparameter");
  if (lambda1 < kLambda1Floor)
    throw ValidationError("lambda1 must be at least 1e-12");
  if (lambda2 < 0.0) throw ValidationError("lambda2 must be non-negative");
}

double generative_scalar(const Vector& y, const CovariateBasis& c,
                         double lambda2) {
  const Vector py = project_onto_covariates(c, y);
  return 1.0 + lambda2 * (y.squaredNorm() - y.dot(py));
}

ObjectiveTerms gdm_objective(const Matrix& x, const Vector& y,
                             const CovariateBasis& c, const Vector& j,
                             const Vector& w0, const Matrix& a0,
                             const GdmHyperParams& hyper) {
  hyper.validate();
  const auto n = x.rows();
  const auto d = x.cols();
  if (y.size() != n || c.n() != n || j.size() != d || w0.size() != c.k() ||
      a0.rows() != d || a0.cols() != c.k())
    throw DimensionError("gdm_objective dimension mismatch");
  if (!x.allFinite() || !y.allFinite() || !j.allFinite() || !w0.allFinite() ||
      !a0.allFinite())
    throw ValidationError("non-finite objective input");

  ObjectiveTerms t;
  t.ridge_norm = j.squaredNorm();
  t.discriminative =
      hyper.lambda1 * (y - x * j - c.matrix * w0).squaredNorm();
  t.generative =
      hyper.lambda2 *
      (x.transpose() - j * y.transpose() - a0 * c.matrix.transpose())
          .squaredNorm();
  return t;
}

void recover_bias_terms(const Matrix& x, const Vector& y,
                        const CovariateBasis& c, GdmModel* model) {
  const Vector resid = y - x * model->j;
  model->w0 = c.gram_inverse * (c.matrix.transpose() * resid);
  model->a0 = (x.transpose() - model->j * y.transpose()) * c.matrix *
              c.gram_inverse;
}

GdmModel fit_primal(const Matrix& x, const Vector& y, const CovariateBasis& c,
                    const GdmHyperParams& hyper, const FitOptions& opts) {
  check_fit_inputs(x, y, c, hyper, opts);

  const double s = generative_scalar(y, c, hyper.lambda2);
  const Matrix xtc = x.transpose() * c.matrix;               // d x k
  const Vector cty = c.matrix.transpose() * y;               // k
  const Vector xty_res =
      x.transpose() * y - xtc * (c.gram_inverse * cty);      // X^T (I-P) Y

  Matrix a = hyper.lambda1 *
             (x.transpose() * x - xtc * c.gram_inverse * xtc.transpose());
  a.diagonal().array() += s;
  const Vector b = (hyper.lambda1 + hyper.lambda2) * xty_res;

  GdmModel model;
  model.hyper = hyper;
  model.route_used = SolverRoute::Primal;
  model.j = solve_spd(a, b, opts.condition_limit);
  if (!model.j.allFinite())
    throw GdmError("primal system numerically degenerate");
  recover_bias_terms(x, y, c, &model);
  return model;
}

Matrix dual_inverse_block(const Matrix& x, const CovariateBasis& c,
                          const GdmHyperParams& hyper, double scalar_s,
                          double condition_limit) {
  const auto n = x.rows();
  const auto k = c.k();
  Matrix m(n + k, n + k);
  m.topLeftCorner(n, n) = -(x * x.transpose()) / scalar_s;
  m.topLeftCorner(n, n).diagonal().array() -= 1.0 / hyper.lambda1;
  m.topRightCorner(n, k) = c.matrix;
  m.bottomLeftCorner(k, n) = c.matrix.transpose();
  m.bottomRightCorner(k, k).setZero();

  Eigen::PartialPivLU<Matrix> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / condition_limit / 100.0)) {
    std::ostringstream msg;
    msg << "dual saddle system singular or ill conditioned (rcond=" << rcond
        << ")";
    throw GdmError(msg.str());
  }
  Matrix rhs = Matrix::Zero(n + k, n);
  rhs.topRows(n).setIdentity();
  return lu.solve(rhs).topRows(n);
}

GdmModel fit_dual(const Matrix& x, const Vector& y, const CovariateBasis& c,
                  const GdmHyperParams& hyper, const FitOptions& opts) {
  check_fit_inputs(x, y, c, hyper, opts);

  const double s = generative_scalar(y, c, hyper.lambda2);
  const Matrix b = dual_inverse_block(x, c, hyper, s, opts.condition_limit);

  const Vector py = project_onto_covariates(c, y);
  const Vector xxt_y = x * (x.transpose() * y);
  const Vector xxt_py = x * (x.transpose() * py);
  const Vector inner = y + hyper.lambda2 / s * (xxt_py - xxt_y);
  const Vector lambda_dual = b * inner;

  GdmModel model;
  model.hyper = hyper;
  model.route_used = SolverRoute::Dual;
  model.j = (hyper.lambda2 * (x.transpose() * (y - py)) -
             x.transpose() * lambda_dual) /
            s;
  if (!model.j.allFinite()) throw GdmError("dual route produced non-finite J");
  recover_bias_terms(x, y, c, &model);
  return model;
}

GdmModel fit_gdm(const Matrix& x, const Vector& y, const CovariateBasis& c,
                 const GdmHyperParams& hyper, const FitOptions& opts) {
  SolverRoute route = opts.route;
  if (route == SolverRoute::Auto)
    route = x.cols() > x.rows() + c.k() ? SolverRoute::Dual
                                        : SolverRoute::Primal;
  return route == SolverRoute::Dual ? fit_dual(x, y, c, hyper, opts)
                                    : fit_primal(x, y, c, hyper, opts);
}

Predictions predict(const GdmModel& model, const Matrix& x_new,
                    const Matrix& c_new_with_intercept) {
  if (x_new.cols() != model.j.size())
    throw DimensionError("prediction feature count mismatch");
  if (c_new_with_intercept.cols() != model.w0.size())
    throw DimensionError("prediction covariate count mismatch");
  if (c_new_with_intercept.rows() != x_new.rows())
    throw DimensionError("prediction row count mismatch");

  Predictions out;
  out.scores = x_new * model.j + c_new_with_intercept * model.w0;
  out.classes.reserve(out.scores.size());
  for (Eigen::Index i = 0; i < out.scores.size(); ++i)
    out.classes.push_back(model.label_transform.class_of_score(out.scores[i]));
  return out;
}

Predictions predict(const GdmModel& model, const Matrix& x_new,
                    const CovariateBasis& c_new) {
  return predict(model, x_new, c_new.matrix);
}

}  // namespace gdm
