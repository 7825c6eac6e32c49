#include "gdm/baselines.hpp"

namespace gdm {

RidgeModel fit_ridge(const Matrix& x_res, const Vector& y, double lambda) {
  const auto n = x_res.rows();
  const auto d = x_res.cols();
  if (y.size() != n) throw DimensionError("ridge label length mismatch");
  if (!x_res.allFinite() || !y.allFinite() || !std::isfinite(lambda))
    throw ValidationError("non-finite ridge input");
  if (lambda <= 0.0) throw ValidationError("ridge lambda must be positive");

  RidgeModel model;
  model.lambda = lambda;
  if (d > n) {
    // dual: w = lambda X^T (I + lambda X X^T)^{-1} Y
    Matrix g = lambda * (x_res * x_res.transpose());
    g.diagonal().array() += 1.0;
    model.w = lambda * (x_res.transpose() * g.ldlt().solve(y));
  } else {
    Matrix a = lambda * (x_res.transpose() * x_res);
    a.diagonal().array() += 1.0;
    model.w = a.ldlt().solve(lambda * (x_res.transpose() * y));
  }
  if (!model.w.allFinite()) throw GdmError("ridge solve produced non-finite w");
  return model;
}

ActivationPattern haufe_transform(const RidgeModel& model,
                                  const Matrix& x_res_train) {
  const auto n = x_res_train.rows();
  if (x_res_train.cols() != model.w.size())
    throw DimensionError("haufe feature count mismatch");

  // population (1/n) covariance of centered training features
  const Matrix xc =
      x_res_train.rowwise() - x_res_train.colwise().mean();
  const Vector xw = xc * model.w;
  const double pred_var = xw.squaredNorm() / static_cast<double>(n);
  if (pred_var <= 1e-300) throw GdmError("degenerate pattern");

  ActivationPattern p;
  p.lambda = model.lambda;
  p.a = (xc.transpose() * xw) / static_cast<double>(n) / pred_var;
  const double norm = p.a.norm();
  if (norm <= 0.0) throw GdmError("degenerate pattern");
  p.a_unit = p.a / norm;
  return p;
}

Matrix ridge_q_matrix(const Matrix& x_res, double lambda) {
  const auto n = x_res.rows();
  const auto d = x_res.cols();
  if (!x_res.allFinite() || !std::isfinite(lambda) || lambda <= 0.0)
    throw ValidationError("invalid ridge_null input");
  if (d > n) {
    Matrix g = lambda * (x_res * x_res.transpose());
    g.diagonal().array() += 1.0;
    return lambda *
           (x_res.transpose() * g.ldlt().solve(Matrix::Identity(n, n)));
  }
  Matrix a = lambda * (x_res.transpose() * x_res);
  a.diagonal().array() += 1.0;
  return a.ldlt().solve(lambda * x_res.transpose());
}

NullSpec ridge_null(const Matrix& x_res, double lambda) {
  NullSpec spec;
  spec.sigma = ridge_q_matrix(x_res, lambda).rowwise().norm();
  return spec;
}

Vector ridge_scores(const RidgeModel& model, const Matrix& x_res_new) {
  if (x_res_new.cols() != model.w.size())
    throw DimensionError("ridge score feature count mismatch");
  return x_res_new * model.w;
}

}  // namespace gdm
