#pragma once

#include "gdm/core.hpp"

namespace gdm {

// Per-feature null standard deviations under label permutation.
struct NullSpec {
  Vector sigma;  // length d, >= 0
};

struct RidgeModel {
  Vector w;  // d
  double lambda = 1.0;
  ResidualizerFit residualizer;  // empty coefficients when X came pre-residualized
  LabelTransform label_transform;
};

// Haufe-style generative activation pattern derived from a ridge fit.
struct ActivationPattern {
  Vector a;          // Cov(X) w / Var(Xw)
  Vector a_unit;     // unit-norm version (patterns are defined up to scale)
  double lambda = 1.0;
};

// min ||w||^2 + lambda ||Y - X w||^2, closed form; dual space when d > n.
RidgeModel fit_ridge(const Matrix& x_res, const Vector& y, double lambda);

ActivationPattern haufe_transform(const RidgeModel& model,
                                  const Matrix& x_res_train);

// Analytic permutation null of ridge: w = Q_r Y with Q_r independent of Y.
NullSpec ridge_null(const Matrix& x_res, double lambda);

// The Q_r matrix itself (d x n), exposed for tests.
Matrix ridge_q_matrix(const Matrix& x_res, double lambda);

Vector ridge_scores(const RidgeModel& model, const Matrix& x_res_new);

}  // namespace gdm
