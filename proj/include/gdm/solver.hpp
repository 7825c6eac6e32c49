#pragma once

#include "gdm/core.hpp"

namespace gdm {

struct GdmHyperParams {
  double lambda1 = 1.0;  // discriminative weight
  double lambda2 = 1.0;  // generative weight

  void validate() const;
};

enum class SolverRoute { Auto, Primal, Dual };

// Fitted GDM: pattern vector J, covariate bias W0 and generative covariate
// coefficients A0.
struct GdmModel {
  Vector j;        // d
  Vector w0;       // k
  Matrix a0;       // d x k
  GdmHyperParams hyper;
  LabelTransform label_transform;
  SolverRoute route_used = SolverRoute::Primal;
};

struct ObjectiveTerms {
  double ridge_norm = 0.0;      // ||J||^2
  double discriminative = 0.0;  // lambda1 * ||Y - XJ - C W0||^2
  double generative = 0.0;      // lambda2 * ||X^T - J Y^T - A0 C^T||_F^2
  double total() const { return ridge_norm + discriminative + generative; }
};

ObjectiveTerms gdm_objective(const Matrix& x, const Vector& y,
                             const CovariateBasis& c, const Vector& j,
                             const Vector& w0, const Matrix& a0,
                             const GdmHyperParams& hyper);

struct FitOptions {
  SolverRoute route = SolverRoute::Auto;
  bool check_standardized = true;
  double condition_limit = 1e12;
};

GdmModel fit_primal(const Matrix& x, const Vector& y, const CovariateBasis& c,
                    const GdmHyperParams& hyper, const FitOptions& opts = {});
GdmModel fit_dual(const Matrix& x, const Vector& y, const CovariateBasis& c,
                  const GdmHyperParams& hyper, const FitOptions& opts = {});
// Route selection: dual when d > n + k, primal otherwise (overridable).
GdmModel fit_gdm(const Matrix& x, const Vector& y, const CovariateBasis& c,
                 const GdmHyperParams& hyper, const FitOptions& opts = {});

struct Predictions {
  Vector scores;                     // standardized-label space
  std::vector<std::string> classes;  // via LabelTransform, score 0 -> neg
};

Predictions predict(const GdmModel& model, const Matrix& x_new,
                    const Matrix& c_new_with_intercept);
Predictions predict(const GdmModel& model, const Matrix& x_new,
                    const CovariateBasis& c_new);

// Solves the bottom-right (n x n) corner convention of the saddle system:
// returns the top-left n x n block of inv(M) for the dual route. Exposed for
// the Q-matrix builder.
Matrix dual_inverse_block(const Matrix& x, const CovariateBasis& c,
                          const GdmHyperParams& hyper, double scalar_s,
                          double condition_limit = 1e12);

// 1 + lambda2 * (Y^T Y - Y^T C (C^T C)^{-1} C^T Y)
double generative_scalar(const Vector& y, const CovariateBasis& c,
                         double lambda2);

// W0/A0 least-squares recovery given J.
void recover_bias_terms(const Matrix& x, const Vector& y,
                        const CovariateBasis& c, GdmModel* model);

}  // namespace gdm
