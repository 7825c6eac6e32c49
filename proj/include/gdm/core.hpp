#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct GdmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : GdmError {
  using GdmError::GdmError;
};
struct ValidationError : GdmError {
  using GdmError::GdmError;
};

// Subject-by-feature dataset with labels, covariates and optional site tags.
struct Cohort {
  Matrix features;                        // n x d
  std::vector<std::string> labels_raw;    // length n
  Matrix covariates_raw;                  // n x k_raw (k_raw may be 0)
  std::vector<std::string> covariate_names;
  std::vector<std::string> site;          // empty or length n
  std::vector<std::string> feature_names; // length d
  std::vector<std::string> subject_ids;   // length n

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index d() const { return features.cols(); }
  Eigen::Index k_raw() const { return covariates_raw.cols(); }

  void validate() const;
  std::vector<std::string> distinct_sites() const;
  Cohort subset(const std::vector<Eigen::Index>& rows) const;
};

// Records how raw labels were mapped to zero-mean unit-variance values.
struct LabelTransform {
  bool categorical = false;
  std::string neg_class;  // class coded -1 (lexicographically smaller)
  std::string pos_class;  // class coded +1
  double mean = 0.0;
  double scale = 1.0;     // population std of the coded labels

  double apply_one(const std::string& raw) const;
  // Inverse of the standardization, back to coded (or raw real) values.
  double invert_value(double y) const { return y * scale + mean; }
  std::string class_of_score(double score) const;
};

std::pair<Vector, LabelTransform> standardize_labels(
    const std::vector<std::string>& labels_raw);
Vector apply_label_transform(const LabelTransform& t,
                             const std::vector<std::string>& labels_raw);

// Covariate design with intercept column prepended and (C^T C)^{-1} cached.
struct CovariateBasis {
  Matrix matrix;        // n x k, first column all ones
  std::vector<std::string> column_names;
  Matrix gram_inverse;  // k x k

  Eigen::Index n() const { return matrix.rows(); }
  Eigen::Index k() const { return matrix.cols(); }
};

constexpr double kDefaultRankTol = 1e-10;

CovariateBasis build_covariate_basis(const Matrix& covariates_raw,
                                     const std::vector<std::string>& names,
                                     double rank_tol = kDefaultRankTol);

// C (C^T C)^{-1} C^T V, evaluated in factored form.
Matrix project_onto_covariates(const CovariateBasis& basis, const Matrix& v);
Vector project_onto_covariates(const CovariateBasis& basis, const Vector& v);

// Per-feature linear regression of X columns on the covariate basis,
// fitted once on training data and reapplied at test time.
struct ResidualizerFit {
  Matrix coefficients;  // k x d
  Eigen::Index k() const { return coefficients.rows(); }
};

ResidualizerFit fit_residualizer(const Matrix& x, const CovariateBasis& basis);
Matrix apply_residualizer(const ResidualizerFit& fit, const Matrix& x_new,
                          const CovariateBasis& basis_new);
Matrix apply_residualizer(const ResidualizerFit& fit, const Matrix& x_new,
                          const Matrix& c_new);

// Optional feature z-scoring (off by default in all protocols).
struct FeatureScaler {
  Vector mean;
  Vector std;
};

FeatureScaler fit_feature_scaler(const Matrix& x);
Matrix apply_feature_scaler(const FeatureScaler& s, const Matrix& x);

}  // namespace gdm
