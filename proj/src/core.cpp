#include "gdm/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace gdm {

void Cohort::validate() const {
  const auto nn = n();
  if (nn < 2) throw ValidationError("cohort needs at least 2 subjects");
  if (d() < 1) throw ValidationError("cohort needs at least 1 feature");
  if (!features.allFinite()) throw ValidationError("non-finite feature value");
  if (covariates_raw.size() > 0 && !covariates_raw.allFinite())
    throw ValidationError("non-finite covariate value");
  if (static_cast<Eigen::Index>(labels_raw.size()) != nn)
    throw DimensionError("label count does not match feature rows");
  if (static_cast<Eigen::Index>(subject_ids.size()) != nn)
    throw DimensionError("subject id count does not match feature rows");
  if (static_cast<Eigen::Index>(feature_names.size()) != d())
    throw DimensionError("feature name count does not match feature columns");
  if (covariates_raw.rows() != 0 && covariates_raw.rows() != nn)
    throw DimensionError("covariate rows do not match feature rows");
  if (!site.empty() && static_cast<Eigen::Index>(site.size()) != nn)
    throw DimensionError("site tag count does not match feature rows");

  std::set<std::string> ids(subject_ids.begin(), subject_ids.end());
  if (static_cast<Eigen::Index>(ids.size()) != nn)
    throw ValidationError("duplicate subject_id in cohort");
  std::set<std::string> fn(feature_names.begin(), feature_names.end());
  if (static_cast<Eigen::Index>(fn.size()) != d())
    throw ValidationError("duplicate feature name in cohort");

  std::set<std::string> classes(labels_raw.begin(), labels_raw.end());
  if (classes.size() < 2) throw ValidationError("degenerate labels");
}

std::vector<std::string> Cohort::distinct_sites() const {
  std::set<std::string> s(site.begin(), site.end());
  return {s.begin(), s.end()};
}

Cohort Cohort::subset(const std::vector<Eigen::Index>& rows) const {
  Cohort out;
  out.features.resize(rows.size(), d());
  if (covariates_raw.cols() > 0) out.covariates_raw.resize(rows.size(), k_raw());
  out.covariate_names = covariate_names;
  out.feature_names = feature_names;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r < 0 || r >= n()) throw DimensionError("subset row out of range");
    out.features.row(i) = features.row(r);
    if (covariates_raw.cols() > 0)
      out.covariates_raw.row(i) = covariates_raw.row(r);
    out.labels_raw.push_back(labels_raw[r]);
    out.subject_ids.push_back(subject_ids[r]);
    if (!site.empty()) out.site.push_back(site[r]);
  }
  return out;
}

namespace {

bool parse_real(const std::string& s, double* out) {
  std::istringstream in(s);
  double v;
  in >> v;
  if (in.fail()) return false;
  char c;
  if (in >> c) return false;
  *out = v;
  return std::isfinite(v);
}

}  // namespace

double LabelTransform::apply_one(const std::string& raw) const {
  double coded;
  if (categorical) {
    if (raw == neg_class)
      coded = -1.0;
    else if (raw == pos_class)
      coded = 1.0;
    else
      throw ValidationError("unknown class label '" + raw + "'");
  } else {
    if (!parse_real(raw, &coded))
      throw ValidationError("non-numeric label '" + raw + "'");
  }
  return (coded - mean) / scale;
}

std::string LabelTransform::class_of_score(double score) const {
  // score 0 resolves to the -1-coded class
  const std::string& cls = score > 0.0 ? pos_class : neg_class;
  return cls;
}

std::pair<Vector, LabelTransform> standardize_labels(
    const std::vector<std::string>& labels_raw) {
  const auto n = static_cast<Eigen::Index>(labels_raw.size());
  if (n < 2) throw ValidationError("need at least 2 labels");

  std::set<std::string> distinct(labels_raw.begin(), labels_raw.end());
  if (distinct.size() < 2) throw ValidationError("degenerate labels");

  LabelTransform t;
  Vector coded(n);
  if (distinct.size() == 2) {
    t.categorical = true;
    auto it = distinct.begin();
    t.neg_class = *it++;
    t.pos_class = *it;
    for (Eigen::Index i = 0; i < n; ++i)
      coded[i] = labels_raw[i] == t.neg_class ? -1.0 : 1.0;
  } else {
    t.categorical = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!parse_real(labels_raw[i], &coded[i]))
        throw ValidationError(
            "more than two classes require numeric labels; got '" +
            labels_raw[i] + "'");
    }
  }

  t.mean = coded.mean();
  // population variance so unit variance is exact at any n
  const double var = (coded.array() - t.mean).square().mean();
  if (var <= 0.0) throw ValidationError("zero label variance");
  t.scale = std::sqrt(var);
  Vector y = (coded.array() - t.mean) / t.scale;
  return {std::move(y), t};
}

Vector apply_label_transform(const LabelTransform& t,
                             const std::vector<std::string>& labels_raw) {
  Vector y(labels_raw.size());
  for (size_t i = 0; i < labels_raw.size(); ++i)
    y[static_cast<Eigen::Index>(i)] = t.apply_one(labels_raw[i]);
  return y;
}

CovariateBasis build_covariate_basis(const Matrix& covariates_raw,
                                     const std::vector<std::string>& names,
                                     double rank_tol) {
  const auto n = covariates_raw.rows();
  const auto k_raw = covariates_raw.cols();
  if (n < 1) throw DimensionError("covariate matrix needs at least one row");
  if (k_raw > 0 && !covariates_raw.allFinite())
    throw ValidationError("non-finite covariate value");
  if (static_cast<Eigen::Index>(names.size()) != k_raw)
    throw DimensionError("covariate name count mismatch");

  CovariateBasis basis;
  basis.matrix.resize(n, k_raw + 1);
  basis.matrix.col(0).setOnes();
  basis.matrix.rightCols(k_raw) = covariates_raw;
  basis.column_names.reserve(k_raw + 1);
  basis.column_names.push_back("intercept");
  basis.column_names.insert(basis.column_names.end(), names.begin(),
                            names.end());

  const auto k = basis.matrix.cols();
  if (n < k)
    throw ValidationError("fewer subjects than covariate columns");

  Eigen::JacobiSVD<Matrix> svd(basis.matrix);
  const auto& sv = svd.singularValues();
  if (sv[k - 1] <= rank_tol * sv[0]) {
    // locate the first column that adds no numerical rank
    for (Eigen::Index j = 1; j < k; ++j) {
      Eigen::ColPivHouseholderQR<Matrix> qr(basis.matrix.leftCols(j + 1));
      qr.setThreshold(rank_tol);
      if (qr.rank() <= j)
        throw ValidationError("covariate column '" + basis.column_names[j] +
                              "' is collinear with intercept or preceding "
                              "covariates");
    }
    throw ValidationError("covariate matrix is rank deficient");
  }

  const Matrix gram = basis.matrix.transpose() * basis.matrix;
  basis.gram_inverse = gram.ldlt().solve(Matrix::Identity(k, k));
  return basis;
}

Matrix project_onto_covariates(const CovariateBasis& basis, const Matrix& v) {
  if (v.rows() != basis.n())
    throw DimensionError("projection input rows do not match basis");
  return basis.matrix * (basis.gram_inverse * (basis.matrix.transpose() * v));
}

Vector project_onto_covariates(const CovariateBasis& basis, const Vector& v) {
  if (v.rows() != basis.n())
    throw DimensionError("projection input rows do not match basis");
  return basis.matrix * (basis.gram_inverse * (basis.matrix.transpose() * v));
}

ResidualizerFit fit_residualizer(const Matrix& x, const CovariateBasis& basis) {
  if (x.rows() != basis.n())
    throw DimensionError("feature rows do not match covariate basis");
  ResidualizerFit fit;
  fit.coefficients = basis.gram_inverse * (basis.matrix.transpose() * x);
  return fit;
}

Matrix apply_residualizer(const ResidualizerFit& fit, const Matrix& x_new,
                          const Matrix& c_new) {
  if (c_new.cols() != fit.k())
    throw DimensionError("residualizer covariate count mismatch");
  if (c_new.rows() != x_new.rows())
    throw DimensionError("residualizer row count mismatch");
  return x_new - c_new * fit.coefficients;
}

Matrix apply_residualizer(const ResidualizerFit& fit, const Matrix& x_new,
                          const CovariateBasis& basis_new) {
  return apply_residualizer(fit, x_new, basis_new.matrix);
}

FeatureScaler fit_feature_scaler(const Matrix& x) {
  FeatureScaler s;
  s.mean = x.colwise().mean().transpose();
  s.std = ((x.rowwise() - s.mean.transpose()).array().square().colwise().mean())
              .sqrt()
              .transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j)
    if (s.std[j] <= 0.0) s.std[j] = 1.0;  // constant features pass through
  return s;
}

Matrix apply_feature_scaler(const FeatureScaler& s, const Matrix& x) {
  if (x.cols() != s.mean.size())
    throw DimensionError("feature scaler column mismatch");
  return (x.rowwise() - s.mean.transpose()).array().rowwise() /
         s.std.transpose().array();
}

}  // namespace gdm
