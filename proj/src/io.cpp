#include "gdm/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

namespace gdm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw ValidationError("empty file '" + path + "'");
  return rows;
}

double parse_numeric_cell(const std::string& cell, size_t row,
                          const std::string& column) {
  std::istringstream in(cell);
  double v;
  in >> v;
  char c;
  if (in.fail() || (in >> c))
    throw ValidationError("non-numeric value '" + cell + "' at row " +
                          std::to_string(row) + ", column '" + column + "'");
  return v;
}

}  // namespace

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Cohort load_cohort(const std::string& path) {
  const auto rows = read_csv(path);
  const auto& header = rows.front();

  Eigen::Index id_col = -1, label_col = -1, site_col = -1;
  std::vector<Eigen::Index> cov_cols, feat_cols;
  for (size_t j = 0; j < header.size(); ++j) {
    const auto& h = header[j];
    const auto jj = static_cast<Eigen::Index>(j);
    if (h == "subject_id")
      id_col = jj;
    else if (h == "label")
      label_col = jj;
    else if (h == "site")
      site_col = jj;
    else if (h.rfind("cov_", 0) == 0)
      cov_cols.push_back(jj);
    else
      feat_cols.push_back(jj);
  }
  if (id_col < 0) throw ValidationError("missing reserved column subject_id");
  if (label_col < 0) throw ValidationError("missing reserved column label");
  if (feat_cols.empty()) throw ValidationError("no feature columns found");

  const auto n = static_cast<Eigen::Index>(rows.size()) - 1;
  Cohort co;
  co.features.resize(n, static_cast<Eigen::Index>(feat_cols.size()));
  co.covariates_raw.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
  for (auto j : cov_cols)
    co.covariate_names.push_back(header[j].substr(4));
  for (auto j : feat_cols) co.feature_names.push_back(header[j]);

  std::set<std::string> seen_ids;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[i + 1];
    if (r.size() != header.size())
      throw ValidationError("row " + std::to_string(i + 1) +
                            " has wrong field count");
    const auto& id = r[id_col];
    if (!seen_ids.insert(id).second)
      throw ValidationError("duplicate subject_id '" + id + "'");
    co.subject_ids.push_back(id);
    co.labels_raw.push_back(r[label_col]);
    if (site_col >= 0) co.site.push_back(r[site_col]);
    for (size_t j = 0; j < cov_cols.size(); ++j)
      co.covariates_raw(i, static_cast<Eigen::Index>(j)) =
          parse_numeric_cell(r[cov_cols[j]], i + 1, header[cov_cols[j]]);
    for (size_t j = 0; j < feat_cols.size(); ++j)
      co.features(i, static_cast<Eigen::Index>(j)) =
          parse_numeric_cell(r[feat_cols[j]], i + 1, header[feat_cols[j]]);
  }
  co.validate();
  return co;
}

Cohort load_cohort_split(const std::string& features_path,
                         const std::string& labels_path,
                         const std::string& covariates_path,
                         const std::string& site_path) {
  const auto feat = read_csv(features_path);
  const auto labs = read_csv(labels_path);
  if (feat.front().empty() || feat.front()[0] != "subject_id")
    throw ValidationError("features table must start with subject_id");
  if (labs.front().size() < 2 || labs.front()[0] != "subject_id" ||
      labs.front()[1] != "label")
    throw ValidationError("labels table must be subject_id,label");
  if (feat.size() != labs.size())
    throw ValidationError("features and labels row counts differ");

  const auto n = static_cast<Eigen::Index>(feat.size()) - 1;
  const auto d = static_cast<Eigen::Index>(feat.front().size()) - 1;
  Cohort co;
  co.features.resize(n, d);
  co.covariates_raw.resize(n, 0);
  for (Eigen::Index j = 0; j < d; ++j)
    co.feature_names.push_back(feat.front()[j + 1]);

  std::set<std::string> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = feat[i + 1];
    const auto& id = r[0];
    if (labs[i + 1][0] != id)
      throw ValidationError("subject_id mismatch between tables at row " +
                            std::to_string(i + 1));
    if (!seen.insert(id).second)
      throw ValidationError("duplicate subject_id '" + id + "'");
    co.subject_ids.push_back(id);
    co.labels_raw.push_back(labs[i + 1][1]);
    for (Eigen::Index j = 0; j < d; ++j)
      co.features(i, j) = parse_numeric_cell(r[j + 1], i + 1,
                                             co.feature_names[j]);
  }

  if (!covariates_path.empty()) {
    const auto cov = read_csv(covariates_path);
    if (cov.size() != feat.size())
      throw ValidationError("covariates row count mismatch");
    const auto k = static_cast<Eigen::Index>(cov.front().size()) - 1;
    co.covariates_raw.resize(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      std::string name = cov.front()[j + 1];
      if (name.rfind("cov_", 0) == 0) name = name.substr(4);
      co.covariate_names.push_back(name);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (cov[i + 1][0] != co.subject_ids[i])
        throw ValidationError("subject_id mismatch in covariates table");
      for (Eigen::Index j = 0; j < k; ++j)
        co.covariates_raw(i, j) = parse_numeric_cell(
            cov[i + 1][j + 1], i + 1, co.covariate_names[j]);
    }
  }
  if (!site_path.empty()) {
    const auto st = read_csv(site_path);
    if (st.size() != feat.size())
      throw ValidationError("site row count mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (st[i + 1][0] != co.subject_ids[i])
        throw ValidationError("subject_id mismatch in site table");
      co.site.push_back(st[i + 1][1]);
    }
  }
  co.validate();
  return co;
}

void save_cohort(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "subject_id,label";
  if (!cohort.site.empty()) out << ",site";
  for (const auto& c : cohort.covariate_names) out << ",cov_" << c;
  for (const auto& f : cohort.feature_names) out << "," << f;
  out << "\n";
  for (Eigen::Index i = 0; i < cohort.n(); ++i) {
    out << cohort.subject_ids[i] << "," << cohort.labels_raw[i];
    if (!cohort.site.empty()) out << "," << cohort.site[i];
    for (Eigen::Index j = 0; j < cohort.k_raw(); ++j)
      out << "," << format_value(cohort.covariates_raw(i, j));
    for (Eigen::Index j = 0; j < cohort.d(); ++j)
      out << "," << format_value(cohort.features(i, j));
    out << "\n";
  }
}

void write_parameters_csv(const std::string& path,
                          const std::vector<std::string>& feature_names,
                          const Vector& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "feature_name,J\n";
  for (Eigen::Index i = 0; i < j.size(); ++i)
    out << feature_names[i] << "," << format_value(j[i]) << "\n";
}

void write_gdm_sidecar_csv(const std::string& path, const GdmModel& model,
                           const std::vector<std::string>& feature_names,
                           const std::vector<std::string>& covariate_names) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "row";
  for (const auto& c : covariate_names) out << "," << c;
  out << "\n";
  out << "W0";
  for (Eigen::Index j = 0; j < model.w0.size(); ++j)
    out << "," << format_value(model.w0[j]);
  out << "\n";
  for (Eigen::Index i = 0; i < model.a0.rows(); ++i) {
    out << "A0:" << feature_names[i];
    for (Eigen::Index j = 0; j < model.a0.cols(); ++j)
      out << "," << format_value(model.a0(i, j));
    out << "\n";
  }
}

void write_inference_csv(const std::string& path,
                         const std::vector<std::string>& feature_names,
                         const InferenceResult& result) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "feature_name,J,sigma,p,q_rejected\n";
  for (Eigen::Index i = 0; i < result.j.size(); ++i)
    out << feature_names[i] << "," << format_value(result.j[i]) << ","
        << format_value(result.sigma[i]) << "," << format_value(result.p_raw[i])
        << "," << (result.rejected[i] ? 1 : 0) << "\n";
}

void write_agreement_csv(const std::string& path, const AgreementCurve& curve) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "n_perm,mean_abs_error\n";
  for (const auto& pt : curve.points)
    out << pt.n_perm << "," << format_value(pt.mean_abs_error) << "\n";
}

void write_truth_csv(const std::string& path, const GroundTruth& truth,
                     const std::vector<std::string>& feature_names) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << "feature_name,beta_true,beta_age,associated\n";
  for (Eigen::Index i = 0; i < truth.beta_true.size(); ++i)
    out << feature_names[i] << "," << format_value(truth.beta_true[i]) << ","
        << format_value(truth.beta_age[i]) << ","
        << (truth.associated[i] ? 1 : 0) << "\n";
}

nlohmann::json hyper_json(const HyperChoice& h) {
  return {{"lambda1", h.lambda1}, {"lambda2", h.lambda2}};
}

nlohmann::json eval_report_json(const EvalReport& report) {
  nlohmann::json chosen = nlohmann::json::array();
  for (const auto& h : report.chosen_hyperparams) chosen.push_back(hyper_json(h));
  const auto& acc = report.per_repeat_accuracy;
  const double mean =
      std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
  return {{"method", report.method_id},
          {"per_repeat_accuracy", acc},
          {"mean_accuracy", mean},
          {"pairwise_reproducibility", report.repro.pairwise},
          {"reproducibility_mean", report.repro.mean},
          {"reproducibility_std", report.repro.stddev},
          {"chosen_hyperparams", chosen}};
}

nlohmann::json multisite_report_json(const MultiSiteReport& report) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.pairs)
    pairs.push_back({{"train_site", p.train_site},
                     {"test_site", p.test_site},
                     {"accuracies", p.accuracies},
                     {"mean_accuracy", p.mean_accuracy}});
  nlohmann::json repro;
  for (const auto& [site, r] : report.repro_by_train_site)
    repro[site] = {{"pairwise", r.pairwise},
                   {"mean", r.mean},
                   {"std", r.stddev}};
  return {{"method", report.method_id},
          {"pairs", pairs},
          {"reproducibility_by_train_site", repro}};
}

}  // namespace gdm
