#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "gdm/eval.hpp"
#include "gdm/inference.hpp"
#include "gdm/synth.hpp"

namespace gdm {

// Single-table CSV: header row with reserved columns subject_id, label,
// optional site, covariates prefixed cov_, all remaining numeric columns
// are features. Row order preserved.
Cohort load_cohort(const std::string& path);

// Split form: features table (subject_id + numeric columns) joined by
// subject_id order with labels (subject_id,label), optional covariates
// (subject_id,cov_*) and site (subject_id,site) tables.
Cohort load_cohort_split(const std::string& features_path,
                         const std::string& labels_path,
                         const std::string& covariates_path = "",
                         const std::string& site_path = "");

// Values serialized with 17 significant digits; load(save(c)) is
// bit-identical.
void save_cohort(const Cohort& cohort, const std::string& path);

std::string format_value(double v);  // %.17g

void write_parameters_csv(const std::string& path,
                          const std::vector<std::string>& feature_names,
                          const Vector& j);
// W0 and per-feature A0 rows for a GDM fit.
void write_gdm_sidecar_csv(const std::string& path, const GdmModel& model,
                           const std::vector<std::string>& feature_names,
                           const std::vector<std::string>& covariate_names);
void write_inference_csv(const std::string& path,
                         const std::vector<std::string>& feature_names,
                         const InferenceResult& result);
void write_agreement_csv(const std::string& path, const AgreementCurve& curve);
void write_truth_csv(const std::string& path, const GroundTruth& truth,
                     const std::vector<std::string>& feature_names);

nlohmann::json hyper_json(const HyperChoice& h);
nlohmann::json eval_report_json(const EvalReport& report);
nlohmann::json multisite_report_json(const MultiSiteReport& report);

}  // namespace gdm
