#pragma once

#include <cstdint>
#include <map>

#include "gdm/baselines.hpp"
#include "gdm/solver.hpp"

namespace gdm {

enum class Method { Gdm, Ridge, Haufe };

std::string method_name(Method m);

enum class AgePolicy { Balanced, OldestPatientsYoungestControls };

// Confounded training-set construction; cases 1-4 in increasing potential
// for confounding.
struct ScenarioSpec {
  int case_id = 1;
  double train_fraction = 0.5;
  double class_ratio = 0.5;  // patients fraction in the training set
  AgePolicy age_policy = AgePolicy::Balanced;
  std::string patient_class = "patient";
  std::uint64_t seed = 0;

  static ScenarioSpec for_case(int case_id, std::uint64_t seed,
                               const std::string& patient_class = "patient",
                               double train_fraction = 0.5);
  void validate() const;
};

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

// Training set per case policy; test set with equal class counts and
// balanced mean age, disjoint from training.
SplitIndices sample_scenario(const Cohort& cohort, const ScenarioSpec& spec);

struct HyperChoice {
  double lambda1 = 1.0;
  double lambda2 = 0.0;  // ridge/haufe use the lambda1 axis only
};

std::vector<double> default_lambda_axis();         // {1e-5, ..., 1e2}
std::vector<HyperChoice> default_grid(Method m);

HyperChoice cross_validate(const Cohort& train, Method method,
                           const std::vector<HyperChoice>& grid, int folds,
                           std::uint64_t seed);

// One method fitted on a training cohort, ready for out-of-sample scoring.
struct FittedMethod {
  Method method = Method::Gdm;
  HyperChoice hyper;
  GdmModel gdm;
  CovariateBasis basis;
  RidgeModel ridge;
  ResidualizerFit residualizer;
  Vector pattern;  // J, w, or a; the vector entering reproducibility
};

FittedMethod fit_method(const Cohort& train, Method method,
                        const HyperChoice& hyper);
std::vector<std::string> predict_labels(const FittedMethod& fit,
                                        const Cohort& test);
double accuracy(const FittedMethod& fit, const Cohort& test);

struct ReproStats {
  std::vector<double> pairwise;  // all pairwise cosines
  double mean = 0.0;
  double stddev = 0.0;
};

ReproStats reproducibility(const std::vector<Vector>& patterns);

struct EvalReport {
  std::string method_id;
  std::vector<double> per_repeat_accuracy;
  ReproStats repro;
  std::vector<HyperChoice> chosen_hyperparams;
};

std::map<Method, EvalReport> repeated_holdout(
    const Cohort& cohort, const ScenarioSpec& spec,
    const std::vector<Method>& methods, int repeats, std::uint64_t seed,
    const std::vector<HyperChoice>* grid_override = nullptr, int cv_folds = 5);

struct SitePairResult {
  std::string train_site;
  std::string test_site;
  std::vector<double> accuracies;  // one per resample
  double mean_accuracy = 0.0;
};

struct MultiSiteReport {
  std::string method_id;
  std::vector<SitePairResult> pairs;
  std::map<std::string, ReproStats> repro_by_train_site;
  std::vector<HyperChoice> chosen_hyperparams;
};

std::map<Method, MultiSiteReport> multi_site_protocol(
    const Cohort& cohort, const std::vector<Method>& methods, int resamples,
    double train_fraction, std::uint64_t seed,
    const std::vector<HyperChoice>* grid_override = nullptr, int cv_folds = 5);

// Deterministic fan-out of a top-level seed into per-repeat seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace gdm
