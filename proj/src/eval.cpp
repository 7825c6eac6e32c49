#include "gdm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace gdm {

std::string method_name(Method m) {
  switch (m) {
    case Method::Gdm: return "gdm";
    case Method::Ridge: return "ridge";
    case Method::Haufe: return "haufe";
  }
  return "?";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 step over seed + index
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ScenarioSpec ScenarioSpec::for_case(int case_id, std::uint64_t seed,
                                    const std::string& patient_class,
                                    double train_fraction) {
  ScenarioSpec s;
  s.case_id = case_id;
  s.seed = seed;
  s.patient_class = patient_class;
  s.train_fraction = train_fraction;
  switch (case_id) {
    case 1: s.class_ratio = 0.5; s.age_policy = AgePolicy::Balanced; break;
    case 2: s.class_ratio = 0.25; s.age_policy = AgePolicy::Balanced; break;
    case 3:
      s.class_ratio = 0.5;
      s.age_policy = AgePolicy::OldestPatientsYoungestControls;
      break;
    case 4:
      s.class_ratio = 0.25;
      s.age_policy = AgePolicy::OldestPatientsYoungestControls;
      break;
    default: throw ValidationError("case_id must be in 1..4");
  }
  return s;
}

void ScenarioSpec::validate() const {
  if (case_id < 1 || case_id > 4)
    throw ValidationError("case_id must be in 1..4");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train_fraction must be in (0, 1)");
  if (!(class_ratio > 0.0 && class_ratio < 1.0))
    throw ValidationError("class_ratio must be in (0, 1)");
  const ScenarioSpec ref = for_case(case_id, seed, patient_class, train_fraction);
  if (ref.class_ratio != class_ratio || ref.age_policy != age_policy)
    throw ValidationError("scenario fields inconsistent with case_id");
}

namespace {

Eigen::Index age_column(const Cohort& cohort) {
  for (size_t j = 0; j < cohort.covariate_names.size(); ++j)
    if (cohort.covariate_names[j] == "age")
      return static_cast<Eigen::Index>(j);
  throw ValidationError("cohort has no 'age' covariate");
}

double mean_age(const std::vector<Eigen::Index>& idx, const Vector& ages) {
  double s = 0.0;
  for (auto i : idx) s += ages[i];
  return s / static_cast<double>(idx.size());
}

// Swap members in/out of `selected` (against `pool`) until the selected
// mean age is within tol of `target`.
void balance_mean_age(std::vector<Eigen::Index>& selected,
                      std::vector<Eigen::Index>& pool, const Vector& ages,
                      double target, double tol) {
  for (int iter = 0; iter < 200; ++iter) {
    const double cur = mean_age(selected, ages);
    if (std::abs(cur - target) <= tol || pool.empty()) return;
    const double m = static_cast<double>(selected.size());
    double best_gain = 0.0;
    size_t best_in = 0, best_out = 0;
    for (size_t a = 0; a < selected.size(); ++a) {
      for (size_t b = 0; b < pool.size(); ++b) {
        const double next =
            cur + (ages[pool[b]] - ages[selected[a]]) / m;
        const double gain = std::abs(cur - target) - std::abs(next - target);
        if (gain > best_gain) {
          best_gain = gain;
          best_in = b;
          best_out = a;
        }
      }
    }
    if (best_gain <= 0.0) return;
    std::swap(selected[best_out], pool[best_in]);
  }
}

}  // namespace

SplitIndices sample_scenario(const Cohort& cohort, const ScenarioSpec& spec) {
  spec.validate();
  cohort.validate();
  const auto age_col = age_column(cohort);
  const Vector ages = cohort.covariates_raw.col(age_col);
  const double age_std = std::sqrt(
      (ages.array() - ages.mean()).square().mean());
  const double tol = 0.25 * std::max(age_std, 1e-9);

  std::vector<Eigen::Index> patients, controls;
  std::set<std::string> classes(cohort.labels_raw.begin(),
                                cohort.labels_raw.end());
  if (classes.size() != 2)
    throw ValidationError("scenario sampling needs exactly two classes");
  if (classes.count(spec.patient_class) == 0)
    throw ValidationError("patient class '" + spec.patient_class +
                          "' not present in cohort");
  for (Eigen::Index i = 0; i < cohort.n(); ++i)
    (cohort.labels_raw[i] == spec.patient_class ? patients : controls)
        .push_back(i);

  const auto n = cohort.n();
  const auto n_train =
      static_cast<Eigen::Index>(std::lround(spec.train_fraction * n));
  const auto n_tp =
      static_cast<Eigen::Index>(std::lround(spec.class_ratio * n_train));
  const auto n_tc = n_train - n_tp;
  if (n_tp < 1 || n_tc < 1 ||
      n_tp + 1 > static_cast<Eigen::Index>(patients.size()) ||
      n_tc + 1 > static_cast<Eigen::Index>(controls.size()))
    throw ValidationError("insufficient subjects for requested scenario");

  std::mt19937_64 rng(spec.seed);
  std::shuffle(patients.begin(), patients.end(), rng);
  std::shuffle(controls.begin(), controls.end(), rng);

  // Hold out a seeded random test pool per class before composing the
  // training set; without this, the extreme-tails policy is deterministic
  // and repeated draws collapse onto a single split.
  const auto hold_p = std::min<Eigen::Index>(
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(patients.size()) / 3),
      static_cast<Eigen::Index>(patients.size()) - n_tp);
  const auto hold_c = std::min<Eigen::Index>(
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(controls.size()) / 3),
      static_cast<Eigen::Index>(controls.size()) - n_tc);
  std::vector<Eigen::Index> rest_p(patients.begin(), patients.begin() + hold_p);
  std::vector<Eigen::Index> rest_c(controls.begin(), controls.begin() + hold_c);
  std::vector<Eigen::Index> avail_p(patients.begin() + hold_p, patients.end());
  std::vector<Eigen::Index> avail_c(controls.begin() + hold_c, controls.end());

  std::vector<Eigen::Index> train_p, train_c;
  if (spec.age_policy == AgePolicy::OldestPatientsYoungestControls) {
    std::sort(avail_p.begin(), avail_p.end(),
              [&](auto a, auto b) { return ages[a] > ages[b]; });
    train_p.assign(avail_p.begin(), avail_p.begin() + n_tp);
    std::sort(avail_c.begin(), avail_c.end(),
              [&](auto a, auto b) { return ages[a] < ages[b]; });
    train_c.assign(avail_c.begin(), avail_c.begin() + n_tc);
  } else {
    train_p.assign(avail_p.begin(), avail_p.begin() + n_tp);
    train_c.assign(avail_c.begin(), avail_c.begin() + n_tc);
    std::vector<Eigen::Index> pool_p(avail_p.begin() + n_tp, avail_p.end());
    std::vector<Eigen::Index> pool_c(avail_c.begin() + n_tc, avail_c.end());
    // match the two class means greedily
    balance_mean_age(train_p, pool_p, ages, mean_age(train_c, ages), tol / 2);
    balance_mean_age(train_c, pool_c, ages, mean_age(train_p, ages), tol / 2);
  }

  // equal class counts; nearest-age pairing from the larger class
  auto& small = rest_p.size() <= rest_c.size() ? rest_p : rest_c;
  auto& large = rest_p.size() <= rest_c.size() ? rest_c : rest_p;
  std::vector<bool> used(large.size(), false);
  std::vector<Eigen::Index> pick_large;
  for (auto i : small) {
    double best = std::numeric_limits<double>::infinity();
    size_t best_j = 0;
    for (size_t j = 0; j < large.size(); ++j) {
      if (used[j]) continue;
      const double gap = std::abs(ages[large[j]] - ages[i]);
      if (gap < best) {
        best = gap;
        best_j = j;
      }
    }
    used[best_j] = true;
    pick_large.push_back(large[best_j]);
  }

  SplitIndices split;
  split.train = train_p;
  split.train.insert(split.train.end(), train_c.begin(), train_c.end());
  split.test = small;
  split.test.insert(split.test.end(), pick_large.begin(), pick_large.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<double> default_lambda_axis() {
  std::vector<double> axis;
  for (int e = -5; e <= 2; ++e) axis.push_back(std::pow(10.0, e));
  return axis;
}

std::vector<HyperChoice> default_grid(Method m) {
  std::vector<HyperChoice> grid;
  const auto axis = default_lambda_axis();
  if (m == Method::Gdm) {
    for (double l2 : axis)
      for (double l1 : axis) grid.push_back({l1, l2});
  } else {
    for (double l1 : axis) grid.push_back({l1, 0.0});
  }
  return grid;
}

FittedMethod fit_method(const Cohort& train, Method method,
                        const HyperChoice& hyper) {
  FittedMethod fit;
  fit.method = method;
  fit.hyper = hyper;

  auto [y, lt] = standardize_labels(train.labels_raw);
  fit.basis = build_covariate_basis(train.covariates_raw,
                                    train.covariate_names);

  if (method == Method::Gdm) {
    GdmHyperParams hp{hyper.lambda1, hyper.lambda2};
    fit.gdm = fit_gdm(train.features, y, fit.basis, hp);
    fit.gdm.label_transform = lt;
    fit.pattern = fit.gdm.j;
  } else {
    fit.residualizer = fit_residualizer(train.features, fit.basis);
    const Matrix x_res =
        apply_residualizer(fit.residualizer, train.features, fit.basis);
    fit.ridge = fit_ridge(x_res, y, hyper.lambda1);
    fit.ridge.residualizer = fit.residualizer;
    fit.ridge.label_transform = lt;
    fit.pattern = method == Method::Haufe
                      ? haufe_transform(fit.ridge, x_res).a
                      : fit.ridge.w;
  }
  return fit;
}

std::vector<std::string> predict_labels(const FittedMethod& fit,
                                        const Cohort& test) {
  if (fit.method == Method::Gdm) {
    Matrix c_new(test.n(), test.k_raw() + 1);
    c_new.col(0).setOnes();
    c_new.rightCols(test.k_raw()) = test.covariates_raw;
    return predict(fit.gdm, test.features, c_new).classes;
  }
  Matrix c_new(test.n(), test.k_raw() + 1);
  c_new.col(0).setOnes();
  c_new.rightCols(test.k_raw()) = test.covariates_raw;
  const Matrix x_res = apply_residualizer(fit.residualizer, test.features,
                                          c_new);
  const Vector scores = ridge_scores(fit.ridge, x_res);
  std::vector<std::string> classes;
  classes.reserve(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    classes.push_back(fit.ridge.label_transform.class_of_score(scores[i]));
  return classes;
}

double accuracy(const FittedMethod& fit, const Cohort& test) {
  const auto pred = predict_labels(fit, test);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test.n(); ++i)
    if (pred[i] == test.labels_raw[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test.n());
}

namespace {

std::vector<std::vector<Eigen::Index>> stratified_folds(
    const Cohort& cohort, int folds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::map<std::string, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < cohort.n(); ++i)
    by_class[cohort.labels_raw[i]].push_back(i);

  std::vector<std::vector<Eigen::Index>> fold_idx(folds);
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t i = 0; i < idx.size(); ++i)
      fold_idx[i % folds].push_back(idx[i]);
  }
  return fold_idx;
}

bool grid_less(const HyperChoice& a, const HyperChoice& b) {
  // tie-break preference: smaller lambda2, then smaller lambda1
  if (a.lambda2 != b.lambda2) return a.lambda2 < b.lambda2;
  return a.lambda1 < b.lambda1;
}

}  // namespace

HyperChoice cross_validate(const Cohort& train, Method method,
                           const std::vector<HyperChoice>& grid, int folds,
                           std::uint64_t seed) {
  if (grid.empty()) throw ValidationError("empty hyperparameter grid");
  if (folds < 2) throw ValidationError("need at least 2 CV folds");
  if (grid.size() == 1) return grid.front();

  auto ordered = grid;
  std::sort(ordered.begin(), ordered.end(), grid_less);

  const auto fold_idx = stratified_folds(train, folds, seed);

  // precompute fold splits once
  std::vector<Cohort> fold_train, fold_val;
  for (int f = 0; f < folds; ++f) {
    if (fold_idx[f].empty()) continue;
    std::vector<Eigen::Index> tr;
    for (int g = 0; g < folds; ++g)
      if (g != f) tr.insert(tr.end(), fold_idx[g].begin(), fold_idx[g].end());
    std::sort(tr.begin(), tr.end());
    auto va = fold_idx[f];
    std::sort(va.begin(), va.end());
    Cohort ct = train.subset(tr);
    std::set<std::string> cls(ct.labels_raw.begin(), ct.labels_raw.end());
    if (cls.size() < 2)
      throw ValidationError("CV training fold has a single class");
    fold_train.push_back(std::move(ct));
    fold_val.push_back(train.subset(va));
  }

  HyperChoice best = ordered.front();
  double best_acc = -1.0;
  for (const auto& h : ordered) {
    double acc_sum = 0.0;
    for (size_t f = 0; f < fold_train.size(); ++f) {
      const auto fit = fit_method(fold_train[f], method, h);
      acc_sum += accuracy(fit, fold_val[f]);
    }
    const double mean_acc = acc_sum / static_cast<double>(fold_train.size());
    if (mean_acc > best_acc) {
      best_acc = mean_acc;
      best = h;
    }
  }
  return best;
}

ReproStats reproducibility(const std::vector<Vector>& patterns) {
  if (patterns.size() < 2)
    throw ValidationError("reproducibility needs at least 2 vectors");
  const auto len = patterns.front().size();
  ReproStats stats;
  for (size_t a = 0; a < patterns.size(); ++a) {
    if (patterns[a].size() != len)
      throw DimensionError("reproducibility vector length mismatch");
    if (patterns[a].norm() <= 0.0)
      throw ValidationError("zero-norm parameter vector");
  }
  for (size_t a = 0; a < patterns.size(); ++a)
    for (size_t b = a + 1; b < patterns.size(); ++b)
      stats.pairwise.push_back(patterns[a].dot(patterns[b]) /
                               (patterns[a].norm() * patterns[b].norm()));
  const double m = std::accumulate(stats.pairwise.begin(),
                                   stats.pairwise.end(), 0.0) /
                   stats.pairwise.size();
  double var = 0.0;
  for (double c : stats.pairwise) var += (c - m) * (c - m);
  stats.mean = m;
  stats.stddev = std::sqrt(var / stats.pairwise.size());
  return stats;
}

std::map<Method, EvalReport> repeated_holdout(
    const Cohort& cohort, const ScenarioSpec& spec,
    const std::vector<Method>& methods, int repeats, std::uint64_t seed,
    const std::vector<HyperChoice>* grid_override, int cv_folds) {
  if (repeats < 2) throw ValidationError("need at least 2 repeats");

  std::map<Method, EvalReport> reports;
  std::map<Method, std::vector<Vector>> patterns;
  for (auto m : methods) reports[m].method_id = method_name(m);

  for (int r = 0; r < repeats; ++r) {
    ScenarioSpec rspec = spec;
    rspec.seed = derive_seed(seed, static_cast<std::uint64_t>(r) * 2);
    const auto split = sample_scenario(cohort, rspec);
    const Cohort train = cohort.subset(split.train);
    const Cohort test = cohort.subset(split.test);
    const std::uint64_t cv_seed =
        derive_seed(seed, static_cast<std::uint64_t>(r) * 2 + 1);

    // ridge and haufe share the CV and the underlying fit
    std::optional<HyperChoice> ridge_best;
    for (auto m : methods) {
      HyperChoice best;
      if (m != Method::Gdm && ridge_best) {
        best = *ridge_best;
      } else {
        const auto grid =
            grid_override ? *grid_override : default_grid(m);
        best = cross_validate(train, m, grid, cv_folds, cv_seed);
        if (m != Method::Gdm) ridge_best = best;
      }
      const auto fit = fit_method(train, m, best);
      reports[m].per_repeat_accuracy.push_back(accuracy(fit, test));
      reports[m].chosen_hyperparams.push_back(best);
      patterns[m].push_back(fit.pattern);
    }
  }

  for (auto m : methods) reports[m].repro = reproducibility(patterns[m]);
  return reports;
}

std::map<Method, MultiSiteReport> multi_site_protocol(
    const Cohort& cohort, const std::vector<Method>& methods, int resamples,
    double train_fraction, std::uint64_t seed,
    const std::vector<HyperChoice>* grid_override, int cv_folds) {
  cohort.validate();
  if (resamples < 1) throw ValidationError("need at least 1 resample");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw ValidationError("train_fraction must be in (0, 1]");
  const auto sites = cohort.distinct_sites();
  if (sites.size() < 2)
    throw ValidationError("multi-site protocol needs at least 2 sites");

  const std::set<std::string> global_classes(cohort.labels_raw.begin(),
                                             cohort.labels_raw.end());
  std::map<std::string, std::vector<Eigen::Index>> by_site;
  for (Eigen::Index i = 0; i < cohort.n(); ++i)
    by_site[cohort.site[i]].push_back(i);
  for (const auto& s : sites) {
    std::set<std::string> site_classes;
    for (auto i : by_site[s]) site_classes.insert(cohort.labels_raw[i]);
    if (site_classes != global_classes)
      throw ValidationError("site '" + s +
                            "' label coding inconsistent with cohort");
  }

  std::map<Method, MultiSiteReport> reports;
  for (auto m : methods) reports[m].method_id = method_name(m);
  std::map<Method, std::map<std::string, std::vector<Vector>>> patterns;

  std::uint64_t tick = 0;
  for (const auto& train_site : sites) {
    std::map<Method, std::map<std::string, SitePairResult>> pair_acc;

    for (int t = 0; t < resamples; ++t) {
      // stratified resample of train_fraction of the site
      std::map<std::string, std::vector<Eigen::Index>> by_class;
      for (auto i : by_site[train_site])
        by_class[cohort.labels_raw[i]].push_back(i);
      std::mt19937_64 rng(derive_seed(seed, tick++));
      std::vector<Eigen::Index> train_idx;
      for (auto& [cls, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        auto take = static_cast<size_t>(
            std::lround(train_fraction * static_cast<double>(idx.size())));
        take = std::clamp<size_t>(take, 2, idx.size());
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + take);
      }
      std::sort(train_idx.begin(), train_idx.end());
      const Cohort train = cohort.subset(train_idx);
      const std::uint64_t cv_seed = derive_seed(seed, tick++);

      std::optional<HyperChoice> ridge_best;
      for (auto m : methods) {
        HyperChoice best;
        if (m != Method::Gdm && ridge_best) {
          best = *ridge_best;
        } else {
          const auto grid =
              grid_override ? *grid_override : default_grid(m);
          best = cross_validate(train, m, grid, cv_folds, cv_seed);
          if (m != Method::Gdm) ridge_best = best;
        }
        const auto fit = fit_method(train, m, best);
        patterns[m][train_site].push_back(fit.pattern);
        reports[m].chosen_hyperparams.push_back(best);
        for (const auto& test_site : sites) {
          if (test_site == train_site) continue;
          auto& pr = pair_acc[m][test_site];
          pr.train_site = train_site;
          pr.test_site = test_site;
          pr.accuracies.push_back(
              accuracy(fit, cohort.subset(by_site[test_site])));
        }
      }
    }

    for (auto m : methods) {
      for (auto& [test_site, pr] : pair_acc[m]) {
        pr.mean_accuracy =
            std::accumulate(pr.accuracies.begin(), pr.accuracies.end(), 0.0) /
            pr.accuracies.size();
        reports[m].pairs.push_back(pr);
      }
      reports[m].repro_by_train_site[train_site] =
          reproducibility(patterns[m][train_site]);
    }
  }
  return reports;
}

}  // namespace gdm
