#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "gdm/eval.hpp"
#include "gdm/inference.hpp"
#include "gdm/synth.hpp"

using namespace gdm;

TEST_CASE("generation is deterministic under seed") {
  GeneratorSpec spec;
  spec.n_per_site = {20};
  spec.d = 10;
  spec.seed = 5;
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK((a.cohort.features - b.cohort.features).norm() == 0.0);
  CHECK(a.cohort.labels_raw == b.cohort.labels_raw);
  spec.seed = 6;
  CHECK((generate(spec).cohort.features - a.cohort.features).norm() != 0.0);
}

TEST_CASE("noiseless single-site cohort is exactly the rank-one signal") {
  GeneratorSpec spec;
  spec.n_per_site = {16};
  spec.d = 8;
  spec.effect_support = 4;
  spec.effect_amplitude = 2.0;
  spec.noise_std = 0.0;
  spec.age_effect_amplitude = 0.0;
  spec.site_offsets_amplitude = 0.0;
  spec.seed = 1;
  const auto synth = generate(spec);
  for (Eigen::Index i = 0; i < synth.cohort.n(); ++i) {
    const double g = synth.cohort.labels_raw[i] == "patient" ? 1.0 : -1.0;
    CHECK((synth.cohort.features.row(i).transpose() - g * synth.truth.beta_true)
              .norm() == 0.0);
  }

  // any fitted model separates it perfectly
  const auto fit = fit_method(synth.cohort, Method::Gdm, {1.0, 1.0});
  CHECK(accuracy(fit, synth.cohort) == 1.0);
}

TEST_CASE("truth record flags the support") {
  GeneratorSpec spec;
  spec.n_per_site = {10};
  spec.d = 20;
  spec.effect_support = 5;
  spec.seed = 2;
  const auto synth = generate(spec);
  int flagged = 0;
  for (Eigen::Index j = 0; j < spec.d; ++j) {
    CHECK(synth.truth.associated[j] == (synth.truth.beta_true[j] != 0.0));
    flagged += synth.truth.associated[j];
  }
  CHECK(flagged == 5);
}

TEST_CASE("null cohort yields approximately uniform analytic p-values") {
  GeneratorSpec spec;
  spec.n_per_site = {80};
  spec.d = 500;
  spec.effect_amplitude = 0.0;
  spec.noise_std = 1.0;
  spec.seed = 3;
  const auto synth = generate(spec);
  auto [y, lt] = standardize_labels(synth.cohort.labels_raw);
  const auto basis = build_covariate_basis(synth.cohort.covariates_raw,
                                           synth.cohort.covariate_names);
  GdmHyperParams hp{1.0, 1.0};
  const auto model = fit_gdm(synth.cohort.features, y, basis, hp);
  const auto null = analytic_null(
      build_q_matrix(synth.cohort.features, y, basis, hp));
  auto pv = analytic_pvalues(model.j, null);

  // Kolmogorov-Smirnov statistic against Uniform(0,1)
  std::sort(pv.p.data(), pv.p.data() + pv.p.size());
  double ks = 0.0;
  for (Eigen::Index i = 0; i < pv.p.size(); ++i) {
    const double cdf = static_cast<double>(i + 1) / pv.p.size();
    ks = std::max(ks, std::abs(cdf - pv.p[i]));
    ks = std::max(ks, std::abs(static_cast<double>(i) / pv.p.size() - pv.p[i]));
  }
  CHECK(ks < 0.1);
}

TEST_CASE("empirical moments converge at large n") {
  GeneratorSpec spec;
  spec.n_per_site = {10000};
  spec.d = 6;
  spec.effect_support = 2;
  spec.effect_amplitude = 1.0;
  spec.noise_std = 1.0;
  spec.seed = 4;
  const auto synth = generate(spec);
  // group-balanced design: feature means converge to 0 for signal-only
  // features, noise std converges to noise_std
  const Vector mean = synth.cohort.features.colwise().mean();
  for (Eigen::Index j = 0; j < spec.d; ++j)
    CHECK(std::abs(mean[j]) <=
          0.05 * (1.0 + std::abs(synth.truth.beta_true[j])));
}

TEST_CASE("site structure and covariates are well formed") {
  GeneratorSpec spec;
  spec.n_per_site = {10, 12, 14};
  spec.d = 5;
  spec.site_offsets_amplitude = 1.0;
  spec.seed = 5;
  const auto synth = generate(spec);
  CHECK(synth.cohort.n() == 36);
  CHECK(synth.cohort.distinct_sites().size() == 3);
  CHECK(synth.cohort.covariate_names ==
        std::vector<std::string>{"age", "sex"});
  std::set<std::string> classes(synth.cohort.labels_raw.begin(),
                                synth.cohort.labels_raw.end());
  CHECK(classes == std::set<std::string>{"control", "patient"});
  // ages live in the stated range
  const auto ages = synth.cohort.covariates_raw.col(0);
  CHECK(ages.minCoeff() >= 55.0 - spec.age_group_coupling);
  CHECK(ages.maxCoeff() <= 90.0 + spec.age_group_coupling);
}

TEST_CASE("spec validation") {
  GeneratorSpec spec;
  spec.n_per_site = {2};
  CHECK_THROWS_AS(generate(spec), ValidationError);
  spec.n_per_site = {10};
  spec.noise_std = -1.0;
  CHECK_THROWS_AS(generate(spec), ValidationError);
}
