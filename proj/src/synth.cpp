#include "gdm/synth.hpp"

#include <cmath>
#include <random>

namespace gdm {

void GeneratorSpec::validate() const {
  if (d < 1) throw ValidationError("generator needs d >= 1");
  if (n_per_site.empty()) throw ValidationError("generator needs >= 1 site");
  for (auto n : n_per_site)
    if (n < 4) throw ValidationError("each site needs >= 4 subjects");
  if (effect_amplitude < 0.0 || age_effect_amplitude < 0.0 ||
      age_group_coupling < 0.0 || site_offsets_amplitude < 0.0 ||
      noise_std < 0.0)
    throw ValidationError("generator amplitudes must be non-negative");
  if (effect_support < 0)
    throw ValidationError("effect support must be non-negative");
}

GeneratorSpec standard_confounded_spec() {
  GeneratorSpec spec;
  spec.n_per_site = {200, 200, 200};
  spec.d = 151;
  spec.effect_pattern = EffectPattern::Sparse;
  spec.effect_support = 10;
  spec.effect_amplitude = 2.0;
  spec.age_effect_amplitude = 0.3;
  spec.age_group_coupling = 4.0;
  spec.site_offsets_amplitude = 1.0;
  spec.noise_std = 1.0;
  spec.seed = 424242;
  return spec;
}

SynthCohort generate(const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> age_base(55.0, 90.0);
  std::bernoulli_distribution coin(0.5);

  const auto d = spec.d;
  const auto n_sites = static_cast<Eigen::Index>(spec.n_per_site.size());
  Eigen::Index n = 0;
  for (auto m : spec.n_per_site) n += m;

  GroundTruth truth;
  truth.beta_true = Vector::Zero(d);
  const Eigen::Index support = std::min(spec.effect_support, d);
  if (spec.effect_pattern == EffectPattern::Sparse) {
    // support spread evenly over the feature range
    for (Eigen::Index s = 0; s < support; ++s) {
      const Eigen::Index j = (s * d) / std::max<Eigen::Index>(support, 1);
      const double sign = (s % 2 == 0) ? 1.0 : -1.0;
      truth.beta_true[j] = sign * spec.effect_amplitude;
    }
  } else {
    const Eigen::Index len = std::max<Eigen::Index>(support, 1);
    const Eigen::Index start = d / 4;
    for (Eigen::Index s = 0; s < len && start + s < d; ++s) {
      const double taper =
          std::sin(M_PI * (s + 0.5) / static_cast<double>(len));
      truth.beta_true[start + s] = spec.effect_amplitude * taper;
    }
  }
  truth.associated.resize(d);
  for (Eigen::Index j = 0; j < d; ++j)
    truth.associated[j] = truth.beta_true[j] != 0.0;

  truth.beta_age.resize(d);
  for (Eigen::Index j = 0; j < d; ++j)
    truth.beta_age[j] = spec.age_effect_amplitude * gauss(rng);

  truth.site_offsets.resize(n_sites, d);
  for (Eigen::Index s = 0; s < n_sites; ++s)
    for (Eigen::Index j = 0; j < d; ++j)
      truth.site_offsets(s, j) = spec.site_offsets_amplitude * gauss(rng);

  Cohort co;
  co.features.resize(n, d);
  co.covariates_raw.resize(n, 2);
  co.covariate_names = {"age", "sex"};
  co.feature_names.reserve(d);
  for (Eigen::Index j = 0; j < d; ++j)
    co.feature_names.push_back("roi_" + std::to_string(j));

  Eigen::Index row = 0;
  for (Eigen::Index s = 0; s < n_sites; ++s) {
    const auto m = spec.n_per_site[s];
    for (Eigen::Index i = 0; i < m; ++i, ++row) {
      const double g = (i < m / 2) ? -1.0 : 1.0;  // exact half split
      const double age =
          age_base(rng) + g * spec.age_group_coupling / 2.0;
      const double sex = coin(rng) ? 1.0 : 0.0;
      co.covariates_raw(row, 0) = age;
      co.covariates_raw(row, 1) = sex;
      co.labels_raw.push_back(g < 0 ? "control" : "patient");
      co.subject_ids.push_back("s" + std::to_string(s) + "_" +
                               std::to_string(i));
      co.site.push_back("site" + std::to_string(s));
      for (Eigen::Index j = 0; j < d; ++j)
        co.features(row, j) = g * truth.beta_true[j] +
                              scaled_age(age) * truth.beta_age[j] +
                              truth.site_offsets(s, j) +
                              spec.noise_std * gauss(rng);
    }
  }

  co.validate();
  return {std::move(co), std::move(truth)};
}

}  // namespace gdm
