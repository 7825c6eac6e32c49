#pragma once

#include <cstdint>

#include "gdm/core.hpp"

namespace gdm {

enum class EffectPattern { Sparse, SmoothBlock };

// Linear-Gaussian two-group generator with age and site confounds.
struct GeneratorSpec {
  std::vector<Eigen::Index> n_per_site = {200};
  Eigen::Index d = 151;
  EffectPattern effect_pattern = EffectPattern::Sparse;
  Eigen::Index effect_support = 10;  // features carrying group signal
  double effect_amplitude = 1.0;
  double age_effect_amplitude = 0.0;
  double age_group_coupling = 0.0;   // group mean-age difference in years
  double site_offsets_amplitude = 0.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  Vector beta_true;               // d, group effect
  Vector beta_age;                // d, per unit of scaled age
  Matrix site_offsets;            // n_sites x d
  std::vector<bool> associated;   // beta_true != 0
};

// Ages are drawn uniform on [55, 90] then shifted by +/- coupling/2 per
// group; the age covariate enters features through (age - 72.5) / 17.5.
struct SynthCohort {
  Cohort cohort;
  GroundTruth truth;
};

SynthCohort generate(const GeneratorSpec& spec);

// The fixed three-site confounded cohort used by the confound-robustness
// evaluation (scenario cases and the directed site-pair protocol).
GeneratorSpec standard_confounded_spec();

inline double scaled_age(double age_years) { return (age_years - 72.5) / 17.5; }

}  // namespace gdm
