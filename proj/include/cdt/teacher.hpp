#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdt/dataset.hpp"
#include "cdt/forest.hpp"
#include "cdt/gbt.hpp"

namespace cdt {

enum class TeacherKind { TForest, SGbt, RGbt, Noise };

std::string teacher_name(TeacherKind kind);
TeacherKind teacher_from_name(const std::string& name);  // DataError on junk

struct PropensityConfig {
  bool estimate = false;
  double known_e = 0.5;  // used when estimate == false
};

struct TeacherSpec {
  TeacherKind kind = TeacherKind::TForest;
  ForestParams forest;               // TForest / Noise
  GbtParams gbt;                     // SGbt / RGbt
  std::size_t cross_fit_repeats = 50;
  PropensityConfig propensity;       // RGbt nuisance
};

struct TeacherOutput {
  std::vector<double> tau_hat;  // one per training row
  // Rows whose own-arm prediction had no out-of-bag trees (TForest only).
  std::size_t oob_fallbacks = 0;
};

// Out-of-sample effect predictions for every training row: OOB forests per
// arm for the T-learner, repeated stratified half-splitting with the mean
// across repeats for the cross-fitted GBT learners, and a seeded shuffle of
// the T-learner output for the noise control.
TeacherOutput fit_teacher(const Dataset& train, const TeacherSpec& spec,
                          std::uint64_t seed, std::size_t threads = 0);

}  // namespace cdt
