#pragma once

#include "coolopt/surrogate.hpp"
#include "coolopt/synthetic_plant.hpp"

namespace fixture {

/// Two weeks of the default synthetic plant, built once per test binary.
inline const coolopt::Scenario& two_weeks() {
  static const coolopt::Scenario s = [] {
    coolopt::ScenarioConfig cfg;
    cfg.days = 14;
    return coolopt::generate_scenario(cfg);
  }();
  return s;
}

inline const coolopt::SurrogateModel& two_week_model() {
  static const coolopt::SurrogateModel m = coolopt::train_surrogate(two_weeks().dataset, {});
  return m;
}

}  // namespace fixture
