#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sbvm/design.hpp"
#include "sbvm/glm_family.hpp"
#include "sbvm/rng.hpp"

namespace sbvm {

struct Dataset {
  GlmFamily family = GlmFamily::gaussian();
  GroupedDesign design;
  Vector tau;
  Vector y;
  // Known only in simulation settings.
  std::optional<PaddedVector> truth;
  std::string config_hash;
  std::uint64_t seed = 0;

  // Zero-padded truth; throws DomainError when the truth is unknown.
  Vector truth_ambient() const;
  const PaddedVector& require_truth() const;
};

// Fixed design, dispersion and truth; responses are redrawn per replicate.
struct Simulation {
  GlmFamily family = GlmFamily::gaussian();
  GroupedDesign design;
  Vector tau;
  PaddedVector truth;

  Vector truth_ambient() const { return embed(design, truth); }
  Vector truth_predictor() const { return design.predictor(truth.support, truth.values); }
  // Draws y_i from the family at eta0_i and tau_i.
  Dataset draw(Rng& rng) const;
};

}  // namespace sbvm
