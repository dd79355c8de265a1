#include "sbvm/dataset.hpp"

#include "sbvm/error.hpp"

namespace sbvm {

Vector Dataset::truth_ambient() const { return embed(design, require_truth()); }

const PaddedVector& Dataset::require_truth() const {
  if (!truth) throw DomainError("operation needs the true coefficient vector");
  return *truth;
}

Dataset Simulation::draw(Rng& rng) const {
  Dataset d;
  d.family = family;
  d.design = design;
  d.tau = tau;
  d.truth = truth;
  const Vector eta0 = truth_predictor();
  d.y.resize(eta0.size());
  for (Eigen::Index i = 0; i < eta0.size(); ++i) d.y(i) = family.sample(eta0(i), tau(i), rng);
  return d;
}

}  // namespace sbvm
