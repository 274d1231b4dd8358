#include "dfoattack/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfoattack/errors.hpp"

namespace dfoattack {

void AttackObjective::validate() const {
  if (num_classes < 2) throw InvalidObjective("at least two classes are required");
  if (target >= num_classes || original >= num_classes) {
    throw InvalidObjective("class index out of range");
  }
  if (target == original) throw InvalidObjective("target class equals original class");
}

double loss(std::span<const double> logits, ClassIndex target) {
  if (logits.size() < 2) throw InvalidObjective("loss needs at least two classes");
  if (target >= logits.size()) throw InvalidObjective("target class out of range");
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!std::isfinite(logits[j])) throw EvaluationError("non-finite logit");
    if (j != target) peak = std::max(peak, logits[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j != target) sum += std::exp(logits[j] - peak);
  }
  return peak + std::log(sum) - logits[target];
}

ClassIndex argmax(std::span<const double> logits) {
  return static_cast<ClassIndex>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

Evaluation evaluate_loss(QueryOracle& oracle, const InputTensor& x, std::span<const double> eta,
                         ClassIndex target) {
  const auto point = x.perturbed(eta);
  const auto logits = oracle.query(point);
  return {loss(logits, target), argmax(logits)};
}

}  // namespace dfoattack
