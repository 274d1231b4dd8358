#pragma once

#include <cstddef>
#include <span>

#include "dfoattack/oracle.hpp"
#include "dfoattack/tensor.hpp"

namespace dfoattack {

using ClassIndex = std::size_t;

struct AttackObjective {
  ClassIndex target = 0;
  ClassIndex original = 0;
  std::size_t num_classes = 0;

  /// Throws InvalidObjective unless target != original and both are < num_classes.
  void validate() const;
};

/// log(sum_{j != t} softmax_j) - log(softmax_t), evaluated in logit space as
/// logsumexp({z_j : j != t}) - z_t. The softmax normaliser cancels.
double loss(std::span<const double> logits, ClassIndex target);

/// Index of the largest logit; ties go to the lowest index.
ClassIndex argmax(std::span<const double> logits);

struct Evaluation {
  double loss = 0.0;
  ClassIndex predicted = 0;
};

/// One counted oracle query at X + eta.
Evaluation evaluate_loss(QueryOracle& oracle, const InputTensor& x, std::span<const double> eta,
                         ClassIndex target);

inline bool is_success(ClassIndex predicted, ClassIndex target) noexcept {
  return predicted == target;
}

}  // namespace dfoattack
