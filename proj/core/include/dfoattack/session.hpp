#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dfoattack/loss.hpp"
#include "dfoattack/oracle.hpp"
#include "dfoattack/tensor.hpp"

namespace dfoattack {

/// Outcome of a single attack run.
struct AttackResult {
  bool success = false;
  std::size_t queries = 0;
  std::vector<double> perturbation;
  double final_loss = std::numeric_limits<double>::infinity();
  ClassIndex final_class = 0;
  /// Hierarchy level the attack was on when it stopped (1-based; 0 if unused).
  std::size_t level_reached = 0;
};

/// Shared bookkeeping for one attack: budget, feasibility guard, success
/// detection after every evaluation, and the best point seen so far.
class AttackSession {
 public:
  AttackSession(QueryOracle& oracle, const InputTensor& x, ClassIndex target, double epsilon,
                std::size_t max_queries);

  const InputTensor& input() const noexcept { return x_; }
  ClassIndex target() const noexcept { return target_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t max_queries() const noexcept { return max_queries_; }

  std::size_t queries() const noexcept { return queries_; }
  std::size_t remaining() const noexcept { return max_queries_ - queries_; }
  bool succeeded() const noexcept { return succeeded_; }
  /// Success reached or budget exhausted.
  bool finished() const noexcept { return succeeded_ || queries_ >= max_queries_; }

  /// Queries the oracle at X + eta. Throws ContractViolation for an
  /// infeasible eta and std::logic_error when the budget is exhausted.
  double evaluate(std::span<const double> eta);

  double best_loss() const noexcept { return best_loss_; }
  std::span<const double> best_perturbation() const noexcept { return best_eta_; }

  /// Success point if any, otherwise the best point seen.
  AttackResult result() const;

 private:
  QueryOracle& oracle_;
  const InputTensor& x_;
  ClassIndex target_;
  double epsilon_;
  std::size_t max_queries_;
  std::size_t queries_ = 0;

  bool succeeded_ = false;
  std::vector<double> success_eta_;
  double success_loss_ = 0.0;

  std::vector<double> best_eta_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  ClassIndex best_class_ = 0;
};

}  // namespace dfoattack
