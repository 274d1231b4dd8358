#include "dfoattack/session.hpp"

#include <stdexcept>

#include "dfoattack/errors.hpp"

namespace dfoattack {

AttackSession::AttackSession(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                             double epsilon, std::size_t max_queries)
    : oracle_(oracle), x_(x), target_(target), epsilon_(epsilon), max_queries_(max_queries),
      best_eta_(x.size(), 0.0) {
  if (!(epsilon > 0.0)) throw ContractViolation("epsilon must be positive");
  if (oracle.input_shape() != x.shape()) throw ShapeError("oracle and input shapes differ");
  if (target >= oracle.num_classes()) throw InvalidObjective("target class out of range");
  if (oracle.num_classes() < 2) throw InvalidObjective("at least two classes are required");
}

double AttackSession::evaluate(std::span<const double> eta) {
  if (queries_ >= max_queries_) throw std::logic_error("query budget exhausted");
  if (!is_feasible(x_, eta, epsilon_)) {
    throw ContractViolation("attack produced an infeasible perturbation");
  }
  const Evaluation ev = evaluate_loss(oracle_, x_, eta, target_);
  ++queries_;
  if (ev.loss < best_loss_) {
    best_loss_ = ev.loss;
    best_class_ = ev.predicted;
    best_eta_.assign(eta.begin(), eta.end());
  }
  if (!succeeded_ && is_success(ev.predicted, target_)) {
    succeeded_ = true;
    success_eta_.assign(eta.begin(), eta.end());
    success_loss_ = ev.loss;
  }
  return ev.loss;
}

AttackResult AttackSession::result() const {
  AttackResult r;
  r.queries = queries_;
  r.success = succeeded_;
  if (succeeded_) {
    r.perturbation = success_eta_;
    r.final_loss = success_loss_;
    r.final_class = target_;
  } else {
    r.perturbation = best_eta_;
    r.final_loss = best_loss_;
    r.final_class = best_class_;
  }
  return r;
}

}  // namespace dfoattack
