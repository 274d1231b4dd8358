#include "dfoattack/oracle.hpp"

#include <cmath>
#include <string>

#include "dfoattack/errors.hpp"

namespace dfoattack {

std::vector<double> QueryOracle::checked_call(std::span<const double> point) {
  const Shape shape = input_shape();
  if (point.size() != shape.size()) {
    throw ShapeError("oracle expects " + std::to_string(shape.size()) + " values, got " +
                     std::to_string(point.size()));
  }
  std::vector<double> logits = do_query(point);
  if (logits.size() != num_classes()) {
    throw EvaluationError("oracle returned " + std::to_string(logits.size()) +
                          " logits, expected " + std::to_string(num_classes()));
  }
  for (double z : logits) {
    if (!std::isfinite(z)) throw EvaluationError("oracle returned a non-finite logit");
  }
  return logits;
}

std::vector<double> QueryOracle::query(std::span<const double> point) {
  auto logits = checked_call(point);
  ++count_;
  return logits;
}

std::vector<double> QueryOracle::peek(std::span<const double> point) {
  return checked_call(point);
}

ConstantOracle::ConstantOracle(Shape shape, std::vector<double> logits)
    : shape_(shape), logits_(std::move(logits)) {}

std::unique_ptr<QueryOracle> ConstantOracle::clone() const {
  return std::make_unique<ConstantOracle>(shape_, logits_);
}

std::vector<double> ConstantOracle::do_query(std::span<const double>) { return logits_; }

}  // namespace dfoattack
