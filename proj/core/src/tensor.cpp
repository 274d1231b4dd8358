#include "dfoattack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfoattack/errors.hpp"

namespace dfoattack {

InputTensor::InputTensor(Shape shape, std::vector<double> data, double lower, double upper)
    : shape_(shape), data_(std::move(data)), lower_(lower), upper_(upper) {
  if (shape_.height == 0 || shape_.width == 0 || shape_.channels == 0) {
    throw ContractViolation("InputTensor: shape dimensions must be positive");
  }
  if (!(lower_ < upper_)) {
    throw ContractViolation("InputTensor: lower bound must be below upper bound");
  }
  if (data_.size() != shape_.size()) {
    throw ContractViolation("InputTensor: data length " + std::to_string(data_.size()) +
                            " does not match shape size " + std::to_string(shape_.size()));
  }
  for (double v : data_) {
    if (!(v >= lower_ && v <= upper_)) {
      throw ContractViolation("InputTensor: element outside [lower, upper]");
    }
  }
}

std::vector<double> InputTensor::perturbed(std::span<const double> eta) const {
  if (eta.size() != data_.size()) {
    throw ContractViolation("perturbation length does not match input");
  }
  std::vector<double> out(data_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = data_[i] + eta[i];
    if (!(v >= lower_ - kFeasibilityTolerance && v <= upper_ + kFeasibilityTolerance)) {
      throw ContractViolation("perturbed point leaves the image domain at index " +
                              std::to_string(i));
    }
    out[i] = std::clamp(v, lower_, upper_);
  }
  return out;
}

Perturbation::Perturbation(std::vector<double> values, double epsilon)
    : values_(std::move(values)), epsilon_(epsilon) {
  if (!(epsilon_ > 0.0)) {
    throw ContractViolation("Perturbation: epsilon must be positive");
  }
  if (linf_norm(values_) > epsilon_ + kFeasibilityTolerance) {
    throw ContractViolation("Perturbation: values exceed the l-inf budget");
  }
}

Perturbation Perturbation::zeros(std::size_t n, double epsilon) {
  return Perturbation(std::vector<double>(n, 0.0), epsilon);
}

double linf_norm(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool is_feasible(const InputTensor& x, std::span<const double> eta, double epsilon) noexcept {
  if (eta.size() != x.size()) return false;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (!(std::abs(eta[i]) <= epsilon + kFeasibilityTolerance)) return false;
    const double v = x[i] + eta[i];
    if (!(v >= x.lower() - kFeasibilityTolerance && v <= x.upper() + kFeasibilityTolerance)) {
      return false;
    }
  }
  return true;
}

FeasibleBox feasible_box(const InputTensor& x, std::span<const double> eta, double epsilon) {
  if (!is_feasible(x, eta, epsilon)) {
    throw ContractViolation("feasible_box: current perturbation is infeasible");
  }
  FeasibleBox box;
  box.lower.resize(eta.size());
  box.upper.resize(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const double lo = std::max(-epsilon - eta[i], x.lower() - x[i] - eta[i]);
    const double hi = std::min(epsilon - eta[i], x.upper() - x[i] - eta[i]);
    // Rounding after accumulation can push a bound across zero by an ulp.
    box.lower[i] = std::min(lo, 0.0);
    box.upper[i] = std::max(hi, 0.0);
  }
  return box;
}

FeasibleBox feasible_box(const InputTensor& x, const Perturbation& eta) {
  return feasible_box(x, eta.values(), eta.epsilon());
}

}  // namespace dfoattack
