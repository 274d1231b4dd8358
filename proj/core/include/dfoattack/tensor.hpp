#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dfoattack {

/// Absolute slack used by every feasibility check in the library.
inline constexpr double kFeasibilityTolerance = 1e-12;

/// Image geometry. Data is stored height-major, then width, then channel
/// (HWC), so index(r, c, ch) = (r * width + c) * channels + ch.
struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return height * width * channels; }
  std::size_t index(std::size_t row, std::size_t col, std::size_t channel) const noexcept {
    return (row * width + col) * channels + channel;
  }
  bool operator==(const Shape&) const = default;
};

/// A point of [l, u]^n with an explicit image shape.
class InputTensor {
 public:
  static constexpr double kDefaultLower = -0.5;
  static constexpr double kDefaultUpper = 0.5;

  InputTensor(Shape shape, std::vector<double> data, double lower = kDefaultLower,
              double upper = kDefaultUpper);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

  /// X + eta, which must stay inside [l, u] up to kFeasibilityTolerance.
  std::vector<double> perturbed(std::span<const double> eta) const;

 private:
  Shape shape_;
  std::vector<double> data_;
  double lower_;
  double upper_;
};

/// Additive perturbation with its l-infinity budget.
class Perturbation {
 public:
  Perturbation(std::vector<double> values, double epsilon);
  static Perturbation zeros(std::size_t n, double epsilon);

  std::span<const double> values() const noexcept { return values_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  std::vector<double> values_;
  double epsilon_;
};

/// Per-coordinate bounds [lower_i, upper_i] for an additional step delta on
/// top of the current perturbation. Always lower_i <= 0 <= upper_i.
struct FeasibleBox {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Largest box of steps that keeps both the budget and the image bounds.
FeasibleBox feasible_box(const InputTensor& x, const Perturbation& eta);
FeasibleBox feasible_box(const InputTensor& x, std::span<const double> eta, double epsilon);

/// True when ||eta||_inf <= epsilon and X + eta lies in [l, u], within kFeasibilityTolerance.
bool is_feasible(const InputTensor& x, std::span<const double> eta, double epsilon) noexcept;

/// Clamps a desired per-pixel value to what the budget and the image allow.
inline double clip_to_budget(const InputTensor& x, std::size_t i, double value, double epsilon) noexcept {
  double lo = x.lower() - x[i];
  double hi = x.upper() - x[i];
  if (lo < -epsilon) lo = -epsilon;
  if (hi > epsilon) hi = epsilon;
  return value < lo ? lo : (value > hi ? hi : value);
}

double linf_norm(std::span<const double> v) noexcept;

}  // namespace dfoattack
