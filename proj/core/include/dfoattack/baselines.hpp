#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "dfoattack/loss.hpp"
#include "dfoattack/session.hpp"

namespace dfoattack {

// Reimplementations of the four reference attacks at the level of detail
// their published descriptions give. Constants without a published value are
// placeholders; every one is overridable.

enum class BaselineAlgorithm { square, parsimonious, genattack, frank_wolfe };

struct SquareParams {
  /// Fraction of the image covered by a square at the start; halves at the
  /// query milestones 10, 50, 200, 500, 1000, 2000, 4000, 6000, 8000.
  double initial_fraction = 0.1;
};

struct ParsimoniousParams {
  /// Blocks per image side at the first level.
  std::size_t initial_grid = 2;
};

struct GenAttackParams {
  std::size_t population = 6;
  double mutation_probability = 0.05;
  /// Softmax temperature of the selection probabilities over -loss.
  double selection_temperature = 0.3;
};

enum class DirectionKind { gaussian, coordinate };

struct FrankWolfeParams {
  double momentum = 0.9;
  std::size_t directions = 25;
  double smoothing = 1e-3;
  DirectionKind direction_kind = DirectionKind::gaussian;
  /// gamma_k = step_scale / sqrt(k + 1).
  double step_scale = 1.0;
};

struct BaselineConfig {
  double epsilon = 0.05;
  std::size_t max_queries = 3000;
  std::uint64_t seed = 0;
  /// Non-empty restricts the attack to these pixels (single-pixel squares,
  /// finest-grid flips).
  std::vector<std::size_t> active_pixels;

  SquareParams square{};
  ParsimoniousParams parsimonious{};
  GenAttackParams genattack{};
  FrankWolfeParams frank_wolfe{};

  void validate() const;
};

AttackResult square_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                           const BaselineConfig& config);
AttackResult parsimonious_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                                 const BaselineConfig& config);
AttackResult gen_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                        const BaselineConfig& config);
AttackResult frank_wolfe_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                                const BaselineConfig& config);

/// Frank-Wolfe internals, exposed for testing.
namespace frank_wolfe {

/// Symmetric finite-difference gradient estimate from the given unit
/// directions. Spends 2 * directions.size() queries. Query points are
/// clipped into the feasible set.
std::vector<double> estimate_gradient(AttackSession& session, std::span<const double> eta,
                                      const std::vector<std::vector<double>>& directions,
                                      double smoothing);

/// The l-inf ball vertex minimising <m, v>, clipped to the image: -eps * sign(m_i).
std::vector<double> lmo_vertex(const InputTensor& x, std::span<const double> momentum,
                               double epsilon, std::span<const std::size_t> active);

}  // namespace frank_wolfe

}  // namespace dfoattack
