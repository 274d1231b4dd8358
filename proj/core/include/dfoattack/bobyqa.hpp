#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dfoattack/lifting.hpp"
#include "dfoattack/sampling.hpp"
#include "dfoattack/session.hpp"

namespace dfoattack {

/// m(p) = intercept + gradient . p. The quadratic term is identically zero.
struct LinearSurrogate {
  double intercept = 0.0;
  std::vector<double> gradient;
  /// Set when the interpolation system was rank deficient and the
  /// minimum-norm least-squares fit was returned instead.
  bool degenerate = false;

  double value(std::span<const double> p) const;
};

/// The b+1 samples the surrogate interpolates.
struct InterpolationSet {
  std::vector<std::vector<double>> points;
  std::vector<double> losses;

  /// argmin of losses, earliest on ties.
  std::size_t best_index() const;
  std::size_t size() const noexcept { return points.size(); }
};

/// Solves [1 p_i^T] [a; c] = L_i. Rank-deficient systems get the
/// minimum-norm least-squares solution and the degenerate flag.
LinearSurrogate fit_linear_model(const std::vector<std::vector<double>>& points,
                                 std::span<const double> losses);

/// Exact minimiser of c . p over max(lower_i, -radius) <= p_i <= min(upper_i, radius).
/// Requires lower_i <= 0 <= upper_i.
std::vector<double> solve_trust_region_step(const LinearSurrogate& model,
                                            std::span<const double> lower,
                                            std::span<const double> upper, double radius);

struct TrustRegionParams {
  /// Initial radius as a fraction of epsilon.
  double initial_fraction = 0.5;
  double shrink = 0.5;
  double expand = 2.0;
  /// rho above which the radius expands.
  double expand_threshold = 0.7;
  /// rho below which the step counts as rejected and the radius shrinks.
  double accept_threshold = 0.1;
};

struct BobyqaConfig {
  double epsilon = 0.05;
  std::size_t max_queries = 3000;
  std::size_t batch_size = 25;
  /// Queries per batch (kappa). Must be at least batch_size + 1.
  std::size_t queries_per_batch = 50;
  std::size_t initial_level = 12;
  std::size_t level_growth = 4;
  bool hierarchical = true;
  SamplingStrategy strategy = SamplingStrategy::variance;
  TrustRegionParams trust_region{};
  std::uint64_t seed = 0;
  /// Non-empty restricts the attack to these pixels with an identity lifting
  /// (no hierarchy).
  std::vector<std::size_t> active_pixels;

  /// Throws InvalidPlan on inconsistent settings.
  void validate() const;
};

/// The b-dimensional slice of the problem seen by one batch: the current
/// perturbation is frozen and only the selected coarse variables move.
class SubspaceProblem {
 public:
  SubspaceProblem(AttackSession& session, std::span<const double> base_perturbation,
                  const BlockLifting& lifting, const SelectionSet& selection);

  std::size_t dimension() const noexcept { return coords_.size(); }
  /// Bounds on each sub-space coordinate, the intersection of the feasible
  /// box over the pixels the coordinate owns. lower <= 0 <= upper.
  std::span<const double> lower() const noexcept { return lower_; }
  std::span<const double> upper() const noexcept { return upper_; }

  /// Full-image perturbation for sub-space point p.
  std::vector<double> lift(std::span<const double> p) const;
  /// One counted query at lift(p).
  double evaluate(std::span<const double> p);

  AttackSession& session() noexcept { return session_; }
  double epsilon() const noexcept { return session_.epsilon(); }

 private:
  AttackSession& session_;
  std::vector<double> base_;
  const BlockLifting& lifting_;
  std::vector<std::size_t> coords_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

struct InitialModel {
  InterpolationSet samples;
  LinearSurrogate model;
};

/// Centre sample (cached loss, no query) plus one query per coordinate
/// direction. The step along coordinate i is a quarter of the longer side of
/// its feasible interval, towards that side. Stops early on success.
InitialModel build_initial_model(SubspaceProblem& problem, double center_loss);

struct BatchOutcome {
  /// Best sub-space point found, to be lifted into the perturbation.
  std::vector<double> step;
  double loss = 0.0;
  std::size_t queries = 0;
};

/// One sub-sampling batch: an initial model, then kappa - b trust-region
/// iterations. Consumes exactly min(kappa, remaining budget) queries unless
/// the attack succeeds first. With fewer than b + 1 queries left it only
/// evaluates the all-lower-bound vertex of the sub-space.
BatchOutcome bobyqa_batch(SubspaceProblem& problem, std::size_t kappa,
                          const TrustRegionParams& params, double center_loss);

/// Full driver: hierarchy levels, variance-ordered sweeps, one batch per
/// selection, success checked after every query.
AttackResult bobyqa_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                           const BobyqaConfig& config);

}  // namespace dfoattack
