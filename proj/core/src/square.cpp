#include <algorithm>
#include <array>
#include <cmath>

#include "baseline_common.hpp"
#include "dfoattack/baselines.hpp"
#include "dfoattack/errors.hpp"
#include "dfoattack/random.hpp"

namespace dfoattack {

void BaselineConfig::validate() const {
  if (!(epsilon > 0.0)) throw InvalidPlan("epsilon must be positive");
  if (!(square.initial_fraction > 0.0 && square.initial_fraction <= 1.0)) {
    throw InvalidPlan("square initial fraction must lie in (0, 1]");
  }
  if (parsimonious.initial_grid == 0) throw InvalidPlan("parsimonious grid must be positive");
  if (genattack.population == 0) throw InvalidPlan("population must be positive");
  if (!(genattack.mutation_probability >= 0.0 && genattack.mutation_probability <= 1.0)) {
    throw InvalidPlan("mutation probability must lie in [0, 1]");
  }
  if (!(genattack.selection_temperature > 0.0)) throw InvalidPlan("temperature must be positive");
  if (!(frank_wolfe.momentum >= 0.0 && frank_wolfe.momentum < 1.0)) {
    throw InvalidPlan("momentum must lie in [0, 1)");
  }
  if (frank_wolfe.directions == 0) throw InvalidPlan("need at least one direction");
  if (!(frank_wolfe.smoothing > 0.0)) throw InvalidPlan("smoothing must be positive");
  if (!(frank_wolfe.step_scale > 0.0 && frank_wolfe.step_scale <= 1.0)) {
    throw InvalidPlan("step scale must lie in (0, 1]");
  }
}

namespace {

// Square size schedule of the reference implementation, with iteration
// milestones expressed on a 10000-query scale.
double square_fraction(double initial, std::size_t iteration, std::size_t max_queries) {
  static constexpr std::array<std::size_t, 9> kMilestones{10, 50, 200, 500, 1000,
                                                          2000, 4000, 6000, 8000};
  const std::size_t scaled =
      max_queries == 0 ? iteration : iteration * 10000 / std::max<std::size_t>(max_queries, 1);
  double p = initial;
  for (std::size_t m : kMilestones) {
    if (scaled > m) p /= 2.0;
  }
  return p;
}

}  // namespace

AttackResult square_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                           const BaselineConfig& config) {
  config.validate();
  AttackSession session(oracle, x, target, config.epsilon, config.max_queries);
  if (config.max_queries == 0) return session.result();

  const Shape shape = x.shape();
  const double eps = config.epsilon;
  std::vector<double> eta(x.size(), 0.0);
  session.evaluate(eta);
  if (session.finished()) return session.result();

  Rng rng(config.seed);
  std::bernoulli_distribution coin(0.5);
  auto vertex = [&](std::size_t i, bool positive) {
    return clip_to_budget(x, i, positive ? eps : -eps, eps);
  };

  const bool masked = !config.active_pixels.empty();
  const auto active = detail::active_coordinates(config, x.size());

  // Vertical stripes: one random sign per (column, channel).
  std::vector<char> stripe(shape.width * shape.channels);
  for (auto& s : stripe) s = coin(rng) ? 1 : 0;
  for (std::size_t i : active) {
    const std::size_t ch = i % shape.channels;
    const std::size_t col = (i / shape.channels) % shape.width;
    eta[i] = vertex(i, stripe[col * shape.channels + ch] != 0);
  }
  double loss = session.evaluate(eta);

  std::uniform_int_distribution<std::size_t> pick_active(0, active.size() - 1);
  std::size_t iteration = 0;
  std::vector<double> candidate;
  while (!session.finished()) {
    candidate = eta;
    if (masked) {
      // Squares of a single pixel: flip one masked coordinate.
      const std::size_t i = active[pick_active(rng)];
      candidate[i] = vertex(i, !(eta[i] > 0.0));
    } else {
      const double p = square_fraction(config.square.initial_fraction, iteration,
                                       config.max_queries);
      const auto area = static_cast<double>(shape.height * shape.width);
      auto side = static_cast<std::size_t>(std::lround(std::sqrt(p * area)));
      side = std::clamp<std::size_t>(side, 1, std::min(shape.height, shape.width));
      std::uniform_int_distribution<std::size_t> row0(0, shape.height - side);
      std::uniform_int_distribution<std::size_t> col0(0, shape.width - side);
      for (int attempt = 0; attempt < 10 && candidate == eta; ++attempt) {
        const std::size_t r0 = row0(rng);
        const std::size_t c0 = col0(rng);
        for (std::size_t ch = 0; ch < shape.channels; ++ch) {
          const bool positive = coin(rng);
          for (std::size_t r = r0; r < r0 + side; ++r) {
            for (std::size_t c = c0; c < c0 + side; ++c) {
              const std::size_t i = shape.index(r, c, ch);
              candidate[i] = vertex(i, positive);
            }
          }
        }
      }
    }
    ++iteration;
    const double f = session.evaluate(candidate);
    if (f < loss) {
      loss = f;
      eta.swap(candidate);
    }
  }
  return session.result();
}

}  // namespace dfoattack
