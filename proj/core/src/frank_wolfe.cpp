#include <algorithm>
#include <cmath>
#include <numeric>

#include "baseline_common.hpp"
#include "dfoattack/baselines.hpp"
#include "dfoattack/random.hpp"

namespace dfoattack {

namespace frank_wolfe {

std::vector<double> estimate_gradient(AttackSession& session, std::span<const double> eta,
                                      const std::vector<std::vector<double>>& directions,
                                      double smoothing) {
  const InputTensor& x = session.input();
  const double eps = session.epsilon();
  std::vector<double> grad(eta.size(), 0.0);
  std::vector<double> plus(eta.size());
  std::vector<double> minus(eta.size());
  for (const auto& u : directions) {
    if (session.remaining() < 2 || session.succeeded()) break;
    for (std::size_t i = 0; i < eta.size(); ++i) {
      plus[i] = clip_to_budget(x, i, eta[i] + smoothing * u[i], eps);
      minus[i] = clip_to_budget(x, i, eta[i] - smoothing * u[i], eps);
    }
    const double fp = session.evaluate(plus);
    if (session.succeeded()) break;
    const double fm = session.evaluate(minus);
    const double slope = (fp - fm) / (2.0 * smoothing);
    for (std::size_t i = 0; i < eta.size(); ++i) grad[i] += slope * u[i];
  }
  return grad;
}

std::vector<double> lmo_vertex(const InputTensor& x, std::span<const double> momentum,
                               double epsilon, std::span<const std::size_t> active) {
  std::vector<double> v(x.size(), 0.0);
  auto set = [&](std::size_t i) {
    const double m = momentum[i];
    const double s = m > 0.0 ? -1.0 : (m < 0.0 ? 1.0 : 0.0);
    v[i] = clip_to_budget(x, i, s * epsilon, epsilon);
  };
  if (active.empty()) {
    for (std::size_t i = 0; i < v.size(); ++i) set(i);
  } else {
    for (std::size_t i : active) set(i);
  }
  return v;
}

}  // namespace frank_wolfe

AttackResult frank_wolfe_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                                const BaselineConfig& config) {
  config.validate();
  AttackSession session(oracle, x, target, config.epsilon, config.max_queries);
  if (config.max_queries == 0) return session.result();

  const double eps = config.epsilon;
  std::vector<double> eta(x.size(), 0.0);
  session.evaluate(eta);

  const FrankWolfeParams& params = config.frank_wolfe;
  const auto active = detail::active_coordinates(config, x.size());
  const std::size_t q = params.directions;
  const std::size_t per_iteration = 2 * q + 1;
  const auto dim = static_cast<double>(active.size());

  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> momentum(x.size(), 0.0);
  std::vector<std::vector<double>> directions(q, std::vector<double>(x.size(), 0.0));
  std::vector<std::size_t> coords = active;

  for (std::size_t k = 0; !session.finished() && session.remaining() >= per_iteration; ++k) {
    for (auto& u : directions) std::fill(u.begin(), u.end(), 0.0);
    std::vector<double> scale(x.size(), 0.0);
    if (params.direction_kind == DirectionKind::gaussian) {
      for (auto& u : directions) {
        double norm = 0.0;
        for (std::size_t i : active) {
          u[i] = normal(rng);
          norm += u[i] * u[i];
        }
        norm = std::sqrt(norm);
        for (std::size_t i : active) u[i] /= norm;
      }
      for (std::size_t i : active) scale[i] = dim / static_cast<double>(q);
    } else {
      // Distinct coordinates, cycling through fresh permutations when q > dim.
      std::vector<double> hits(x.size(), 0.0);
      for (std::size_t s = 0; s < q; ++s) {
        if (s % coords.size() == 0) std::shuffle(coords.begin(), coords.end(), rng);
        const std::size_t i = coords[s % coords.size()];
        directions[s][i] = 1.0;
        hits[i] += 1.0;
      }
      for (std::size_t i : active) scale[i] = hits[i] > 0.0 ? 1.0 / hits[i] : 0.0;
    }

    auto grad = frank_wolfe::estimate_gradient(session, eta, directions, params.smoothing);
    if (session.finished()) break;
    for (std::size_t i : active) {
      momentum[i] = params.momentum * momentum[i] + (1.0 - params.momentum) * grad[i] * scale[i];
    }

    const auto vertex = frank_wolfe::lmo_vertex(x, momentum, eps, active);
    const double gamma = std::min(1.0, params.step_scale / std::sqrt(static_cast<double>(k + 1)));
    for (std::size_t i : active) {
      eta[i] = clip_to_budget(x, i, eta[i] + gamma * (vertex[i] - eta[i]), eps);
    }
    session.evaluate(eta);
  }
  return session.result();
}

}  // namespace dfoattack
