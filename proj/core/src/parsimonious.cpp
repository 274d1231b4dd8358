#include <algorithm>
#include <numeric>

#include "baseline_common.hpp"
#include "dfoattack/baselines.hpp"
#include "dfoattack/lifting.hpp"
#include "dfoattack/random.hpp"

namespace dfoattack {

AttackResult parsimonious_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                                 const BaselineConfig& config) {
  config.validate();
  AttackSession session(oracle, x, target, config.epsilon, config.max_queries);
  if (config.max_queries == 0) return session.result();

  const Shape shape = x.shape();
  const double eps = config.epsilon;
  std::vector<double> eta(x.size(), 0.0);
  session.evaluate(eta);
  if (session.finished()) return session.result();

  const bool masked = !config.active_pixels.empty();
  const auto active = detail::active_coordinates(config, x.size());

  // Start at the all-negative vertex.
  std::vector<signed char> sign(x.size(), 0);
  for (std::size_t i : active) {
    sign[i] = -1;
    eta[i] = clip_to_budget(x, i, -eps, eps);
  }
  double loss = session.evaluate(eta);

  Rng rng(config.seed);
  std::size_t grid = config.parsimonious.initial_grid;
  std::vector<double> candidate;
  while (!session.finished()) {
    const BlockLifting blocks =
        masked ? subset_lifting(x.size(), active)
               : generate_lifting(grid * grid * shape.channels, shape);
    const bool finest = masked || blocks.is_identity();

    bool progress = true;
    while (progress && !session.finished()) {
      progress = false;
      std::vector<std::size_t> order(blocks.coarse_size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t k : order) {
        if (session.finished()) break;
        const auto members = blocks.members(k);
        if (members.empty()) continue;
        const signed char flipped = sign[members[0]] > 0 ? -1 : 1;
        candidate = eta;
        for (std::size_t i : members) candidate[i] = clip_to_budget(x, i, flipped * eps, eps);
        if (candidate == eta) continue;
        const double f = session.evaluate(candidate);
        if (f < loss) {
          loss = f;
          eta.swap(candidate);
          for (std::size_t i : members) sign[i] = flipped;
          progress = true;
        }
      }
    }
    if (finest) break;  // local optimum on single pixels
    grid *= 2;
  }
  return session.result();
}

}  // namespace dfoattack
