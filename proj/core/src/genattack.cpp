#include <algorithm>
#include <cmath>
#include <numeric>

#include "baseline_common.hpp"
#include "dfoattack/baselines.hpp"
#include "dfoattack/random.hpp"

namespace dfoattack {

namespace {

struct Member {
  std::vector<double> eta;
  double loss = 0.0;
};

}  // namespace

AttackResult gen_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                        const BaselineConfig& config) {
  config.validate();
  AttackSession session(oracle, x, target, config.epsilon, config.max_queries);
  if (config.max_queries == 0) return session.result();

  const double eps = config.epsilon;
  const std::vector<double> zero(x.size(), 0.0);
  session.evaluate(zero);
  if (session.finished()) return session.result();

  const auto active = detail::active_coordinates(config, x.size());
  const FeasibleBox box = feasible_box(x, zero, eps);
  Rng rng(config.seed);
  auto resample = [&](std::size_t i) {
    std::uniform_real_distribution<double> u(box.lower[i], box.upper[i]);
    return u(rng);
  };

  const GenAttackParams& params = config.genattack;
  std::vector<Member> population;
  for (std::size_t m = 0; m < params.population && !session.finished(); ++m) {
    Member member{zero, 0.0};
    for (std::size_t i : active) member.eta[i] = resample(i);
    member.loss = session.evaluate(member.eta);
    population.push_back(std::move(member));
  }

  std::bernoulli_distribution crossover(0.5);
  std::bernoulli_distribution mutate(params.mutation_probability);
  while (!session.finished()) {
    std::stable_sort(population.begin(), population.end(),
                     [](const Member& a, const Member& b) { return a.loss < b.loss; });

    // Softmax over fitness = -loss, shifted by the elite for stability.
    std::vector<double> weights(population.size());
    for (std::size_t m = 0; m < population.size(); ++m) {
      weights[m] = std::exp(-(population[m].loss - population[0].loss) / params.selection_temperature);
    }
    std::discrete_distribution<std::size_t> select(weights.begin(), weights.end());

    std::vector<Member> next;
    next.push_back(population[0]);
    const std::size_t children = std::max<std::size_t>(params.population - 1, 1);
    for (std::size_t c = 0; c < children && !session.finished(); ++c) {
      const Member& a = population[select(rng)];
      const Member& b = population[select(rng)];
      Member child{zero, 0.0};
      for (std::size_t i : active) {
        child.eta[i] = crossover(rng) ? a.eta[i] : b.eta[i];
        if (mutate(rng)) child.eta[i] = resample(i);
      }
      child.loss = session.evaluate(child.eta);
      next.push_back(std::move(child));
    }
    std::stable_sort(next.begin(), next.end(),
                     [](const Member& a, const Member& b) { return a.loss < b.loss; });
    if (next.size() > params.population) next.resize(params.population);
    population = std::move(next);
  }
  return session.result();
}

}  // namespace dfoattack
