#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfoattack/baselines.hpp"
#include "dfoattack/bobyqa.hpp"

namespace dfoattack {

enum class AttackKind { bobyqa, square, parsimonious, genattack, frank_wolfe };

AttackKind parse_attack_kind(std::string_view name);
std::string_view to_string(AttackKind kind) noexcept;

/// Attack selection plus every algorithm-specific knob, as set from the CLI
/// or an experiment config. Budget, epsilon, seed and pixel mask are supplied
/// per run.
struct AttackSettings {
  AttackKind kind = AttackKind::bobyqa;
  std::size_t batch_size = 25;
  std::size_t queries_per_batch = 50;
  SamplingStrategy strategy = SamplingStrategy::variance;
  TrustRegionParams trust_region{};
  SquareParams square{};
  ParsimoniousParams parsimonious{};
  GenAttackParams genattack{};
  FrankWolfeParams frank_wolfe{};

  std::string name() const { return std::string(to_string(kind)); }
};

struct RunParameters {
  double epsilon = 0.05;
  std::size_t max_queries = 3000;
  std::uint64_t seed = 0;
  std::vector<std::size_t> active_pixels;
};

AttackResult run_attack(const AttackSettings& settings, const RunParameters& run,
                        QueryOracle& oracle, const InputTensor& x, ClassIndex target);

}  // namespace dfoattack
