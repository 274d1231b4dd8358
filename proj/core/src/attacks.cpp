#include "dfoattack/attacks.hpp"

#include <string>

#include "dfoattack/errors.hpp"

namespace dfoattack {

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "bobyqa") return AttackKind::bobyqa;
  if (name == "square") return AttackKind::square;
  if (name == "parsimonious") return AttackKind::parsimonious;
  if (name == "genattack") return AttackKind::genattack;
  if (name == "frankwolfe" || name == "frank-wolfe" || name == "frank_wolfe") {
    return AttackKind::frank_wolfe;
  }
  throw InvalidPlan("unknown attack '" + std::string(name) + "'");
}

std::string_view to_string(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::bobyqa: return "bobyqa";
    case AttackKind::square: return "square";
    case AttackKind::parsimonious: return "parsimonious";
    case AttackKind::genattack: return "genattack";
    case AttackKind::frank_wolfe: return "frankwolfe";
  }
  return "?";
}

AttackResult run_attack(const AttackSettings& settings, const RunParameters& run,
                        QueryOracle& oracle, const InputTensor& x, ClassIndex target) {
  if (settings.kind == AttackKind::bobyqa) {
    BobyqaConfig config;
    config.epsilon = run.epsilon;
    config.max_queries = run.max_queries;
    config.seed = run.seed;
    config.active_pixels = run.active_pixels;
    config.batch_size = settings.batch_size;
    config.queries_per_batch = settings.queries_per_batch;
    config.strategy = settings.strategy;
    config.trust_region = settings.trust_region;
    return bobyqa_attack(oracle, x, target, config);
  }

  BaselineConfig config;
  config.epsilon = run.epsilon;
  config.max_queries = run.max_queries;
  config.seed = run.seed;
  config.active_pixels = run.active_pixels;
  config.square = settings.square;
  config.parsimonious = settings.parsimonious;
  config.genattack = settings.genattack;
  config.frank_wolfe = settings.frank_wolfe;
  switch (settings.kind) {
    case AttackKind::square: return square_attack(oracle, x, target, config);
    case AttackKind::parsimonious: return parsimonious_attack(oracle, x, target, config);
    case AttackKind::genattack: return gen_attack(oracle, x, target, config);
    case AttackKind::frank_wolfe: return frank_wolfe_attack(oracle, x, target, config);
    case AttackKind::bobyqa: break;
  }
  throw InvalidPlan("unhandled attack kind");
}

}  // namespace dfoattack
