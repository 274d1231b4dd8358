#include "dfoattack/bobyqa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "dfoattack/errors.hpp"

namespace dfoattack {

double LinearSurrogate::value(std::span<const double> p) const {
  double v = intercept;
  for (std::size_t i = 0; i < gradient.size(); ++i) v += gradient[i] * p[i];
  return v;
}

std::size_t InterpolationSet::best_index() const {
  if (losses.empty()) throw ContractViolation("empty interpolation set");
  return static_cast<std::size_t>(std::min_element(losses.begin(), losses.end()) - losses.begin());
}

LinearSurrogate fit_linear_model(const std::vector<std::vector<double>>& points,
                                 std::span<const double> losses) {
  if (points.empty() || points.size() != losses.size()) {
    throw ContractViolation("fit_linear_model: need one loss per point");
  }
  const std::size_t dim = points.front().size();
  const auto rows = static_cast<Eigen::Index>(points.size());
  const auto cols = static_cast<Eigen::Index>(dim + 1);
  Eigen::MatrixXd a(rows, cols);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& p = points[static_cast<std::size_t>(r)];
    if (p.size() != dim) throw ContractViolation("fit_linear_model: ragged point set");
    a(r, 0) = 1.0;
    for (std::size_t i = 0; i < dim; ++i) a(r, static_cast<Eigen::Index>(i) + 1) = p[i];
    rhs(r) = losses[static_cast<std::size_t>(r)];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::VectorXd coef = cod.solve(rhs);

  LinearSurrogate model;
  model.intercept = coef(0);
  model.gradient.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) model.gradient[i] = coef(static_cast<Eigen::Index>(i) + 1);
  model.degenerate = cod.rank() < cols;
  return model;
}

std::vector<double> solve_trust_region_step(const LinearSurrogate& model,
                                            std::span<const double> lower,
                                            std::span<const double> upper, double radius) {
  const std::size_t dim = model.gradient.size();
  if (lower.size() != dim || upper.size() != dim) {
    throw ContractViolation("solve_trust_region_step: bound lengths differ from model");
  }
  std::vector<double> step(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    const double c = model.gradient[i];
    if (c > 0.0) {
      step[i] = std::max(lower[i], -radius);
    } else if (c < 0.0) {
      step[i] = std::min(upper[i], radius);
    }
  }
  return step;
}

void BobyqaConfig::validate() const {
  if (!(epsilon > 0.0)) throw InvalidPlan("epsilon must be positive");
  if (batch_size == 0) throw InvalidPlan("batch size must be positive");
  if (queries_per_batch < batch_size + 1) {
    throw InvalidPlan("queries per batch must be at least batch size + 1");
  }
  if (initial_level == 0 || level_growth < 2) throw InvalidPlan("invalid hierarchy settings");
  const auto& tr = trust_region;
  if (!(tr.initial_fraction > 0.0 && tr.initial_fraction <= 1.0) || !(tr.shrink > 0.0 && tr.shrink < 1.0) ||
      !(tr.expand > 1.0) || !(tr.accept_threshold > 0.0 && tr.accept_threshold < 1.0)) {
    throw InvalidPlan("invalid trust-region constants");
  }
}

SubspaceProblem::SubspaceProblem(AttackSession& session, std::span<const double> base_perturbation,
                                 const BlockLifting& lifting, const SelectionSet& selection)
    : session_(session),
      base_(base_perturbation.begin(), base_perturbation.end()),
      lifting_(lifting),
      coords_(selection.indices) {
  if (base_.size() != lifting.full_size()) {
    throw ContractViolation("SubspaceProblem: lifting does not match the perturbation");
  }
  const FeasibleBox box = feasible_box(session.input(), base_, session.epsilon());
  lower_.assign(coords_.size(), 0.0);
  upper_.assign(coords_.size(), 0.0);
  for (std::size_t k = 0; k < coords_.size(); ++k) {
    if (coords_[k] >= lifting.coarse_size()) throw ContractViolation("selection out of range");
    const auto members = lifting.members(coords_[k]);
    if (members.empty()) continue;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i : members) {
      lo = std::max(lo, box.lower[i]);
      hi = std::min(hi, box.upper[i]);
    }
    lower_[k] = lo;
    upper_[k] = hi;
  }
}

std::vector<double> SubspaceProblem::lift(std::span<const double> p) const {
  if (p.size() != coords_.size()) throw ContractViolation("sub-space point has wrong length");
  std::vector<double> eta = base_;
  const InputTensor& x = session_.input();
  for (std::size_t k = 0; k < coords_.size(); ++k) {
    if (p[k] == 0.0) continue;
    for (std::size_t i : lifting_.members(coords_[k])) {
      eta[i] = clip_to_budget(x, i, eta[i] + p[k], session_.epsilon());
    }
  }
  return eta;
}

double SubspaceProblem::evaluate(std::span<const double> p) { return session_.evaluate(lift(p)); }

InitialModel build_initial_model(SubspaceProblem& problem, double center_loss) {
  const std::size_t dim = problem.dimension();
  InitialModel init;
  init.samples.points.emplace_back(dim, 0.0);
  init.samples.losses.push_back(center_loss);
  for (std::size_t i = 0; i < dim && !problem.session().finished(); ++i) {
    const double lo = problem.lower()[i];
    const double hi = problem.upper()[i];
    const double side = hi >= -lo ? hi : lo;
    std::vector<double> p(dim, 0.0);
    p[i] = 0.25 * side;
    const double f = problem.evaluate(p);
    init.samples.points.push_back(std::move(p));
    init.samples.losses.push_back(f);
  }
  init.model = fit_linear_model(init.samples.points, init.samples.losses);
  return init;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Adds a sample and drops the one farthest from the incumbent. Neither the
// incumbent nor the sample just added is ever dropped.
void insert_sample(InterpolationSet& set, std::vector<double> point, double loss) {
  set.points.push_back(std::move(point));
  set.losses.push_back(loss);
  const std::size_t added = set.size() - 1;
  const std::size_t best = set.best_index();
  std::size_t drop = added;
  double far = -1.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i == best || i == added) continue;
    const double d = squared_distance(set.points[i], set.points[best]);
    if (d > far) {
      far = d;
      drop = i;
    }
  }
  if (drop == added) return;
  set.points.erase(set.points.begin() + static_cast<std::ptrdiff_t>(drop));
  set.losses.erase(set.losses.begin() + static_cast<std::ptrdiff_t>(drop));
}

}  // namespace

BatchOutcome bobyqa_batch(SubspaceProblem& problem, std::size_t kappa,
                          const TrustRegionParams& params, double center_loss) {
  AttackSession& session = problem.session();
  const std::size_t dim = problem.dimension();
  const std::size_t start = session.queries();
  const std::size_t budget = std::min(kappa, session.remaining());
  auto used = [&] { return session.queries() - start; };

  BatchOutcome out{std::vector<double>(dim, 0.0), center_loss, 0};
  if (budget == 0 || session.succeeded()) return out;

  const std::vector<double> corner(problem.lower().begin(), problem.lower().end());
  if (budget < dim + 1) {
    const double f = problem.evaluate(corner);
    if (f < center_loss || session.succeeded()) {
      out.step = corner;
      out.loss = f;
    }
    out.queries = used();
    return out;
  }

  InitialModel init = build_initial_model(problem, center_loss);
  InterpolationSet& set = init.samples;
  LinearSurrogate model = std::move(init.model);
  if (session.succeeded()) {
    out.step = set.points.back();
    out.loss = set.losses.back();
    out.queries = used();
    return out;
  }

  const double epsilon = problem.epsilon();
  double radius = std::min(params.initial_fraction * epsilon, epsilon);
  bool corner_tried = false;
  std::size_t probe_cursor = 0;
  std::vector<double> lo_rel(dim);
  std::vector<double> hi_rel(dim);

  while (used() < budget) {
    const std::size_t best = set.best_index();
    const std::vector<double> incumbent = set.points[best];
    const double incumbent_loss = set.losses[best];
    for (std::size_t i = 0; i < dim; ++i) {
      lo_rel[i] = std::min(0.0, problem.lower()[i] - incumbent[i]);
      hi_rel[i] = std::max(0.0, problem.upper()[i] - incumbent[i]);
    }
    const auto d = solve_trust_region_step(model, lo_rel, hi_rel, radius);
    double predicted = 0.0;
    for (std::size_t i = 0; i < dim; ++i) predicted -= model.gradient[i] * d[i];

    std::vector<double> candidate = incumbent;
    const bool model_step = predicted > 0.0;
    if (model_step) {
      for (std::size_t i = 0; i < dim; ++i) {
        candidate[i] = std::clamp(incumbent[i] + d[i], problem.lower()[i], problem.upper()[i]);
      }
    } else if (!corner_tried) {
      // Flat model, or the model optimum is the incumbent itself.
      candidate = corner;
      corner_tried = true;
    } else {
      // Geometry probe: move the least-trusted coordinate (smallest |c_i|)
      // to the far end of its interval.
      std::vector<std::size_t> order(dim);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(model.gradient[a]) < std::abs(model.gradient[b]);
      });
      for (std::size_t tries = 0; tries < dim; ++tries) {
        const std::size_t k = order[probe_cursor++ % dim];
        const double lo = problem.lower()[k];
        const double hi = problem.upper()[k];
        if (hi - lo <= 0.0) continue;
        candidate[k] = (hi - incumbent[k] >= incumbent[k] - lo) ? hi : lo;
        break;
      }
    }

    const double f = problem.evaluate(candidate);
    if (session.succeeded()) {
      out.step = std::move(candidate);
      out.loss = f;
      out.queries = used();
      return out;
    }
    if (model_step) {
      const double rho = (incumbent_loss - f) / predicted;
      if (rho < params.accept_threshold) {
        radius *= params.shrink;
      } else if (rho > params.expand_threshold) {
        radius = std::min(epsilon, radius * params.expand);
      }
    }
    insert_sample(set, std::move(candidate), f);
    model = fit_linear_model(set.points, set.losses);
  }

  const std::size_t best = set.best_index();
  out.step = set.points[best];
  out.loss = set.losses[best];
  out.queries = used();
  return out;
}

AttackResult bobyqa_attack(QueryOracle& oracle, const InputTensor& x, ClassIndex target,
                           const BobyqaConfig& config) {
  config.validate();
  AttackSession session(oracle, x, target, config.epsilon, config.max_queries);
  if (config.max_queries == 0) return session.result();

  const std::size_t n = x.size();
  std::vector<double> eta(n, 0.0);
  double center_loss = session.evaluate(eta);

  const bool masked = !config.active_pixels.empty();
  std::vector<std::size_t> levels;
  if (masked) {
    levels = {config.active_pixels.size()};
  } else if (config.hierarchical) {
    levels = hierarchy_schedule(n, config.initial_level, config.level_growth);
  } else {
    levels = {n};
  }

  Rng rng(config.seed);
  std::size_t level = 0;
  std::optional<BlockLifting> lifting;
  std::size_t lifting_level = levels.size();

  while (!session.finished()) {
    if (lifting_level != level) {
      lifting = masked ? subset_lifting(n, config.active_pixels)
                       : generate_lifting(levels[level], x.shape());
      lifting_level = level;
    }
    const std::size_t batch = std::min(config.batch_size, lifting->coarse_size());
    SweepSampler sampler(config.strategy, lifting->coarse_size(), batch);
    std::vector<double> scores;
    if (config.strategy == SamplingStrategy::variance) {
      scores = block_variance_order(x.shape(), x.perturbed(eta), *lifting);
    }
    sampler.begin_sweep(scores, rng);

    for (std::size_t j = 0; j < sampler.num_batches() && !session.finished(); ++j) {
      const SelectionSet selection = sampler.batch(j, rng);
      SubspaceProblem problem(session, eta, *lifting, selection);
      const BatchOutcome outcome =
          bobyqa_batch(problem, config.queries_per_batch, config.trust_region, center_loss);
      eta = problem.lift(outcome.step);
      center_loss = outcome.loss;
    }
    if (level + 1 < levels.size()) ++level;
  }

  AttackResult result = session.result();
  result.level_reached = lifting_level == levels.size() ? 1 : lifting_level + 1;
  return result;
}

}  // namespace dfoattack
