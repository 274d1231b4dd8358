#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dfoattack/attacks.hpp"
#include "dfoattack/baselines.hpp"
#include "dfoattack/errors.hpp"
#include "dfoattack/models.hpp"
#include "oracles.hpp"

using namespace dfoattack;

namespace {

using AttackFn = AttackResult (*)(QueryOracle&, const InputTensor&, ClassIndex,
                                  const BaselineConfig&);

struct Named {
  const char* name;
  AttackFn fn;
};

const Named kAttacks[] = {{"square", square_attack},
                          {"parsimonious", parsimonious_attack},
                          {"genattack", gen_attack},
                          {"frankwolfe", frank_wolfe_attack}};

// Records every query point and the loss it produced.
struct Recorder {
  std::vector<std::vector<double>> points;
  std::vector<double> losses;
  std::function<double(std::span<const double>)> wrap(std::function<double(std::span<const double>)> f) {
    return [this, f](std::span<const double> p) {
      points.emplace_back(p.begin(), p.end());
      losses.push_back(f(p));
      return losses.back();
    };
  }
};

// eta is recovered as (x + eta) - x, which is exact only up to rounding.
bool is_vertex_value(const InputTensor& x, std::size_t i, double eta, double eps) {
  return std::abs(eta - clip_to_budget(x, i, eps, eps)) <= 1e-15 ||
         std::abs(eta - clip_to_budget(x, i, -eps, eps)) <= 1e-15;
}

}  // namespace

TEST(Baselines, AlreadyTargetIsOneQuery) {
  const Shape s{4, 4, 3};
  const InputTensor x(s, std::vector<double>(48, 0.0));
  for (const auto& a : kAttacks) {
    ConstantOracle oracle(s, {0.0, 2.0});
    BaselineConfig cfg;
    const auto r = a.fn(oracle, x, 1, cfg);
    EXPECT_TRUE(r.success) << a.name;
    EXPECT_EQ(r.queries, 1u) << a.name;
    EXPECT_EQ(oracle.query_count(), 1u) << a.name;
  }
}

TEST(Baselines, ZeroBudget) {
  const Shape s{2, 2, 1};
  const InputTensor x(s, std::vector<double>(4, 0.0));
  for (const auto& a : kAttacks) {
    ConstantOracle oracle(s, {0.0, 2.0});
    BaselineConfig cfg;
    cfg.max_queries = 0;
    const auto r = a.fn(oracle, x, 0, cfg);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.queries, 0u);
    EXPECT_EQ(oracle.query_count(), 0u);
  }
}

TEST(Baselines, ConfigValidation) {
  BaselineConfig cfg;
  cfg.genattack.mutation_probability = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidPlan);
  cfg = BaselineConfig{};
  cfg.frank_wolfe.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidPlan);
  cfg = BaselineConfig{};
  cfg.square.initial_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidPlan);
}

TEST(Baselines, FeasibleAndAccounted) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const Shape s{3 + rng() % 6, 3 + rng() % 6, 1 + rng() % 3};
    const auto inst = ref::make_linear_instance(s, 4, rng());
    for (const auto& a : kAttacks) {
      BaselineConfig cfg;
      cfg.epsilon = inst.min_vertex_epsilon * (0.5 + (trial % 3) * 0.5);
      cfg.max_queries = 50 + rng() % 400;
      cfg.seed = rng();
      ref::AuditingOracle oracle(std::make_unique<ClassifierOracle>(inst.model), inst.image,
                                 cfg.epsilon);
      const auto r = a.fn(oracle, inst.image, inst.target, cfg);
      EXPECT_EQ(oracle.violations(), 0u) << a.name;
      EXPECT_EQ(r.queries, oracle.query_count()) << a.name;
      EXPECT_LE(r.queries, cfg.max_queries) << a.name;
      EXPECT_TRUE(is_feasible(inst.image, r.perturbation, cfg.epsilon)) << a.name;
    }
  }
}

TEST(Baselines, DeterministicGivenSeed) {
  const auto inst = ref::make_linear_instance(Shape{6, 6, 3}, 6, 8);
  for (const auto& a : kAttacks) {
    BaselineConfig cfg;
    cfg.epsilon = inst.min_vertex_epsilon * 0.8;
    cfg.max_queries = 300;
    cfg.seed = 31;
    ClassifierOracle o1(inst.model), o2(inst.model);
    const auto r1 = a.fn(o1, inst.image, inst.target, cfg);
    const auto r2 = a.fn(o2, inst.image, inst.target, cfg);
    EXPECT_EQ(r1.perturbation, r2.perturbation) << a.name;
    EXPECT_EQ(r1.final_loss, r2.final_loss) << a.name;
  }
}

TEST(Baselines, MaskedRunsStayOnMask) {
  const Shape s{5, 5, 3};
  const auto inst = ref::make_linear_instance(s, 4, 12);
  for (const auto& a : kAttacks) {
    BaselineConfig cfg;
    cfg.epsilon = inst.min_vertex_epsilon;
    cfg.max_queries = 300;
    for (std::size_t i = 1; i < s.size(); i += 4) cfg.active_pixels.push_back(i);
    Recorder rec;
    ClassifierOracle inner(inst.model);
    ref::FunctionOracle oracle(s, rec.wrap([&](std::span<const double> p) {
      return loss(inner.peek(p), inst.target) + 100.0;
    }));
    a.fn(oracle, inst.image, 0, cfg);
    for (const auto& p : rec.points) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i % 4 != 1) ASSERT_EQ(p[i], inst.image[i]) << a.name;
      }
    }
  }
}

TEST(Square, VertexPropertyAndMonotoneIncumbent) {
  const Shape s{8, 8, 3};
  const auto inst = ref::make_linear_instance(s, 10, 3);
  BaselineConfig cfg;
  cfg.epsilon = 0.04;
  cfg.max_queries = 400;
  Recorder rec;
  ClassifierOracle inner(inst.model);
  ref::FunctionOracle oracle(s, rec.wrap([&](std::span<const double> p) {
    return loss(inner.peek(p), inst.target) + 100.0;  // never succeeds
  }));
  const auto r = square_attack(oracle, inst.image, 0, cfg);
  ASSERT_EQ(rec.points.size(), 400u);
  for (std::size_t q = 1; q < rec.points.size(); ++q) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      ASSERT_TRUE(is_vertex_value(inst.image, i, rec.points[q][i] - inst.image[i], cfg.epsilon));
    }
  }
  // Proposals are accepted only on strict improvement, so the incumbent
  // before query q is the earliest minimiser among queries 1..q-1, and each
  // proposal differs from it inside one square of at most the initial side.
  const auto max_side = static_cast<std::size_t>(std::lround(std::sqrt(0.1 * 64)));
  std::size_t inc = 1;
  for (std::size_t q = 2; q < rec.points.size(); ++q) {
    std::size_t r0 = s.height, r1 = 0, c0 = s.width, c1 = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (rec.points[q][i] == rec.points[inc][i]) continue;
      const std::size_t r = i / s.channels / s.width, c = i / s.channels % s.width;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
    if (r0 <= r1) {
      ASSERT_LE(r1 - r0 + 1, max_side);
      ASSERT_LE(c1 - c0 + 1, max_side);
    }
    if (rec.losses[q] < rec.losses[inc]) inc = q;
  }
  EXPECT_EQ(r.final_loss, std::min(rec.losses[inc], rec.losses[0]));
}

TEST(Parsimonious, OptimumAtNegativeVertexAcceptsNoFlip) {
  const Shape s{4, 4, 2};
  const InputTensor x(s, std::vector<double>(32, 0.0));
  Recorder rec;
  ref::FunctionOracle oracle(s, rec.wrap([](std::span<const double> p) {
    double f = 100.0;
    for (double v : p) f += v;
    return f;
  }));
  BaselineConfig cfg;
  cfg.epsilon = 0.1;
  cfg.max_queries = 500;
  const auto r = parsimonious_attack(oracle, x, 0, cfg);
  ASSERT_GE(rec.losses.size(), 2u);
  const double at_vertex = rec.losses[1];
  EXPECT_NEAR(at_vertex, 100.0 - 3.2, 1e-12);
  for (std::size_t q = 2; q < rec.losses.size(); ++q) EXPECT_GT(rec.losses[q], at_vertex);
  for (double v : r.perturbation) EXPECT_EQ(v, -0.1);
  EXPECT_LT(r.queries, cfg.max_queries);  // stops at the local optimum
}

TEST(Parsimonious, TwoPixelSeparableFindsBestVertex) {
  const Shape s{1, 2, 1};
  const InputTensor x(s, {0.0, 0.0});
  const double eps = 0.1;
  auto f = [](std::span<const double> p) {
    return 10.0 + (p[0] - 0.09) * (p[0] - 0.09) + (p[1] + 0.06) * (p[1] + 0.06);
  };
  std::vector<double> best;
  double best_f = INFINITY;
  for (double a : {-eps, eps}) {
    for (double b : {-eps, eps}) {
      const std::vector<double> v{a, b};
      if (f(v) < best_f) {
        best_f = f(v);
        best = v;
      }
    }
  }
  ref::FunctionOracle oracle(s, f);
  BaselineConfig cfg;
  cfg.epsilon = eps;
  cfg.max_queries = 100;
  const auto r = parsimonious_attack(oracle, x, 0, cfg);
  EXPECT_EQ(r.perturbation, best);
  EXPECT_DOUBLE_EQ(r.final_loss, best_f);
}

TEST(Parsimonious, EveryQueryIsAVertex) {
  const Shape s{6, 6, 3};
  const auto inst = ref::make_linear_instance(s, 5, 44);
  BaselineConfig cfg;
  cfg.epsilon = 0.03;
  cfg.max_queries = 300;
  Recorder rec;
  ClassifierOracle inner(inst.model);
  ref::FunctionOracle oracle(s, rec.wrap([&](std::span<const double> p) {
    return loss(inner.peek(p), inst.target) + 100.0;
  }));
  parsimonious_attack(oracle, inst.image, 0, cfg);
  for (std::size_t q = 1; q < rec.points.size(); ++q) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      ASSERT_TRUE(is_vertex_value(inst.image, i, rec.points[q][i] - inst.image[i], cfg.epsilon));
    }
  }
}

TEST(GenAttack, DegenerateConfigKeepsLossConstant) {
  const Shape s{3, 3, 1};
  const auto inst = ref::make_linear_instance(s, 3, 2);
  Recorder rec;
  ClassifierOracle inner(inst.model);
  ref::FunctionOracle oracle(s, rec.wrap([&](std::span<const double> p) {
    return loss(inner.peek(p), inst.target) + 100.0;
  }));
  BaselineConfig cfg;
  cfg.epsilon = 0.05;
  cfg.max_queries = 40;
  cfg.genattack.population = 1;
  cfg.genattack.mutation_probability = 0.0;
  gen_attack(oracle, inst.image, 0, cfg);
  ASSERT_GE(rec.losses.size(), 3u);
  // Query 0 is the clean image; the single member is then re-evaluated unchanged.
  for (std::size_t q = 2; q < rec.losses.size(); ++q) EXPECT_EQ(rec.losses[q], rec.losses[1]);
}

TEST(GenAttack, ElitismKeepsBestMonotone) {
  const Shape s{4, 4, 3};
  const auto inst = ref::make_linear_instance(s, 5, 9);
  ClassifierOracle inner(inst.model);
  Recorder rec;
  ref::FunctionOracle oracle(s, rec.wrap([&](std::span<const double> p) {
    return loss(inner.peek(p), inst.target) + 100.0;
  }));
  BaselineConfig cfg;
  cfg.epsilon = 0.05;
  cfg.max_queries = 600;
  const auto r = gen_attack(oracle, inst.image, 0, cfg);
  const double min_seen = *std::min_element(rec.losses.begin(), rec.losses.end());
  EXPECT_EQ(r.final_loss, min_seen);
  EXPECT_LT(r.final_loss, rec.losses[0]);
}

TEST(FrankWolfe, CoordinateEstimateIsExactForAffineLoss) {
  const Shape s{2, 3, 1};
  const std::vector<double> g{0.5, -1.0, 2.0, 0.0, -0.25, 3.0};
  ref::FunctionOracle oracle(s, [&](std::span<const double> p) {
    double f = 50.0;
    for (std::size_t i = 0; i < p.size(); ++i) f += g[i] * p[i];
    return f;
  });
  const InputTensor x(s, std::vector<double>(6, 0.0));
  AttackSession session(oracle, x, 0, 0.1, 100);
  std::vector<std::vector<double>> dirs;
  for (std::size_t i = 0; i < 6; ++i) {
    dirs.emplace_back(6, 0.0);
    dirs.back()[i] = 1.0;
  }
  const std::vector<double> eta(6, 0.0);
  const auto est = frank_wolfe::estimate_gradient(session, eta, dirs, 1e-3);
  EXPECT_EQ(session.queries(), 12u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(est[i], g[i], 1e-9);
  const std::vector<std::size_t> none;
  const auto v = frank_wolfe::lmo_vertex(x, est, 0.1, none);
  for (std::size_t i = 0; i < 6; ++i) {
    const double want = g[i] > 0 ? -0.1 : (g[i] < 0 ? 0.1 : 0.0);
    EXPECT_DOUBLE_EQ(v[i], want);
  }
}

TEST(FrankWolfe, LmoVertexClipsToImage) {
  const Shape s{1, 2, 1};
  const InputTensor x(s, {0.48, -0.5});
  const std::vector<double> m{-1.0, 1.0};
  const std::vector<std::size_t> none;
  const auto v = frank_wolfe::lmo_vertex(x, m, 0.1, none);
  EXPECT_NEAR(v[0], 0.02, 1e-15);
  EXPECT_EQ(v[1], 0.0);
}

TEST(FrankWolfe, FullStepLandsOnVertexAndIterationCost) {
  const Shape s{3, 3, 1};
  const auto inst = ref::make_linear_instance(s, 3, 6);
  Recorder rec;
  ClassifierOracle inner(inst.model);
  ref::FunctionOracle oracle(s, rec.wrap([&](std::span<const double> p) {
    return loss(inner.peek(p), inst.target) + 100.0;
  }));
  BaselineConfig cfg;
  cfg.epsilon = 0.05;
  cfg.frank_wolfe.directions = 4;
  cfg.frank_wolfe.momentum = 0.0;
  cfg.max_queries = 1 + 3 * 9 + 5;  // three full iterations plus a remainder too small for a fourth
  const auto r = frank_wolfe_attack(oracle, inst.image, 0, cfg);
  EXPECT_EQ(r.queries, 1u + 3 * 9);
  // After the first iteration (gamma = 1) the iterate is a vertex.
  const auto& first = rec.points[1 + 8];
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e = first[i] - inst.image[i];
    EXPECT_TRUE(e == 0.0 || is_vertex_value(inst.image, i, e, cfg.epsilon));
  }
}

TEST(Attacks, KindParsing) {
  EXPECT_EQ(parse_attack_kind("bobyqa"), AttackKind::bobyqa);
  EXPECT_EQ(parse_attack_kind("frank-wolfe"), AttackKind::frank_wolfe);
  EXPECT_EQ(parse_attack_kind("frankwolfe"), AttackKind::frank_wolfe);
  EXPECT_EQ(to_string(AttackKind::frank_wolfe), "frankwolfe");
  EXPECT_THROW(parse_attack_kind("zoo"), InvalidPlan);
}

TEST(Attacks, DispatchMatchesDirectCall) {
  const auto inst = ref::make_linear_instance(Shape{5, 5, 3}, 4, 70);
  AttackSettings settings;
  settings.kind = AttackKind::square;
  RunParameters run;
  run.epsilon = inst.min_vertex_epsilon;
  run.max_queries = 200;
  run.seed = 4;
  ClassifierOracle o1(inst.model), o2(inst.model);
  const auto a = run_attack(settings, run, o1, inst.image, inst.target);
  BaselineConfig cfg;
  cfg.epsilon = run.epsilon;
  cfg.max_queries = run.max_queries;
  cfg.seed = run.seed;
  const auto b = square_attack(o2, inst.image, inst.target, cfg);
  EXPECT_EQ(a.perturbation, b.perturbation);
  EXPECT_EQ(a.queries, b.queries);
}
