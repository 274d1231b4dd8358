#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dfoattack/bobyqa.hpp"
#include "dfoattack/lifting.hpp"
#include "dfoattack/loss.hpp"
#include "dfoattack/models.hpp"
#include "dfoattack/sampling.hpp"

using namespace dfoattack;

namespace {

std::shared_ptr<LinearSoftmaxModel> make_model(Shape shape, std::size_t classes, double bias0 = 0.0) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(shape.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(w.rows());
  b[0] = bias0;
  return std::make_shared<LinearSoftmaxModel>(shape, w, b);
}

InputTensor make_image(Shape shape) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> v(shape.size());
  for (double& x : v) x = u(rng);
  return InputTensor(shape, std::move(v));
}

void BM_FitLinearModel(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> pts(b + 1, std::vector<double>(b));
  std::vector<double> losses(b + 1);
  for (auto& p : pts) {
    for (double& v : p) v = normal(rng);
  }
  for (double& l : losses) l = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_linear_model(pts, losses));
}
BENCHMARK(BM_FitLinearModel)->Arg(5)->Arg(25)->Arg(50);

void BM_TrustRegionStep(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  LinearSurrogate m;
  for (std::size_t i = 0; i < b; ++i) m.gradient.push_back(normal(rng));
  const std::vector<double> lo(b, -0.05), hi(b, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(solve_trust_region_step(m, lo, hi, 0.03));
}
BENCHMARK(BM_TrustRegionStep)->Arg(25)->Arg(3072);

void BM_NeighborhoodVariance(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto x = make_image(Shape{side, side, 3});
  for (auto _ : state) benchmark::DoNotOptimize(neighborhood_variance(x));
}
BENCHMARK(BM_NeighborhoodVariance)->Arg(32)->Arg(224);

void BM_BobyqaBatch(benchmark::State& state) {
  const Shape shape{32, 32, 3};
  const auto model = make_model(shape, 10, 1e6);
  const auto x = make_image(shape);
  const auto lifting = generate_lifting(768, shape);
  SelectionSet sel;
  for (std::size_t k = 0; k < 25; ++k) sel.indices.push_back(k);
  const std::vector<double> eta(shape.size(), 0.0);
  const double center = loss(model->predict(x.data()), 1);
  for (auto _ : state) {
    ClassifierOracle oracle(model);
    AttackSession session(oracle, x, 1, 0.05, 50);
    SubspaceProblem problem(session, eta, lifting, sel);
    benchmark::DoNotOptimize(bobyqa_batch(problem, 50, TrustRegionParams{}, center));
  }
}
BENCHMARK(BM_BobyqaBatch);

void BM_Predict(benchmark::State& state) {
  const Shape shape{32, 32, 3};
  const auto model = make_model(shape, 10);
  const auto x = make_image(shape);
  for (auto _ : state) benchmark::DoNotOptimize(model->predict(x.data()));
}
BENCHMARK(BM_Predict);

}  // namespace

BENCHMARK_MAIN();
