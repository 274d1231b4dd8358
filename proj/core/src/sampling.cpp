#include "dfoattack/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dfoattack/errors.hpp"

namespace dfoattack {

SamplingStrategy parse_sampling_strategy(std::string_view name) {
  if (name == "random") return SamplingStrategy::random;
  if (name == "ordered") return SamplingStrategy::ordered;
  if (name == "variance") return SamplingStrategy::variance;
  throw InvalidPlan("unknown sampling strategy '" + std::string(name) + "'");
}

std::string_view to_string(SamplingStrategy strategy) noexcept {
  switch (strategy) {
    case SamplingStrategy::random: return "random";
    case SamplingStrategy::ordered: return "ordered";
    case SamplingStrategy::variance: return "variance";
  }
  return "?";
}

std::vector<double> neighborhood_variance(const Shape& shape, std::span<const double> values) {
  if (values.size() != shape.size()) {
    throw ContractViolation("neighborhood_variance: value count does not match shape");
  }
  const auto h = static_cast<std::ptrdiff_t>(shape.height);
  const auto w = static_cast<std::ptrdiff_t>(shape.width);
  std::vector<double> out(values.size(), 0.0);
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < shape.channels; ++ch) {
        double nb[8];
        int count = 0;
        for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
          for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const auto rr = r + dr;
            const auto cc = c + dc;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            nb[count++] = values[shape.index(static_cast<std::size_t>(rr),
                                             static_cast<std::size_t>(cc), ch)];
          }
        }
        double var = 0.0;
        if (count > 0) {
          // Shifted by the first neighbour so a flat window is exactly zero.
          const double shift = nb[0];
          double mean = 0.0;
          for (int k = 0; k < count; ++k) mean += nb[k] - shift;
          mean /= count;
          for (int k = 0; k < count; ++k) {
            const double d = nb[k] - shift - mean;
            var += d * d;
          }
          var /= count;
        }
        out[shape.index(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch)] = var;
      }
    }
  }
  return out;
}

std::vector<double> neighborhood_variance(const InputTensor& x) {
  return neighborhood_variance(x.shape(), x.data());
}

std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

std::size_t batches_for(std::size_t n, std::size_t b) { return (n + b - 1) / b; }

void check_plan(std::size_t n, std::size_t b) {
  if (b == 0) throw InvalidPlan("batch size must be positive");
  if (n == 0) throw InvalidPlan("domain size must be positive");
  if (b > n) {
    throw InvalidPlan("batch size " + std::to_string(b) + " exceeds domain size " +
                      std::to_string(n));
  }
}

SelectionSet slice(std::span<const std::size_t> order, std::size_t b, std::size_t j) {
  const std::size_t begin = j * b;
  if (begin >= order.size()) throw InvalidPlan("batch index past the end of the sweep");
  const std::size_t end = std::min(begin + b, order.size());
  return SelectionSet{{order.begin() + static_cast<std::ptrdiff_t>(begin),
                       order.begin() + static_cast<std::ptrdiff_t>(end)},
                      j};
}

}  // namespace

SelectionSet generate_sampling_matrix(std::span<const double> scores, std::size_t batch_size,
                                      std::size_t batch_index) {
  check_plan(scores.size(), batch_size);
  const auto order = rank_descending(scores);
  return slice(order, batch_size, batch_index);
}

SelectionSet generate_sampling_matrix(const InputTensor& x_hat, std::size_t batch_size,
                                      std::size_t batch_index) {
  const auto scores = neighborhood_variance(x_hat);
  return generate_sampling_matrix(scores, batch_size, batch_index);
}

SweepSampler::SweepSampler(SamplingStrategy strategy, std::size_t domain_size,
                           std::size_t batch_size)
    : strategy_(strategy), domain_size_(domain_size), batch_size_(batch_size) {
  check_plan(domain_size, batch_size);
}

void SweepSampler::begin_sweep(std::span<const double> scores, Rng& rng) {
  switch (strategy_) {
    case SamplingStrategy::variance:
      if (scores.size() != domain_size_) {
        throw ContractViolation("variance sampling needs one score per coordinate");
      }
      order_ = rank_descending(scores);
      break;
    case SamplingStrategy::ordered:
      order_.resize(domain_size_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), rng);
      break;
    case SamplingStrategy::random:
      order_.clear();
      break;
  }
}

std::size_t SweepSampler::num_batches() const noexcept {
  return batches_for(domain_size_, batch_size_);
}

SelectionSet SweepSampler::batch(std::size_t j, Rng& rng) const {
  if (strategy_ == SamplingStrategy::random) {
    std::vector<std::size_t> pool(domain_size_);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // Partial Fisher-Yates: the first b entries are a uniform draw without replacement.
    for (std::size_t i = 0; i < batch_size_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, domain_size_ - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(batch_size_);
    return SelectionSet{std::move(pool), j};
  }
  if (order_.size() != domain_size_) {
    throw ContractViolation("begin_sweep must be called before batch");
  }
  return slice(order_, batch_size_, j);
}

}  // namespace dfoattack
