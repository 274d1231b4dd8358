#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dfoattack/random.hpp"
#include "dfoattack/tensor.hpp"

namespace dfoattack {

enum class SamplingStrategy { random, ordered, variance };

SamplingStrategy parse_sampling_strategy(std::string_view name);
std::string_view to_string(SamplingStrategy strategy) noexcept;

/// The coordinates active in one sub-sampling batch. Equivalent to the 0/1
/// selection matrix whose column q has a single one at row indices[q].
struct SelectionSet {
  std::vector<std::size_t> indices;
  std::size_t batch_index = 0;
};

/// Population variance of the up-to-8 same-channel neighbours of every
/// element of a (height, width, channels) grid stored in HWC order.
std::vector<double> neighborhood_variance(const Shape& shape, std::span<const double> values);
std::vector<double> neighborhood_variance(const InputTensor& x);

/// Indices sorted by descending score; equal scores keep ascending index order.
std::vector<std::size_t> rank_descending(std::span<const double> scores);

/// Variance sampling for batch j: positions [j*b, (j+1)*b) of the descending
/// ranking of `scores` (one score per coordinate of the n_l-dimensional
/// domain). The last batch of a sweep may be shorter. Throws InvalidPlan if
/// b == 0, b > n_l, or j is past the end of the sweep.
SelectionSet generate_sampling_matrix(std::span<const double> scores, std::size_t batch_size,
                                      std::size_t batch_index);

/// Pixel-level convenience overload: ranks by neighborhood_variance(x_hat).
SelectionSet generate_sampling_matrix(const InputTensor& x_hat, std::size_t batch_size,
                                      std::size_t batch_index);

/// Sweep-level sampler for all three strategies.
///
/// begin_sweep() fixes the order for one pass over the domain: variance ranks
/// the supplied scores, ordered draws a fresh random permutation, random does
/// nothing (every batch is drawn fresh).
class SweepSampler {
 public:
  SweepSampler(SamplingStrategy strategy, std::size_t domain_size, std::size_t batch_size);

  void begin_sweep(std::span<const double> scores, Rng& rng);
  std::size_t num_batches() const noexcept;
  SelectionSet batch(std::size_t j, Rng& rng) const;

  SamplingStrategy strategy() const noexcept { return strategy_; }
  std::size_t domain_size() const noexcept { return domain_size_; }
  std::size_t batch_size() const noexcept { return batch_size_; }

 private:
  SamplingStrategy strategy_;
  std::size_t domain_size_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
};

}  // namespace dfoattack
