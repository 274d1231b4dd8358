#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dfoattack/tensor.hpp"

namespace dfoattack {

/// Geometry of a block lifting: rows x cols blocks per channel. Block row r
/// spans pixel rows [row_start[r], row_start[r+1]); likewise for columns.
struct BlockGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  std::vector<std::size_t> row_start;
  std::vector<std::size_t> col_start;

  std::size_t coarse_index(std::size_t r, std::size_t c, std::size_t ch) const noexcept {
    return (r * cols + c) * channels + ch;
  }
};

/// Piecewise-constant lifting from an n_l-dimensional coarse space to pixels.
///
/// Block and random liftings partition every pixel; a subset lifting owns
/// only the listed pixels (identity on a fixed pixel selection) and leaves
/// the rest at zero.
class BlockLifting {
 public:
  static constexpr std::size_t kUnowned = std::numeric_limits<std::size_t>::max();
  enum class Kind { block, random, subset };

  BlockLifting(Kind kind, std::size_t full_size, std::size_t coarse_size,
               std::vector<std::size_t> owner, std::optional<BlockGrid> grid = std::nullopt);

  Kind kind() const noexcept { return kind_; }
  std::size_t full_size() const noexcept { return owner_.size(); }
  std::size_t coarse_size() const noexcept { return members_.size(); }
  bool is_identity() const noexcept;

  /// Coarse variable owning each pixel, or kUnowned.
  std::span<const std::size_t> assignment() const noexcept { return owner_; }
  std::span<const std::size_t> members(std::size_t coarse) const noexcept { return members_[coarse]; }
  const std::optional<BlockGrid>& grid() const noexcept { return grid_; }

 private:
  Kind kind_;
  std::vector<std::size_t> owner_;
  std::vector<std::vector<std::size_t>> members_;
  std::optional<BlockGrid> grid_;
};

/// Block lifting with a g x g grid per channel, g = floor(sqrt(n_l / c)),
/// clamped to the image size. Block edges differ by at most one pixel, larger
/// blocks first. n_l >= n yields the identity. Throws InvalidPlan if n_l < c.
BlockLifting generate_lifting(std::size_t coarse_size, const Shape& shape);

/// Pixels shuffled with `seed` and dealt round-robin into n_l groups.
BlockLifting random_lifting(std::size_t coarse_size, std::size_t full_size, std::uint64_t seed);

/// Identity on the given pixels (coarse k owns pixels[k]); others unowned.
BlockLifting subset_lifting(std::size_t full_size, std::span<const std::size_t> pixels);

/// output_i = eta_hat[owner(i)], zero for unowned pixels.
std::vector<double> apply_lifting(const BlockLifting& lifting, std::span<const double> eta_hat);

/// Neighbour variance of block mean intensities on the block grid (up to 8
/// neighbours, same channel). For a subset lifting this is the pixel
/// neighbourhood variance of the owned pixels. Random liftings have no
/// geometry and are rejected with InvalidPlan.
std::vector<double> block_variance_order(const InputTensor& x_hat, const BlockLifting& lifting);
std::vector<double> block_variance_order(const Shape& shape, std::span<const double> values,
                                         const BlockLifting& lifting);

/// n_1, n_1 * growth, ... capped so the last level is exactly n.
std::vector<std::size_t> hierarchy_schedule(std::size_t full_size, std::size_t initial = 12,
                                            std::size_t growth = 4);

}  // namespace dfoattack
