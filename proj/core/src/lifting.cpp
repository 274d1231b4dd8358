#include "dfoattack/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dfoattack/errors.hpp"
#include "dfoattack/random.hpp"
#include "dfoattack/sampling.hpp"

namespace dfoattack {

BlockLifting::BlockLifting(Kind kind, std::size_t full_size, std::size_t coarse_size,
                           std::vector<std::size_t> owner, std::optional<BlockGrid> grid)
    : kind_(kind), owner_(std::move(owner)), members_(coarse_size), grid_(std::move(grid)) {
  if (owner_.size() != full_size) throw ContractViolation("lifting owner map has wrong length");
  for (std::size_t i = 0; i < owner_.size(); ++i) {
    if (owner_[i] == kUnowned) {
      if (kind_ != Kind::subset) throw ContractViolation("block/random lifting must own every pixel");
      continue;
    }
    if (owner_[i] >= coarse_size) throw ContractViolation("lifting owner out of range");
    members_[owner_[i]].push_back(i);
  }
}

bool BlockLifting::is_identity() const noexcept {
  if (members_.size() != owner_.size()) return false;
  for (std::size_t i = 0; i < owner_.size(); ++i) {
    if (owner_[i] != i) return false;
  }
  return true;
}

namespace {

// Splits `extent` into `parts` contiguous runs, the first extent % parts one longer.
std::vector<std::size_t> split_points(std::size_t extent, std::size_t parts) {
  std::vector<std::size_t> start(parts + 1, 0);
  const std::size_t base = extent / parts;
  const std::size_t extra = extent % parts;
  for (std::size_t p = 0; p < parts; ++p) {
    start[p + 1] = start[p] + base + (p < extra ? 1 : 0);
  }
  return start;
}

BlockLifting grid_lifting(const Shape& shape, std::size_t rows, std::size_t cols) {
  BlockGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.channels = shape.channels;
  grid.row_start = split_points(shape.height, rows);
  grid.col_start = split_points(shape.width, cols);

  std::vector<std::size_t> owner(shape.size());
  for (std::size_t br = 0; br < rows; ++br) {
    for (std::size_t r = grid.row_start[br]; r < grid.row_start[br + 1]; ++r) {
      for (std::size_t bc = 0; bc < cols; ++bc) {
        for (std::size_t c = grid.col_start[bc]; c < grid.col_start[bc + 1]; ++c) {
          for (std::size_t ch = 0; ch < shape.channels; ++ch) {
            owner[shape.index(r, c, ch)] = grid.coarse_index(br, bc, ch);
          }
        }
      }
    }
  }
  const std::size_t coarse = rows * cols * shape.channels;
  return BlockLifting(BlockLifting::Kind::block, shape.size(), coarse, std::move(owner),
                      std::move(grid));
}

}  // namespace

BlockLifting generate_lifting(std::size_t coarse_size, const Shape& shape) {
  const std::size_t n = shape.size();
  if (n == 0) throw InvalidPlan("empty shape");
  if (coarse_size >= n) return grid_lifting(shape, shape.height, shape.width);
  if (coarse_size < shape.channels) {
    throw InvalidPlan("level size " + std::to_string(coarse_size) + " is smaller than the " +
                      std::to_string(shape.channels) + " channels");
  }
  const std::size_t per_channel = coarse_size / shape.channels;
  auto g = static_cast<std::size_t>(std::sqrt(static_cast<double>(per_channel)));
  while ((g + 1) * (g + 1) <= per_channel) ++g;
  while (g * g > per_channel) --g;
  return grid_lifting(shape, std::min(g, shape.height), std::min(g, shape.width));
}

BlockLifting random_lifting(std::size_t coarse_size, std::size_t full_size, std::uint64_t seed) {
  if (coarse_size == 0 || coarse_size > full_size) {
    throw InvalidPlan("random lifting needs 0 < n_l <= n");
  }
  std::vector<std::size_t> perm(full_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> owner(full_size);
  for (std::size_t k = 0; k < full_size; ++k) owner[perm[k]] = k % coarse_size;
  return BlockLifting(BlockLifting::Kind::random, full_size, coarse_size, std::move(owner));
}

BlockLifting subset_lifting(std::size_t full_size, std::span<const std::size_t> pixels) {
  std::vector<std::size_t> owner(full_size, BlockLifting::kUnowned);
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    if (pixels[k] >= full_size) throw ContractViolation("subset pixel out of range");
    if (owner[pixels[k]] != BlockLifting::kUnowned) {
      throw ContractViolation("subset pixels must be distinct");
    }
    owner[pixels[k]] = k;
  }
  return BlockLifting(BlockLifting::Kind::subset, full_size, pixels.size(), std::move(owner));
}

std::vector<double> apply_lifting(const BlockLifting& lifting, std::span<const double> eta_hat) {
  if (eta_hat.size() != lifting.coarse_size()) {
    throw ContractViolation("apply_lifting: coarse vector has length " +
                            std::to_string(eta_hat.size()) + ", lifting expects " +
                            std::to_string(lifting.coarse_size()));
  }
  const auto owner = lifting.assignment();
  std::vector<double> out(owner.size(), 0.0);
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i] != BlockLifting::kUnowned) out[i] = eta_hat[owner[i]];
  }
  return out;
}

std::vector<double> block_variance_order(const Shape& shape, std::span<const double> values,
                                         const BlockLifting& lifting) {
  if (values.size() != lifting.full_size() || shape.size() != values.size()) {
    throw ContractViolation("block_variance_order: lifting does not match the image");
  }
  switch (lifting.kind()) {
    case BlockLifting::Kind::random:
      throw InvalidPlan("random liftings have no block geometry to rank");
    case BlockLifting::Kind::subset: {
      const auto pixel = neighborhood_variance(shape, values);
      std::vector<double> out(lifting.coarse_size());
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = pixel[lifting.members(k)[0]];
      return out;
    }
    case BlockLifting::Kind::block:
      break;
  }
  const BlockGrid& grid = *lifting.grid();
  std::vector<double> means(lifting.coarse_size(), 0.0);
  for (std::size_t k = 0; k < means.size(); ++k) {
    const auto m = lifting.members(k);
    double sum = 0.0;
    for (std::size_t i : m) sum += values[i];
    means[k] = m.empty() ? 0.0 : sum / static_cast<double>(m.size());
  }
  // The coarse index layout is itself HWC over the block grid.
  return neighborhood_variance(Shape{grid.rows, grid.cols, grid.channels}, means);
}

std::vector<double> block_variance_order(const InputTensor& x_hat, const BlockLifting& lifting) {
  return block_variance_order(x_hat.shape(), x_hat.data(), lifting);
}

std::vector<std::size_t> hierarchy_schedule(std::size_t full_size, std::size_t initial,
                                            std::size_t growth) {
  if (full_size == 0 || initial == 0) throw InvalidPlan("hierarchy needs positive sizes");
  if (growth < 2) throw InvalidPlan("hierarchy growth factor must be at least 2");
  std::vector<std::size_t> levels;
  for (std::size_t level = initial; level < full_size; level *= growth) levels.push_back(level);
  levels.push_back(full_size);
  return levels;
}

}  // namespace dfoattack
