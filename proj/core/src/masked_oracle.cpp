#include "dfoattack/masked_oracle.hpp"

#include <algorithm>
#include <string>

#include "dfoattack/errors.hpp"
#include "dfoattack/sampling.hpp"

namespace dfoattack {

std::vector<std::size_t> variance_mask(const InputTensor& x, std::size_t k) {
  if (k > x.size()) {
    throw ContractViolation("variance_mask: k=" + std::to_string(k) + " exceeds " +
                            std::to_string(x.size()) + " pixels");
  }
  auto ranked = rank_descending(neighborhood_variance(x));
  ranked.resize(k);
  std::sort(ranked.begin(), ranked.end());
  return ranked;
}

MaskedOracle::MaskedOracle(std::unique_ptr<QueryOracle> inner, InputTensor reference,
                           std::vector<std::size_t> mask)
    : inner_(std::move(inner)), reference_(std::move(reference)), mask_(std::move(mask)),
      allowed_(reference_.size(), false) {
  if (!inner_) throw ContractViolation("MaskedOracle: null inner oracle");
  if (inner_->input_shape() != reference_.shape()) {
    throw ShapeError("MaskedOracle: reference image does not match the oracle");
  }
  for (std::size_t i : mask_) {
    if (i >= allowed_.size()) throw ContractViolation("MaskedOracle: mask index out of range");
    allowed_[i] = true;
  }
}

std::unique_ptr<QueryOracle> MaskedOracle::clone() const {
  return std::make_unique<MaskedOracle>(inner_->clone(), reference_, mask_);
}

std::vector<double> MaskedOracle::do_query(std::span<const double> point) {
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (!allowed_[i] && point[i] != reference_[i]) {
      ++rejected_;
      throw ContractViolation("MaskedOracle: query perturbs pixel " + std::to_string(i) +
                              " outside the mask");
    }
  }
  return inner_->query(point);
}

}  // namespace dfoattack
