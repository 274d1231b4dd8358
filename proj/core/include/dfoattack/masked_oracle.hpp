#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "dfoattack/oracle.hpp"
#include "dfoattack/tensor.hpp"

namespace dfoattack {

/// The k pixels with the largest neighbourhood variance, ascending by index.
/// Ties rank the lower index first. Throws ContractViolation if k > n.
std::vector<std::size_t> variance_mask(const InputTensor& x, std::size_t k);

/// Oracle that only accepts points differing from a reference image on a
/// fixed pixel set. Out-of-mask queries throw ContractViolation and are not
/// forwarded (nor counted).
class MaskedOracle final : public QueryOracle {
 public:
  MaskedOracle(std::unique_ptr<QueryOracle> inner, InputTensor reference,
               std::vector<std::size_t> mask);

  Shape input_shape() const override { return inner_->input_shape(); }
  std::size_t num_classes() const override { return inner_->num_classes(); }
  std::unique_ptr<QueryOracle> clone() const override;

  std::span<const std::size_t> mask() const noexcept { return mask_; }
  std::size_t rejected() const noexcept { return rejected_; }

 protected:
  std::vector<double> do_query(std::span<const double> point) override;

 private:
  std::unique_ptr<QueryOracle> inner_;
  InputTensor reference_;
  std::vector<std::size_t> mask_;
  std::vector<bool> allowed_;
  std::size_t rejected_ = 0;
};

}  // namespace dfoattack
