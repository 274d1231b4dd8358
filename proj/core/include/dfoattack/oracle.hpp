#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "dfoattack/tensor.hpp"

namespace dfoattack {

/// Black-box classifier returning a logit vector per query.
///
/// Every successful call to query() increments query_count() by exactly one.
/// A query that throws is not counted. Instances are not thread-safe; give
/// each worker its own clone().
class QueryOracle {
 public:
  virtual ~QueryOracle() = default;

  std::vector<double> query(std::span<const double> point);

  /// Evaluation excluded from the count. Used for bookkeeping only.
  std::vector<double> peek(std::span<const double> point);

  std::size_t query_count() const noexcept { return count_; }

  virtual Shape input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;

  /// Independent instance with a fresh counter.
  virtual std::unique_ptr<QueryOracle> clone() const = 0;

 protected:
  virtual std::vector<double> do_query(std::span<const double> point) = 0;

 private:
  std::vector<double> checked_call(std::span<const double> point);

  std::size_t count_ = 0;
};

/// Returns the same logits for every input. Handy for tests and smoke runs.
class ConstantOracle final : public QueryOracle {
 public:
  ConstantOracle(Shape shape, std::vector<double> logits);

  Shape input_shape() const override { return shape_; }
  std::size_t num_classes() const override { return logits_.size(); }
  std::unique_ptr<QueryOracle> clone() const override;

 protected:
  std::vector<double> do_query(std::span<const double> point) override;

 private:
  Shape shape_;
  std::vector<double> logits_;
};

}  // namespace dfoattack
