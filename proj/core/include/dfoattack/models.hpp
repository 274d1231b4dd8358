#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dfoattack/oracle.hpp"
#include "dfoattack/tensor.hpp"

namespace dfoattack {

/// Immutable classifier; safe to share read-only between threads.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Shape input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  /// Logits for a flat HWC input. Throws ShapeError on length mismatch.
  virtual std::vector<double> predict(std::span<const double> x) const = 0;
};

/// logits(x) = W x + b.
class LinearSoftmaxModel final : public Classifier {
 public:
  LinearSoftmaxModel(Shape shape, Eigen::MatrixXd weights, Eigen::VectorXd biases);

  Shape input_shape() const override { return shape_; }
  std::size_t num_classes() const override { return static_cast<std::size_t>(weights_.rows()); }
  std::vector<double> predict(std::span<const double> x) const override;

  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  const Eigen::VectorXd& biases() const noexcept { return biases_; }

 private:
  Shape shape_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd biases_;
};

enum class Activation { relu, tanh };

/// Fully connected network; the activation is applied after every layer
/// except the last.
class TinyMLPModel final : public Classifier {
 public:
  struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd biases;
  };

  TinyMLPModel(Shape shape, std::vector<Layer> layers, Activation activation);

  Shape input_shape() const override { return shape_; }
  std::size_t num_classes() const override;
  std::vector<double> predict(std::span<const double> x) const override;

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  Activation activation() const noexcept { return activation_; }

 private:
  Shape shape_;
  std::vector<Layer> layers_;
  Activation activation_;
};

/// Counted oracle over a shared classifier.
class ClassifierOracle final : public QueryOracle {
 public:
  explicit ClassifierOracle(std::shared_ptr<const Classifier> model);

  Shape input_shape() const override { return model_->input_shape(); }
  std::size_t num_classes() const override { return model_->num_classes(); }
  std::unique_ptr<QueryOracle> clone() const override;
  const Classifier& model() const noexcept { return *model_; }

 protected:
  std::vector<double> do_query(std::span<const double> point) override;

 private:
  std::shared_ptr<const Classifier> model_;
};

// Model files are plain text:
//
//   dfoattack-model 1
//   kind linear | mlp
//   input_shape H W C
//   [activation relu|tanh]        (mlp only)
//   layers L
//   layer OUT IN
//   weights
//   <OUT rows of IN decimals>
//   biases
//   <OUT decimals>
//   ... (L layer sections; a linear model has exactly one)
//   end
//
// '#' starts a comment. Numbers are written with 17 significant digits so a
// save/load/save cycle is byte-identical.

std::shared_ptr<Classifier> parse_model(std::string_view text, const std::string& source = "<model>");
std::shared_ptr<Classifier> load_model(const std::filesystem::path& path);
std::string format_model(const Classifier& model);
void save_model(const Classifier& model, const std::filesystem::path& path);

}  // namespace dfoattack
