#include "dfoattack/models.hpp"

#include <cmath>
#include <string>

#include "dfoattack/errors.hpp"

namespace dfoattack {

namespace {

void check_input(const Shape& shape, std::span<const double> x) {
  if (x.size() != shape.size()) {
    throw ShapeError("model expects " + std::to_string(shape.size()) + " inputs, got " +
                     std::to_string(x.size()));
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace

LinearSoftmaxModel::LinearSoftmaxModel(Shape shape, Eigen::MatrixXd weights, Eigen::VectorXd biases)
    : shape_(shape), weights_(std::move(weights)), biases_(std::move(biases)) {
  if (static_cast<std::size_t>(weights_.cols()) != shape_.size()) {
    throw ShapeError("linear model: weight columns do not match input size");
  }
  if (weights_.rows() != biases_.size() || weights_.rows() < 2) {
    throw ShapeError("linear model: need at least two classes and one bias per class");
  }
  if (!weights_.allFinite() || !biases_.allFinite()) {
    throw ShapeError("linear model: non-finite parameter");
  }
}

std::vector<double> LinearSoftmaxModel::predict(std::span<const double> x) const {
  check_input(shape_, x);
  const Eigen::VectorXd z = weights_ * as_vector(x) + biases_;
  return {z.data(), z.data() + z.size()};
}

TinyMLPModel::TinyMLPModel(Shape shape, std::vector<Layer> layers, Activation activation)
    : shape_(shape), layers_(std::move(layers)), activation_(activation) {
  if (layers_.empty()) throw ShapeError("mlp: at least one layer is required");
  auto expected = static_cast<Eigen::Index>(shape_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.cols() != expected) {
      throw ShapeError("mlp: layer " + std::to_string(l) + " expects " +
                       std::to_string(layer.weights.cols()) + " inputs, previous layer gives " +
                       std::to_string(expected));
    }
    if (layer.biases.size() != layer.weights.rows()) {
      throw ShapeError("mlp: layer " + std::to_string(l) + " bias length mismatch");
    }
    if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
      throw ShapeError("mlp: non-finite parameter");
    }
    expected = layer.weights.rows();
  }
  if (expected < 2) throw ShapeError("mlp: at least two output classes are required");
}

std::size_t TinyMLPModel::num_classes() const {
  return static_cast<std::size_t>(layers_.back().weights.rows());
}

std::vector<double> TinyMLPModel::predict(std::span<const double> x) const {
  check_input(shape_, x);
  Eigen::VectorXd h = as_vector(x);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].weights * h + layers_[l].biases;
    if (l + 1 == layers_.size()) break;
    if (activation_ == Activation::relu) {
      h = h.cwiseMax(0.0);
    } else {
      h = h.array().tanh().matrix();
    }
  }
  return {h.data(), h.data() + h.size()};
}

ClassifierOracle::ClassifierOracle(std::shared_ptr<const Classifier> model)
    : model_(std::move(model)) {
  if (!model_) throw ContractViolation("ClassifierOracle: null model");
}

std::unique_ptr<QueryOracle> ClassifierOracle::clone() const {
  return std::make_unique<ClassifierOracle>(model_);
}

std::vector<double> ClassifierOracle::do_query(std::span<const double> point) {
  return model_->predict(point);
}

}  // namespace dfoattack
