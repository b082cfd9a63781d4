#pragma once

// Fully connected feed-forward network with explicit forward caches and
// hand-written backpropagation. Samples are matrix columns.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eco/error.hpp"

namespace eco {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint32_t { identity = 0, relu = 1, sigmoid = 2 };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

/// Same shapes as the network's parameters.
struct NetworkGradient {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  double squared_norm() const {
    double s = 0.0;
    for (const auto& w : weight) s += w.squaredNorm();
    for (const auto& b : bias) s += b.squaredNorm();
    return s;
  }
};

/// Layer inputs and post-activation outputs of one forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;

  const Matrix& result() const { return outputs.back(); }
};

class DenseNetwork {
 public:
  DenseNetwork() = default;
  explicit DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_chain(); }

  /// Layer widths sizes[0] -> ... -> sizes.back(). Hidden layers use
  /// `hidden`, the last layer `output`. He-uniform init for ReLU layers,
  /// Glorot-uniform otherwise, zero biases.
  static DenseNetwork build(const std::vector<int>& sizes, Activation hidden, Activation output,
                            std::mt19937_64& rng) {
    if (sizes.size() < 2) fail(ErrorCode::invalid_argument, "network needs at least one layer");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l], out = sizes[l + 1];
      if (in < 1 || out < 1) fail(ErrorCode::invalid_argument, "layer widths must be positive");
      DenseLayer layer;
      layer.activation = (l + 2 == sizes.size()) ? output : hidden;
      const double limit = layer.activation == Activation::relu ? std::sqrt(6.0 / in)
                                                                : std::sqrt(6.0 / (in + out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      layer.weight.resize(out, in);
      for (Eigen::Index c = 0; c < in; ++c)
        for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = dist(rng);
      layer.bias = Vector::Zero(out);
      layers.push_back(std::move(layer));
    }
    return DenseNetwork(std::move(layers));
  }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
  Eigen::Index output_dim() const { return layers_.empty() ? 0 : layers_.back().outputs(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Flat view over all parameters: per layer, weights (column-major) then biases.
  double& parameter(std::size_t k) {
    for (auto& l : layers_) {
      const auto nw = static_cast<std::size_t>(l.weight.size());
      if (k < nw) return l.weight.data()[k];
      k -= nw;
      const auto nb = static_cast<std::size_t>(l.bias.size());
      if (k < nb) return l.bias.data()[k];
      k -= nb;
    }
    fail(ErrorCode::invalid_argument, "parameter index out of range");
  }

  static double gradient_entry(const NetworkGradient& g, std::size_t k) {
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
      const auto nw = static_cast<std::size_t>(g.weight[l].size());
      if (k < nw) return g.weight[l].data()[k];
      k -= nw;
      const auto nb = static_cast<std::size_t>(g.bias[l].size());
      if (k < nb) return g.bias[l].data()[k];
      k -= nb;
    }
    fail(ErrorCode::invalid_argument, "gradient index out of range");
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  Matrix forward(const Matrix& x) const {
    check_input(x);
    Matrix a = x;
    for (const auto& l : layers_) a = activate(l, a);
    return a;
  }

  Vector forward(const Vector& x) const {
    Matrix m = x;
    return forward(m).col(0);
  }

  ForwardCache forward_cached(const Matrix& x) const {
    check_input(x);
    ForwardCache cache;
    cache.inputs.reserve(layers_.size());
    cache.outputs.reserve(layers_.size());
    const Matrix* a = &x;
    for (const auto& l : layers_) {
      cache.inputs.push_back(*a);
      cache.outputs.push_back(activate(l, *a));
      a = &cache.outputs.back();
    }
    return cache;
  }

  /// Backpropagates dLoss/dOutput. Gradients are accumulated into `grad`
  /// (allocated on first use); returns dLoss/dInput.
  Matrix backward(const ForwardCache& cache, const Matrix& d_output, NetworkGradient& grad) const {
    if (grad.weight.empty()) grad = zero_gradient();
    Matrix d = d_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& l = layers_[i];
      const Matrix& out = cache.outputs[i];
      switch (l.activation) {
        case Activation::identity: break;
        case Activation::relu: d = d.cwiseProduct((out.array() > 0.0).cast<double>().matrix()); break;
        case Activation::sigmoid: d = d.cwiseProduct((out.array() * (1.0 - out.array())).matrix()); break;
      }
      grad.weight[i].noalias() += d * cache.inputs[i].transpose();
      grad.bias[i] += d.rowwise().sum();
      Matrix prev = l.weight.transpose() * d;
      d = std::move(prev);
    }
    return d;
  }

  NetworkGradient zero_gradient() const {
    NetworkGradient g;
    for (const auto& l : layers_) {
      g.weight.push_back(Matrix::Zero(l.outputs(), l.inputs()));
      g.bias.push_back(Vector::Zero(l.outputs()));
    }
    return g;
  }

  /// Sum of squared weights (biases excluded).
  double weight_squared_norm() const {
    double s = 0.0;
    for (const auto& l : layers_) s += l.weight.squaredNorm();
    return s;
  }

 private:
  static Matrix activate(const DenseLayer& l, const Matrix& x) {
    Matrix z = l.weight * x;
    z.colwise() += l.bias;
    switch (l.activation) {
      case Activation::identity: break;
      case Activation::relu: z = z.cwiseMax(0.0); break;
      case Activation::sigmoid: z = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }); break;
    }
    return z;
  }

  void check_input(const Matrix& x) const {
    if (x.rows() != input_dim())
      fail(ErrorCode::dimension_mismatch, "network expects input dimension " + std::to_string(input_dim()) +
                                              ", got " + std::to_string(x.rows()));
  }

  void check_chain() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].bias.size() != layers_[i].outputs())
        fail(ErrorCode::bad_format, "bias length does not match layer width");
      if (i > 0 && layers_[i].inputs() != layers_[i - 1].outputs())
        fail(ErrorCode::bad_format, "layer dimensions do not chain");
    }
  }

  std::vector<DenseLayer> layers_;
};

/// SGD with classical momentum: v <- mu v - lr g; theta <- theta + v.
class MomentumSgd {
 public:
  MomentumSgd(const DenseNetwork& net, double lr, double momentum)
      : lr_(lr), momentum_(momentum), velocity_(net.zero_gradient()) {}

  void step(DenseNetwork& net, const NetworkGradient& g) {
    auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      velocity_.weight[i] = momentum_ * velocity_.weight[i] - lr_ * g.weight[i];
      velocity_.bias[i] = momentum_ * velocity_.bias[i] - lr_ * g.bias[i];
      layers[i].weight += velocity_.weight[i];
      layers[i].bias += velocity_.bias[i];
    }
  }

 private:
  double lr_;
  double momentum_;
  NetworkGradient velocity_;
};

}  // namespace eco
