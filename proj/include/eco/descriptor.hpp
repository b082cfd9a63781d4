#pragma once

// Scene descriptor: weighted mean of atomic strip features,
//
//   f(I) = (1 / sum w_i) * sum w_i f(I_i),
//
// optionally with every strip feature first passed through an adapter.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eco/error.hpp"

namespace eco {

enum class WeightScheme { uniform, inverse_distance };

inline std::string to_string(WeightScheme s) {
  return s == WeightScheme::uniform ? "uniform" : "inverse_distance";
}

struct SceneDescriptor {
  Eigen::VectorXd values;
  std::vector<std::uint64_t> strip_ids;
  WeightScheme scheme = WeightScheme::uniform;
};

inline Eigen::VectorXd weighted_mean(std::span<const Eigen::VectorXd> features, std::span<const double> weights) {
  if (features.empty()) fail(ErrorCode::empty_input, "no features to compose");
  if (features.size() != weights.size())
    fail(ErrorCode::dimension_mismatch, "feature and weight counts differ");
  const auto dim = features.front().size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      fail(ErrorCode::invalid_weight, "weights must be positive and finite");
    if (features[i].size() != dim) fail(ErrorCode::dimension_mismatch, "features differ in dimension");
    sum += weights[i] * features[i];
    total += weights[i];
  }
  return sum / total;
}

inline SceneDescriptor compose(std::span<const Eigen::VectorXd> features, std::span<const double> weights,
                               std::span<const std::uint64_t> ids = {},
                               WeightScheme scheme = WeightScheme::uniform) {
  SceneDescriptor d;
  d.values = weighted_mean(features, weights);
  d.strip_ids.assign(ids.begin(), ids.end());
  d.scheme = scheme;
  return d;
}

/// w_i = 1 / r_i.
inline std::vector<double> proximity_weights(std::span<const double> distances) {
  std::vector<double> w;
  w.reserve(distances.size());
  for (double r : distances) {
    if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorCode::invalid_weight, "strip distance must be positive");
    w.push_back(1.0 / r);
  }
  return w;
}

inline std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

/// Anything that maps one feature vector to an adapted one of equal size.
template <typename A>
concept FeatureAdapter = requires(const A& a, const Eigen::VectorXd& x) {
  { a.adapt(x) } -> std::convertible_to<Eigen::VectorXd>;
  { a.dim() } -> std::convertible_to<Eigen::Index>;
};

template <FeatureAdapter Adapter>
SceneDescriptor compose_adapted(std::span<const Eigen::VectorXd> features, std::span<const double> weights,
                                const Adapter& adapter, std::span<const std::uint64_t> ids = {},
                                WeightScheme scheme = WeightScheme::uniform) {
  std::vector<Eigen::VectorXd> adapted;
  adapted.reserve(features.size());
  for (const auto& f : features) {
    if (f.size() != adapter.dim())
      fail(ErrorCode::dimension_mismatch, "feature dimension does not match the adapter");
    adapted.push_back(adapter.adapt(f));
  }
  return compose(adapted, weights, ids, scheme);
}

}  // namespace eco
