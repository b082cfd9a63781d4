#pragma once

// Adversarial residual domain adaptation in feature space.
//
// A discriminator D estimates the probability that a feature comes from the
// test domain (label 1) rather than the train domain (label 0). The adapter
// F(x) = x + R(x) maps test-domain features so that D cannot tell them apart
// from train-domain ones, and a reconstructor G keeps F invertible enough
// that semantic content survives:
//
//   L(D)   = sum_i [ -log D(x_test,i) - log(1 - D(x_train,i)) ]
//   L(F,G) = mean_i [ -log(1 - D(F(x_i))) + alpha * ||G(F(x_i)) - x_i|| ]
//
// Training alternates k discriminator steps with one F/G step, using SGD
// with momentum and L2 weight decay on R's weights.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eco/dense_network.hpp"
#include "eco/features.hpp"

namespace eco {

inline constexpr double kProbabilityClamp = 1e-7;

enum class ReconstructionNorm { mse, l2 };

struct TrainingConfig {
  int batch = 32;
  double alpha = 1.0;
  double weight_decay = 1.0;  // on R's weight matrices only
  double learning_rate = 1e-3;
  double momentum = 0.9;
  long iterations = 1000;
  std::uint64_t seed = 0;
  int d_steps = 1;
  int hidden = 2048;
  int depth = 1;  // hidden layers per network
  ReconstructionNorm norm = ReconstructionNorm::mse;

  void validate() const {
    if (batch < 1) fail(ErrorCode::invalid_argument, "batch size must be at least 1");
    if (!(alpha >= 0.0)) fail(ErrorCode::invalid_argument, "alpha must be non-negative");
    if (!(weight_decay >= 0.0)) fail(ErrorCode::invalid_argument, "weight decay must be non-negative");
    if (!(learning_rate > 0.0)) fail(ErrorCode::invalid_argument, "learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::invalid_argument, "momentum must be in [0, 1)");
    if (iterations < 0) fail(ErrorCode::invalid_argument, "iterations must be non-negative");
    if (d_steps < 1) fail(ErrorCode::invalid_argument, "need at least one discriminator step");
    if (hidden < 1 || depth < 0) fail(ErrorCode::invalid_argument, "bad network shape");
  }
};

inline nlohmann::json to_json(const TrainingConfig& c) {
  return {{"batch", c.batch},
          {"alpha", c.alpha},
          {"weight_decay", c.weight_decay},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"d_steps", c.d_steps},
          {"hidden", c.hidden},
          {"depth", c.depth},
          {"norm", c.norm == ReconstructionNorm::mse ? "mse" : "l2"}};
}

struct AdaptationModel {
  DenseNetwork discriminator;  // D -> hidden -> 1, sigmoid
  DenseNetwork residual;       // D -> hidden -> D, last layer zero-initialized
  DenseNetwork reconstructor;  // D -> hidden -> D

  Eigen::Index dim() const { return residual.input_dim(); }

  /// F(x) = x + R(x).
  Vector adapt(const Vector& x) const {
    if (x.size() != dim()) fail(ErrorCode::dimension_mismatch, "feature dimension does not match the adapter");
    return x + residual.forward(x);
  }

  Matrix adapt(const Matrix& x) const {
    if (x.rows() != dim()) fail(ErrorCode::dimension_mismatch, "feature dimension does not match the adapter");
    return x + residual.forward(x);
  }

  /// Clamped test-domain probability per column.
  Eigen::RowVectorXd discriminate(const Matrix& x) const {
    return discriminator.forward(x).row(0).cwiseMax(kProbabilityClamp).cwiseMin(1.0 - kProbabilityClamp);
  }

  static AdaptationModel create(int dim, int hidden, int depth, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> trunk{dim};
    for (int i = 0; i < depth; ++i) trunk.push_back(hidden);

    auto with_output = [&](int out) {
      auto sizes = trunk;
      sizes.push_back(out);
      return sizes;
    };
    AdaptationModel m;
    m.discriminator = DenseNetwork::build(with_output(1), Activation::relu, Activation::sigmoid, rng);
    m.residual = DenseNetwork::build(with_output(dim), Activation::relu, Activation::identity, rng);
    m.reconstructor = DenseNetwork::build(with_output(dim), Activation::relu, Activation::identity, rng);
    auto& last = m.residual.layers().back();
    last.weight.setZero();
    last.bias.setZero();
    return m;
  }
};

/// Gradients of a loss with respect to all three networks.
struct ModelGradient {
  NetworkGradient discriminator;
  NetworkGradient residual;
  NetworkGradient reconstructor;
};

namespace detail {

inline double clamp_probability(double p, bool& clamped) {
  clamped = !(p > kProbabilityClamp && p < 1.0 - kProbabilityClamp);
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

inline void check_batch(const AdaptationModel& m, const Matrix& x) {
  if (x.rows() != m.dim())
    fail(ErrorCode::dimension_mismatch, "batch dimension " + std::to_string(x.rows()) +
                                            " does not match model dimension " + std::to_string(m.dim()));
}

}  // namespace detail

/// L(D); when `grad` is non-null the discriminator gradient is written to it.
inline double discriminator_loss(const AdaptationModel& m, const Matrix& train_batch, const Matrix& test_batch,
                                 ModelGradient* grad = nullptr) {
  detail::check_batch(m, train_batch);
  detail::check_batch(m, test_batch);
  if (train_batch.cols() != test_batch.cols()) fail(ErrorCode::dimension_mismatch, "batch sizes differ");

  const auto test_cache = m.discriminator.forward_cached(test_batch);
  const auto train_cache = m.discriminator.forward_cached(train_batch);
  const Eigen::Index B = test_batch.cols();

  double loss = 0.0;
  Matrix d_test(1, B), d_train(1, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    bool clamped = false;
    const double pt = detail::clamp_probability(test_cache.result()(0, i), clamped);
    loss -= std::log(pt);
    d_test(0, i) = clamped ? 0.0 : -1.0 / pt;
    const double pr = detail::clamp_probability(train_cache.result()(0, i), clamped);
    loss -= std::log(1.0 - pr);
    d_train(0, i) = clamped ? 0.0 : 1.0 / (1.0 - pr);
  }
  if (grad) {
    grad->discriminator = m.discriminator.zero_gradient();
    m.discriminator.backward(test_cache, d_test, grad->discriminator);
    m.discriminator.backward(train_cache, d_train, grad->discriminator);
  }
  return loss;
}

/// L(F, G) averaged over the batch, without weight decay. When `grad` is
/// non-null, gradients for all three networks are written to it.
inline double generator_loss(const AdaptationModel& m, const Matrix& test_batch, double alpha,
                             ReconstructionNorm norm = ReconstructionNorm::mse, ModelGradient* grad = nullptr) {
  detail::check_batch(m, test_batch);
  const Eigen::Index B = test_batch.cols();
  const double D = static_cast<double>(m.dim());

  const auto r_cache = m.residual.forward_cached(test_batch);
  const Matrix adapted = test_batch + r_cache.result();
  const auto d_cache = m.discriminator.forward_cached(adapted);
  const auto g_cache = m.reconstructor.forward_cached(adapted);
  const Matrix diff = g_cache.result() - test_batch;

  double loss = 0.0;
  Matrix d_prob(1, B);
  Matrix d_recon(diff.rows(), B);
  for (Eigen::Index i = 0; i < B; ++i) {
    bool clamped = false;
    const double p = detail::clamp_probability(d_cache.result()(0, i), clamped);
    loss -= std::log(1.0 - p) / B;
    d_prob(0, i) = clamped ? 0.0 : 1.0 / ((1.0 - p) * B);

    if (norm == ReconstructionNorm::mse) {
      loss += alpha * diff.col(i).squaredNorm() / D / B;
      d_recon.col(i) = (2.0 * alpha / (D * B)) * diff.col(i);
    } else {
      const double n = diff.col(i).norm();
      loss += alpha * n / B;
      d_recon.col(i) = n > 0.0 ? Vector((alpha / (n * B)) * diff.col(i)) : Vector::Zero(diff.rows());
    }
  }

  if (grad) {
    grad->discriminator = m.discriminator.zero_gradient();
    grad->reconstructor = m.reconstructor.zero_gradient();
    grad->residual = m.residual.zero_gradient();
    Matrix d_adapted = m.discriminator.backward(d_cache, d_prob, grad->discriminator);
    d_adapted += m.reconstructor.backward(g_cache, d_recon, grad->reconstructor);
    // F = x + R(x): the identity branch carries no parameters
    m.residual.backward(r_cache, d_adapted, grad->residual);
  }
  return loss;
}

/// L(F, G) plus (weight_decay / 2) * ||W_R||^2, the objective the F/G step
/// descends. Its gradient adds weight_decay * W to R's weight gradients.
inline double generator_objective(const AdaptationModel& m, const Matrix& test_batch, double alpha,
                                  double weight_decay, ReconstructionNorm norm = ReconstructionNorm::mse,
                                  ModelGradient* grad = nullptr) {
  double loss = generator_loss(m, test_batch, alpha, norm, grad);
  loss += 0.5 * weight_decay * m.residual.weight_squared_norm();
  if (grad)
    for (std::size_t i = 0; i < m.residual.layers().size(); ++i)
      grad->residual.weight[i] += weight_decay * m.residual.layers()[i].weight;
  return loss;
}

struct TrainingReport {
  std::vector<double> discriminator_loss;  // last D step of each iteration
  std::vector<double> generator_loss;      // objective incl. weight decay
};

namespace detail {

inline Matrix stack_columns(std::span<const Vector> xs) {
  if (xs.empty()) return {};
  Matrix m(xs.front().size(), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != m.rows()) fail(ErrorCode::dimension_mismatch, "features differ in dimension");
    m.col(static_cast<Eigen::Index>(i)) = xs[i];
  }
  return m;
}

inline Matrix sample_batch(const Matrix& pool, int batch, std::mt19937_64& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, pool.cols() - 1);
  Matrix out(pool.rows(), batch);
  for (int i = 0; i < batch; ++i) out.col(i) = pool.col(pick(rng));
  return out;
}

}  // namespace detail

/// Columns of `train` / `test` are feature vectors. A fixed seed gives a
/// bit-identical parameter trajectory.
inline AdaptationModel train_adapter(const Matrix& train, const Matrix& test, const TrainingConfig& config,
                                     TrainingReport* report = nullptr) {
  config.validate();
  if (train.cols() == 0 || test.cols() == 0) fail(ErrorCode::empty_input, "both feature sets must be non-empty");
  if (train.rows() != test.rows()) fail(ErrorCode::dimension_mismatch, "train and test dimensions differ");

  AdaptationModel model = AdaptationModel::create(static_cast<int>(train.rows()), config.hidden, config.depth,
                                                  config.seed);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  MomentumSgd d_opt(model.discriminator, config.learning_rate, config.momentum);
  MomentumSgd r_opt(model.residual, config.learning_rate, config.momentum);
  MomentumSgd g_opt(model.reconstructor, config.learning_rate, config.momentum);

  for (long it = 0; it < config.iterations; ++it) {
    double d_loss = 0.0;
    for (int k = 0; k < config.d_steps; ++k) {
      const Matrix xb_train = detail::sample_batch(train, config.batch, rng);
      const Matrix xb_test = model.adapt(detail::sample_batch(test, config.batch, rng));
      ModelGradient g;
      d_loss = discriminator_loss(model, xb_train, xb_test, &g);
      if (!std::isfinite(d_loss)) throw TrainingDiverged(it);
      d_opt.step(model.discriminator, g.discriminator);
    }

    const Matrix xb = detail::sample_batch(test, config.batch, rng);
    ModelGradient g;
    const double g_loss = generator_objective(model, xb, config.alpha, config.weight_decay, config.norm, &g);
    if (!std::isfinite(g_loss)) throw TrainingDiverged(it);
    r_opt.step(model.residual, g.residual);
    g_opt.step(model.reconstructor, g.reconstructor);
    if (!model.residual.all_finite() || !model.reconstructor.all_finite() || !model.discriminator.all_finite())
      throw TrainingDiverged(it);

    if (report) {
      report->discriminator_loss.push_back(d_loss);
      report->generator_loss.push_back(g_loss);
    }
  }
  return model;
}

inline AdaptationModel train_adapter(std::span<const Vector> train, std::span<const Vector> test,
                                     const TrainingConfig& config, TrainingReport* report = nullptr) {
  return train_adapter(detail::stack_columns(train), detail::stack_columns(test), config, report);
}

/// Mean of ||R(x)|| / ||x|| over the columns of x (zero columns skipped).
inline double mean_relative_residual(const AdaptationModel& m, const Matrix& x) {
  const Matrix r = m.residual.forward(x);
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double nx = x.col(i).norm();
    if (nx == 0.0) continue;
    sum += r.col(i).norm() / nx;
    ++n;
  }
  return n ? sum / n : 0.0;
}

// ------------------------------------------------------------ checkpoint I/O
//
// "ECOA" | u32 version = 1 | u32 feature dim | 3 networks (D, R, G), each:
//   u32 layer count | per layer: u32 in, u32 out, u32 activation,
//   out*in float32 weights (row-major), out float32 biases
// All little-endian.

inline constexpr std::uint32_t kEcoaVersion = 1;

namespace detail {

inline void put_network(std::vector<char>& buf, const DenseNetwork& net) {
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(l.inputs()));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(l.outputs()));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(l.activation));
    for (Eigen::Index r = 0; r < l.outputs(); ++r)
      for (Eigen::Index c = 0; c < l.inputs(); ++c) put_le<float>(buf, static_cast<float>(l.weight(r, c)));
    for (Eigen::Index r = 0; r < l.outputs(); ++r) put_le<float>(buf, static_cast<float>(l.bias(r)));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& buf) : buf_(buf) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > buf_.size()) fail(ErrorCode::bad_format, "truncated checkpoint");
    T v = get_le<T>(buf_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }

  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

inline DenseNetwork get_network(Reader& in) {
  const auto count = in.get<std::uint32_t>();
  if (count == 0 || count > 64) fail(ErrorCode::bad_format, "implausible layer count");
  std::vector<DenseLayer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto inputs = in.get<std::uint32_t>();
    const auto outputs = in.get<std::uint32_t>();
    const auto act = in.get<std::uint32_t>();
    if (act > 2) fail(ErrorCode::bad_format, "unknown activation tag");
    if (inputs == 0 || outputs == 0 || inputs > (1u << 20) || outputs > (1u << 20))
      fail(ErrorCode::bad_format, "implausible layer size");
    DenseLayer l;
    l.activation = static_cast<Activation>(act);
    l.weight.resize(outputs, inputs);
    l.bias.resize(outputs);
    for (std::uint32_t r = 0; r < outputs; ++r)
      for (std::uint32_t c = 0; c < inputs; ++c) l.weight(r, c) = in.get<float>();
    for (std::uint32_t r = 0; r < outputs; ++r) l.bias(r) = in.get<float>();
    layers.push_back(std::move(l));
  }
  return DenseNetwork(std::move(layers));
}

}  // namespace detail

inline std::vector<char> encode_checkpoint(const AdaptationModel& m) {
  std::vector<char> buf{'E', 'C', 'O', 'A'};
  detail::put_le<std::uint32_t>(buf, kEcoaVersion);
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(m.dim()));
  detail::put_network(buf, m.discriminator);
  detail::put_network(buf, m.residual);
  detail::put_network(buf, m.reconstructor);
  return buf;
}

inline AdaptationModel decode_checkpoint(const std::vector<char>& buf) {
  if (buf.size() < 12 || std::memcmp(buf.data(), "ECOA", 4) != 0)
    fail(ErrorCode::bad_format, "missing ECOA magic");
  detail::Reader in(buf);
  in.get<std::uint32_t>();
  const auto version = in.get<std::uint32_t>();
  if (version != kEcoaVersion) fail(ErrorCode::bad_format, "unsupported ECOA version " + std::to_string(version));
  const auto dim = in.get<std::uint32_t>();
  AdaptationModel m;
  m.discriminator = detail::get_network(in);
  m.residual = detail::get_network(in);
  m.reconstructor = detail::get_network(in);
  if (!in.done()) fail(ErrorCode::bad_format, "trailing bytes in checkpoint");
  const auto d = static_cast<Eigen::Index>(dim);
  if (m.discriminator.input_dim() != d || m.discriminator.output_dim() != 1 || m.residual.input_dim() != d ||
      m.residual.output_dim() != d || m.reconstructor.input_dim() != d || m.reconstructor.output_dim() != d)
    fail(ErrorCode::dimension_mismatch, "checkpoint networks do not match feature dimension");
  return m;
}

inline void save_checkpoint(const std::filesystem::path& path, const AdaptationModel& m) {
  detail::write_all(path, encode_checkpoint(m));
}

inline AdaptationModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_all(path));
}

}  // namespace eco
