#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eco/adaptation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace eco;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// D outputs exactly 0.5 everywhere.
void neutral_discriminator(AdaptationModel& m) {
  auto& last = m.discriminator.layers().back();
  last.weight.setZero();
  last.bias.setZero();
}

// G(x) = relu(x) - relu(-x) = x with a 2*dim hidden layer.
void identity_reconstructor(AdaptationModel& m) {
  const auto d = m.dim();
  auto& l = m.reconstructor.layers();
  ASSERT_EQ(l[0].outputs(), 2 * d);
  l[0].weight << Matrix::Identity(d, d), -Matrix::Identity(d, d);
  l[0].bias.setZero();
  l[1].weight << Matrix::Identity(d, d), -Matrix::Identity(d, d);
  l[1].bias.setZero();
}

}  // namespace

TEST(Losses, DiscriminatorHandValue) {
  auto m = AdaptationModel::create(4, 6, 1, 1);
  neutral_discriminator(m);
  std::mt19937_64 rng(2);
  EXPECT_NEAR(discriminator_loss(m, random_matrix(4, 1, rng), random_matrix(4, 1, rng)), 2.0 * std::log(2.0), 1e-9);
  // sum over the batch
  EXPECT_NEAR(discriminator_loss(m, random_matrix(4, 5, rng), random_matrix(4, 5, rng)), 10.0 * std::log(2.0), 1e-9);
}

TEST(Losses, GeneratorHandValue) {
  auto m = AdaptationModel::create(4, 8, 1, 3);
  neutral_discriminator(m);
  identity_reconstructor(m);
  std::mt19937_64 rng(4);
  EXPECT_NEAR(generator_loss(m, random_matrix(4, 1, rng), 1.0), std::log(2.0), 1e-9);
  EXPECT_NEAR(generator_loss(m, random_matrix(4, 7, rng), 1.0, ReconstructionNorm::l2), std::log(2.0), 1e-9);
  // R starts at zero, so weight decay only sees its first layer
  const double wd = m.residual.layers()[0].weight.squaredNorm();
  EXPECT_NEAR(generator_objective(m, random_matrix(4, 3, rng), 1.0, 1.0), std::log(2.0) + 0.5 * wd, 1e-9);
}

TEST(Losses, ReconstructionTermIsMeanSquaredError) {
  auto m = AdaptationModel::create(3, 5, 1, 5);
  neutral_discriminator(m);
  auto& l = m.reconstructor.layers().back();
  l.weight.setZero();
  l.bias.setZero();  // G == 0, so error is ||x||^2 / D
  Matrix x(3, 2);
  x << 1, 0, 2, 3, 2, 0;
  const double expect = std::log(2.0) + 0.5 * ((1 + 4 + 4) / 3.0 + 9 / 3.0) * 2.0;
  EXPECT_NEAR(generator_loss(m, x, 2.0), expect, 1e-12);
}

TEST(Losses, ClampedProbabilitiesStayFinite) {
  auto m = AdaptationModel::create(2, 3, 1, 6);
  auto& last = m.discriminator.layers().back();
  last.weight.setZero();
  last.bias.setConstant(100.0);  // D == 1
  Matrix x = Matrix::Ones(2, 1);
  ModelGradient g;
  const double l = discriminator_loss(m, x, x, &g);
  EXPECT_NEAR(l, -std::log(1.0 - 1e-7) - std::log(1e-7), 1e-6);
  EXPECT_EQ(g.discriminator.squared_norm(), 0.0);
}

TEST(Gradients, DiscriminatorMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    auto m = AdaptationModel::create(6, 10, 1, 70 + trial);
    oracle::perturb_residual(m, rng);
    const auto r = oracle::check_gradients(m, random_matrix(6, 5, rng), random_matrix(6, 5, rng),
                                           oracle::Loss::discriminator, 1.0, 1.0, 100, rng);
    EXPECT_LT(r.max_relative_error, 1e-4);
  }
}

TEST(Gradients, GeneratorMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (int depth : {1, 2}) {
    auto m = AdaptationModel::create(6, 10, depth, 80 + depth);
    oracle::perturb_residual(m, rng);
    const auto r = oracle::check_gradients(m, random_matrix(6, 5, rng), random_matrix(6, 5, rng),
                                           oracle::Loss::generator, 1.0, 1.0, 100, rng);
    EXPECT_LT(r.max_relative_error, 1e-4);
  }
}

TEST(Model, ResidualStartsAsIdentity) {
  const auto m = AdaptationModel::create(5, 7, 1, 9);
  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(5, 4, rng);
  EXPECT_EQ(m.adapt(x), x);
  EXPECT_EQ(mean_relative_residual(m, x), 0.0);
  EXPECT_THROW(m.adapt(Vector(Vector::Zero(4))), Error);
}

TEST(Checkpoint, RoundTripAndRejects) {
  auto m = AdaptationModel::create(4, 6, 1, 10);
  std::mt19937_64 rng(10);
  oracle::perturb_residual(m, rng);
  const auto buf = encode_checkpoint(m);
  EXPECT_EQ(std::string(buf.data(), 4), "ECOA");
  const auto back = decode_checkpoint(buf);
  EXPECT_EQ(encode_checkpoint(back), buf);
  const Vector x = Vector::Ones(4);
  EXPECT_LT((back.adapt(x) - m.adapt(x)).norm(), 1e-5);

  auto truncated = buf;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), Error);
  auto trailing = buf;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), Error);
  auto version = buf;
  version[4] = 9;
  EXPECT_THROW(decode_checkpoint(version), Error);
}

TEST(Training, DeterministicForSeed) {
  const auto toy = oracle::toy_domains(1, 8, 3, 20, 20, 1.0);
  TrainingConfig c;
  c.hidden = 16;
  c.iterations = 50;
  c.seed = 3;
  TrainingReport ra, rb;
  const auto a = train_adapter(toy.train, toy.test, c, &ra);
  const auto b = train_adapter(toy.train, toy.test, c, &rb);
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
  EXPECT_EQ(ra.generator_loss, rb.generator_loss);
  EXPECT_EQ(ra.discriminator_loss.size(), 50u);
}

TEST(Training, DivergenceReported) {
  const auto toy = oracle::toy_domains(2, 8, 3, 20, 20, 1.0);
  TrainingConfig c;
  c.hidden = 16;
  c.iterations = 200;
  c.learning_rate = 1e6;
  try {
    train_adapter(toy.train, toy.test, c);
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_GE(e.iteration(), 0);
  }
}

TEST(Training, ConfigValidation) {
  TrainingConfig c;
  EXPECT_EQ(c.alpha, 1.0);
  EXPECT_EQ(c.weight_decay, 1.0);
  EXPECT_EQ(c.batch, 32);
  EXPECT_EQ(c.learning_rate, 1e-3);
  c.batch = 0;
  EXPECT_THROW(c.validate(), Error);
  Matrix empty(4, 0);
  EXPECT_THROW(train_adapter(empty, Matrix::Ones(4, 2), TrainingConfig{}), Error);
}
