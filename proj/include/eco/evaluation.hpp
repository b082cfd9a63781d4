#pragma once

// Nearest-neighbor retrieval with per-category recall@k, and a linear
// softmax classifier trained on fixed features.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eco/error.hpp"

namespace eco {

inline const std::vector<std::string>& default_categories() {
  static const std::vector<std::string> labels{"bread", "cereal", "cheese", "dairy", "frozen-food", "meat"};
  return labels;
}

struct LabeledItem {
  std::uint64_t id = 0;
  Eigen::VectorXd values;
  std::string category;
  std::string store;
};

using LabeledCorpus = std::vector<LabeledItem>;

enum class Metric { euclidean, cosine };

inline double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Metric metric) {
  if (a.size() != b.size()) fail(ErrorCode::dimension_mismatch, "vectors differ in dimension");
  if (metric == Metric::euclidean) return (a - b).norm();
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

struct Neighbor {
  std::uint64_t id = 0;
  double distance = 0.0;
  std::size_t index = 0;  // position in the corpus
};

/// The k closest corpus items, ascending by distance, ties by ascending id.
inline std::vector<Neighbor> nn_retrieve(const Eigen::VectorXd& query, std::span<const LabeledItem> corpus,
                                         std::size_t k, Metric metric = Metric::euclidean) {
  if (corpus.empty()) fail(ErrorCode::empty_input, "empty retrieval corpus");
  if (k > corpus.size()) fail(ErrorCode::invalid_argument, "k exceeds corpus size");
  std::vector<Neighbor> all;
  all.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    all.push_back({corpus[i].id, distance(query, corpus[i].values, metric), i});
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

struct RecallCurve {
  int k_max = 0;
  /// recall[category][k - 1]
  std::map<std::string, std::vector<double>> recall;
};

/// Fraction of each category's queries with at least one same-category item
/// among their top k neighbors, for k = 1..k_max.
inline RecallCurve recall_curve(std::span<const LabeledItem> queries, std::span<const LabeledItem> corpus, int k_max,
                                Metric metric = Metric::euclidean) {
  if (k_max < 1) fail(ErrorCode::invalid_argument, "k_max must be at least 1");
  const auto depth = std::min<std::size_t>(static_cast<std::size_t>(k_max), corpus.size());
  std::map<std::string, std::vector<int>> hits;  // hits[cat][k-1] = #queries with first hit at rank <= k
  std::map<std::string, int> totals;
  for (const auto& q : queries) {
    auto& h = hits[q.category];
    if (h.empty()) h.assign(k_max, 0);
    ++totals[q.category];
    if (corpus.empty()) continue;
    const auto ranked = nn_retrieve(q.values, corpus, depth, metric);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (corpus[ranked[r].index].category == q.category) {
        for (int k = static_cast<int>(r); k < k_max; ++k) ++h[k];
        break;
      }
    }
  }
  RecallCurve curve;
  curve.k_max = k_max;
  for (const auto& [cat, h] : hits) {
    auto& out = curve.recall[cat];
    out.resize(k_max);
    for (int k = 0; k < k_max; ++k) out[k] = static_cast<double>(h[k]) / totals[cat];
  }
  return curve;
}

// -------------------------------------------------------------- classifier

/// Logits layer W x + b over fixed features.
struct SoftmaxClassifier {
  Eigen::MatrixXd weight;  // classes x dim
  Eigen::VectorXd bias;
  std::vector<std::string> labels;

  Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const {
    Eigen::VectorXd z = weight * x + bias;
    z.array() -= z.maxCoeff();
    z = z.array().exp();
    return z / z.sum();
  }

  int predict_index(const Eigen::VectorXd& x) const {
    Eigen::Index best = 0;
    (weight * x + bias).maxCoeff(&best);
    return static_cast<int>(best);
  }

  const std::string& predict(const Eigen::VectorXd& x) const { return labels.at(predict_index(x)); }
};

/// Mean softmax cross-entropy over the columns of x plus (l2 / 2) ||W||^2.
/// Gradients (if requested) are of the full objective.
inline double classifier_objective(const SoftmaxClassifier& c, const Eigen::MatrixXd& x, std::span<const int> y,
                                   double l2, Eigen::MatrixXd* grad_w = nullptr, Eigen::VectorXd* grad_b = nullptr) {
  const Eigen::Index n = x.cols();
  Eigen::MatrixXd z = c.weight * x;
  z.colwise() += c.bias;
  double loss = 0.0;
  Eigen::MatrixXd dz(z.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.col(i).maxCoeff();
    const Eigen::VectorXd e = (z.col(i).array() - m).exp();
    const double s = e.sum();
    loss += -(z(y[i], i) - m - std::log(s));
    dz.col(i) = e / s;
    dz(y[i], i) -= 1.0;
  }
  loss /= static_cast<double>(n);
  loss += 0.5 * l2 * c.weight.squaredNorm();
  if (grad_w) *grad_w = dz * x.transpose() / static_cast<double>(n) + l2 * c.weight;
  if (grad_b) *grad_b = dz.rowwise().sum() / static_cast<double>(n);
  return loss;
}

struct ClassifierOptions {
  double l2 = 1e-4;
  long steps = 5000;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent. The L2 term is applied as a proximal
/// (implicit) step, W <- (W - lr * dCE/dW) / (1 + lr * l2), which shares the
/// objective's minimizer and stays stable for arbitrarily large l2.
inline SoftmaxClassifier train_classifier(const Eigen::MatrixXd& x, std::span<const int> y,
                                          const std::vector<std::string>& labels, const ClassifierOptions& opt) {
  if (x.cols() == 0) fail(ErrorCode::empty_input, "no training examples");
  if (static_cast<std::size_t>(x.cols()) != y.size()) fail(ErrorCode::dimension_mismatch, "label count mismatch");
  const auto classes = static_cast<Eigen::Index>(labels.size());
  std::vector<int> per_class(labels.size(), 0);
  for (int label : y) {
    if (label < 0 || label >= classes) fail(ErrorCode::invalid_argument, "label out of range");
    ++per_class[label];
  }
  for (std::size_t c = 0; c < per_class.size(); ++c)
    if (per_class[c] == 0) fail(ErrorCode::empty_input, "no examples for class '" + labels[c] + "'");
  if (!(opt.l2 >= 0.0) || !(opt.learning_rate > 0.0)) fail(ErrorCode::invalid_argument, "bad classifier options");

  SoftmaxClassifier c;
  c.labels = labels;
  c.weight.resize(classes, x.rows());
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  for (Eigen::Index j = 0; j < c.weight.cols(); ++j)
    for (Eigen::Index i = 0; i < classes; ++i) c.weight(i, j) = init(rng);
  c.bias = Eigen::VectorXd::Zero(classes);

  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  for (long step = 0; step < opt.steps; ++step) {
    const double loss = classifier_objective(c, x, y, 0.0, &gw, &gb);
    if (!std::isfinite(loss)) fail(ErrorCode::training_diverged, "classifier diverged at step " + std::to_string(step));
    c.weight = (c.weight - opt.learning_rate * gw) / (1.0 + opt.learning_rate * opt.l2);
    c.bias -= opt.learning_rate * gb;
  }
  return c;
}

/// Fraction correct per label present in the test labels.
inline std::map<std::string, double> per_category_accuracy(const SoftmaxClassifier& c, const Eigen::MatrixXd& x,
                                                           std::span<const int> y) {
  std::map<std::string, std::pair<int, int>> counts;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    auto& [correct, total] = counts[c.labels.at(y[i])];
    ++total;
    if (c.predict_index(x.col(i)) == y[i]) ++correct;
  }
  std::map<std::string, double> acc;
  for (const auto& [label, ct] : counts) acc[label] = static_cast<double>(ct.first) / ct.second;
  return acc;
}

// ------------------------------------------------------------------- CSV

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_recall_csv(std::ostream& out, const RecallCurve& curve) {
  out << "k,category,recall\n";
  for (int k = 1; k <= curve.k_max; ++k)
    for (const auto& [cat, r] : curve.recall) out << k << ',' << cat << ',' << format_double(r[k - 1]) << '\n';
}

inline void write_accuracy_csv(std::ostream& out, const std::map<std::string, double>& acc) {
  out << "category,accuracy\n";
  for (const auto& [cat, a] : acc) out << cat << ',' << format_double(a) << '\n';
}

}  // namespace eco
