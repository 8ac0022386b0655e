#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "owr/embedding_store.hpp"
#include "owr/error.hpp"
#include "owr/finch.hpp"
#include "owr/matrix.hpp"

namespace owr {

/// Decision target: 0 is out-of-domain, 1 is in-domain.
enum class Domain : std::uint8_t { ood = 0, id = 1 };

// ---------------------------------------------------------------------------
// Nearest-centroid models
// ---------------------------------------------------------------------------

struct CentroidModel {
  Matrix centroids;
  std::vector<Domain> domain_of;

  std::size_t n_dims() const noexcept { return centroids.cols; }

  void validate() const {
    if (domain_of.size() != centroids.rows)
      throw DomainError("centroid model: " + std::to_string(centroids.rows) + " centroids but " +
                        std::to_string(domain_of.size()) + " domain tags");
    bool has_id = false, has_ood = false;
    for (Domain d : domain_of) (d == Domain::id ? has_id : has_ood) = true;
    if (!has_id || !has_ood) throw DomainError("centroid model needs at least one ID and one OOD centroid");
    if (!all_finite(std::span<const double>(centroids.data)))
      throw DomainError("centroid model has non-finite centroids");
  }

  bool operator==(const CentroidModel&) const = default;
};

namespace detail {

inline void require_pair(const EmbeddingStore& id_store, const EmbeddingStore& ood_store, std::size_t min_rows,
                         std::string_view who) {
  if (id_store.n_rows() < min_rows || ood_store.n_rows() < min_rows)
    throw DomainError(std::string(who) + ": needs at least " + std::to_string(min_rows) +
                      " row(s) per domain, got ID=" + std::to_string(id_store.n_rows()) +
                      " OOD=" + std::to_string(ood_store.n_rows()));
  if (id_store.n_dims() != ood_store.n_dims())
    throw DomainError(std::string(who) + ": dimension mismatch, ID has " + std::to_string(id_store.n_dims()) +
                      " dims, OOD has " + std::to_string(ood_store.n_dims()));
}

inline void append_centroids(CentroidModel& model, const Matrix& centroids, Domain tag) {
  model.centroids.cols = centroids.cols;
  model.centroids.rows += centroids.rows;
  model.centroids.data.insert(model.centroids.data.end(), centroids.data.begin(), centroids.data.end());
  model.domain_of.insert(model.domain_of.end(), centroids.rows, tag);
}

}  // namespace detail

/// One mean per domain: centroids [ID mean, OOD mean].
inline CentroidModel fit_ncm(const EmbeddingStore& id_store, const EmbeddingStore& ood_store) {
  detail::require_pair(id_store, ood_store, 1, "fit_ncm");
  CentroidModel model;
  for (const auto* s : {&id_store, &ood_store}) {
    const std::vector<std::size_t> one(s->n_rows(), 0);
    detail::append_centroids(model, cluster_means(s->matrix(), one, 1), s == &id_store ? Domain::id : Domain::ood);
  }
  model.validate();
  return model;
}

/// FINCH run separately on each domain; the finest partition of each contributes
/// its cluster means. ID centroids come first.
inline CentroidModel fit_ncm_finch(const EmbeddingStore& id_store, const EmbeddingStore& ood_store,
                                   Metric metric = Metric::euclidean) {
  detail::require_pair(id_store, ood_store, 2, "fit_ncm_finch");
  CentroidModel model;
  detail::append_centroids(model, select_partition(finch(id_store.matrix(), metric)).centroids, Domain::id);
  detail::append_centroids(model, select_partition(finch(ood_store.matrix(), metric)).centroids, Domain::ood);
  model.validate();
  return model;
}

/// 1 iff the nearest centroid is tagged ID. An exact tie between the nearest ID and
/// nearest OOD centroid resolves to OOD.
template <typename T>
int predict_centroid(const CentroidModel& model, std::span<const T> query, Metric metric = Metric::euclidean) {
  if (query.size() != model.n_dims())
    throw DomainError("predict_centroid: query has " + std::to_string(query.size()) + " dims, model has " +
                      std::to_string(model.n_dims()));
  if (!all_finite(query)) throw DomainError("predict_centroid: query contains NaN or Inf");
  double best_id = std::numeric_limits<double>::infinity();
  double best_ood = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.centroids.rows; ++c) {
    const double d = dissimilarity(query, model.centroids.row(c), metric);
    double& best = model.domain_of[c] == Domain::id ? best_id : best_ood;
    if (d < best) best = d;
  }
  return best_id < best_ood ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Linear heads
// ---------------------------------------------------------------------------

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double swish(double x) { return x * sigmoid(x); }

inline double swish_derivative(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

/// Binary cross-entropy of a logit against a {0,1} target, computed without
/// overflow: max(z, 0) - z*y + log(1 + exp(-|z|)).
inline double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

enum class LinearVariant { fc1, fc2 };

inline constexpr std::size_t kDefaultHiddenWidth = 256;

/// FC1: logit = w.x + b.
/// FC2: logit = w2.swish(W1 x + b1) + b2.
/// Parameters live in one flat vector:
///   FC1: [w (d), b]
///   FC2: [W1 (h x d, row-major), b1 (h), w2 (h), b2]
struct LinearHead {
  LinearVariant variant = LinearVariant::fc1;
  std::size_t input_dims = 0;
  std::size_t hidden_width = 0;
  double threshold = 0.5;
  std::vector<double> params;

  LinearHead() = default;
  LinearHead(LinearVariant v, std::size_t dims, std::size_t hidden = kDefaultHiddenWidth)
      : variant(v), input_dims(dims), hidden_width(v == LinearVariant::fc2 ? hidden : 0) {
    if (dims == 0) throw DomainError("linear head needs at least one input dimension");
    if (v == LinearVariant::fc2 && hidden == 0) throw DomainError("FC2 hidden width must be positive");
    params.assign(parameter_count(), 0.0);
  }

  std::size_t parameter_count() const {
    return variant == LinearVariant::fc1 ? input_dims + 1 : hidden_width * (input_dims + 2) + 1;
  }

  // FC2 offsets.
  std::size_t b1_offset() const { return hidden_width * input_dims; }
  std::size_t w2_offset() const { return b1_offset() + hidden_width; }
  std::size_t b2_offset() const { return w2_offset() + hidden_width; }

  /// True for entries that are weights rather than biases (L2 applies to these).
  bool is_weight(std::size_t i) const {
    if (variant == LinearVariant::fc1) return i < input_dims;
    return i < b1_offset() || (i >= w2_offset() && i < b2_offset());
  }

  template <typename T>
  double logit(std::span<const T> x) const {
    if (x.size() != input_dims)
      throw DomainError("linear head: query has " + std::to_string(x.size()) + " dims, head expects " +
                        std::to_string(input_dims));
    if (variant == LinearVariant::fc1) {
      double z = params[input_dims];
      for (std::size_t d = 0; d < input_dims; ++d) z += params[d] * static_cast<double>(x[d]);
      return z;
    }
    double z = params[b2_offset()];
    for (std::size_t j = 0; j < hidden_width; ++j) {
      double a = params[b1_offset() + j];
      const double* w = params.data() + j * input_dims;
      for (std::size_t d = 0; d < input_dims; ++d) a += w[d] * static_cast<double>(x[d]);
      z += params[w2_offset() + j] * swish(a);
    }
    return z;
  }

  template <typename T>
  double probability(std::span<const T> x) const {
    return sigmoid(logit(x));
  }

  void validate() const {
    if (variant == LinearVariant::fc2 && hidden_width == 0) throw DomainError("FC2 hidden width must be positive");
    if (params.size() != parameter_count())
      throw DomainError("linear head has " + std::to_string(params.size()) + " parameters, expected " +
                        std::to_string(parameter_count()));
    if (!all_finite(std::span<const double>(params)) || !std::isfinite(threshold))
      throw DomainError("linear head has non-finite parameters");
  }

  bool operator==(const LinearHead&) const = default;
};

/// 1 iff sigmoid(logit) is strictly above the threshold.
template <typename T>
int predict_linear(const LinearHead& head, std::span<const T> query) {
  return head.probability(query) > head.threshold ? 1 : 0;
}

/// Weighted mean binary cross-entropy over `batch` rows of `x` plus
/// 0.5 * l2 * |weights|^2. Writes the gradient into `grad` when non-null.
template <typename T>
double loss_and_gradient(const LinearHead& head, MatrixView<T> x, std::span<const double> targets,
                         std::span<const double> sample_weights, std::span<const std::size_t> batch, double l2,
                         std::vector<double>* grad) {
  const std::size_t d = head.input_dims;
  const std::size_t h = head.hidden_width;
  const auto& p = head.params;
  if (grad) grad->assign(p.size(), 0.0);
  if (batch.empty()) return 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::vector<double> pre(h), act(h);
  double loss = 0.0;
  for (std::size_t r : batch) {
    const auto xr = x.row(r);
    double z;
    if (head.variant == LinearVariant::fc1) {
      z = head.logit(xr);
    } else {
      z = p[head.b2_offset()];
      for (std::size_t j = 0; j < h; ++j) {
        double a = p[head.b1_offset() + j];
        const double* w = p.data() + j * d;
        for (std::size_t k = 0; k < d; ++k) a += w[k] * static_cast<double>(xr[k]);
        pre[j] = a;
        act[j] = swish(a);
        z += p[head.w2_offset() + j] * act[j];
      }
    }
    const double sw = sample_weights[r];
    loss += sw * bce_with_logit(z, targets[r]) * inv_b;
    if (!grad) continue;

    const double dz = sw * (sigmoid(z) - targets[r]) * inv_b;
    auto& g = *grad;
    if (head.variant == LinearVariant::fc1) {
      for (std::size_t k = 0; k < d; ++k) g[k] += dz * static_cast<double>(xr[k]);
      g[d] += dz;
      continue;
    }
    g[head.b2_offset()] += dz;
    for (std::size_t j = 0; j < h; ++j) {
      g[head.w2_offset() + j] += dz * act[j];
      const double da = dz * p[head.w2_offset() + j] * swish_derivative(pre[j]);
      g[head.b1_offset() + j] += da;
      double* gw = g.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) gw[k] += da * static_cast<double>(xr[k]);
    }
  }
  if (l2 > 0.0) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!head.is_weight(i)) continue;
      loss += 0.5 * l2 * p[i] * p[i];
      if (grad) (*grad)[i] += l2 * p[i];
    }
  }
  return loss;
}

enum class ClassWeighting { none, balanced };

struct TrainConfig {
  double step_size = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double l2_penalty = 0.0;
  ClassWeighting class_weighting = ClassWeighting::balanced;
  std::size_t hidden_width = kDefaultHiddenWidth;

  void validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw DomainError("step_size must be positive");
    if (epochs < 1) throw DomainError("epochs must be at least 1");
    if (batch_size < 1) throw DomainError("batch_size must be at least 1");
    if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) throw DomainError("l2_penalty must be non-negative");
    if (hidden_width < 1) throw DomainError("hidden_width must be at least 1");
  }
};

namespace detail {

/// Seeded stream with a portable mapping to doubles and bounded integers, so
/// trained parameters depend only on the seed, not on the standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % bound;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace detail

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
inline void initialize_parameters(LinearHead& head, std::uint64_t seed) {
  detail::Rng rng(seed);
  std::fill(head.params.begin(), head.params.end(), 0.0);
  if (head.variant == LinearVariant::fc1) {
    const double a = detail::glorot_limit(head.input_dims, 1);
    for (std::size_t i = 0; i < head.input_dims; ++i) head.params[i] = rng.uniform(-a, a);
    return;
  }
  const double a1 = detail::glorot_limit(head.input_dims, head.hidden_width);
  for (std::size_t i = 0; i < head.b1_offset(); ++i) head.params[i] = rng.uniform(-a1, a1);
  const double a2 = detail::glorot_limit(head.hidden_width, 1);
  for (std::size_t j = 0; j < head.hidden_width; ++j) head.params[head.w2_offset() + j] = rng.uniform(-a2, a2);
}

/// Mini-batch gradient descent on binary cross-entropy, ID rows labeled 1 and OOD
/// rows labeled 0. Row order is reshuffled every epoch from `cfg.seed`.
inline LinearHead fit_linear_head(const EmbeddingStore& id_store, const EmbeddingStore& ood_store,
                                  LinearVariant variant, const TrainConfig& cfg = {}) {
  cfg.validate();
  detail::require_pair(id_store, ood_store, 1, "fit_linear_head");
  const EmbeddingStore both = concat(id_store, ood_store);
  const std::size_t n_id = id_store.n_rows();
  const std::size_t n = both.n_rows();

  std::vector<double> targets(n, 0.0);
  std::fill(targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>(n_id), 1.0);
  std::vector<double> weights(n, 1.0);
  if (cfg.class_weighting == ClassWeighting::balanced) {
    const double w_id = static_cast<double>(n) / (2.0 * static_cast<double>(n_id));
    const double w_ood = static_cast<double>(n) / (2.0 * static_cast<double>(n - n_id));
    for (std::size_t i = 0; i < n; ++i) weights[i] = i < n_id ? w_id : w_ood;
  }

  LinearHead head(variant, both.n_dims(), cfg.hidden_width);
  // Distinct stream for initialization and for shuffling.
  initialize_parameters(head, cfg.seed);
  detail::Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad;
  const auto x = both.matrix();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const double loss = loss_and_gradient(head, x, targets, weights, batch, cfg.l2_penalty, &grad);
      if (!std::isfinite(loss)) throw TrainingError("non-finite training loss", epoch, batch_no);
      for (std::size_t i = 0; i < grad.size(); ++i) head.params[i] -= cfg.step_size * grad[i];
    }
  }
  head.validate();
  return head;
}

// ---------------------------------------------------------------------------
// Unified decision function
// ---------------------------------------------------------------------------

enum class Approach { ncm, ncm_finch, fc1, fc2 };

/// Canonical tags used in reports and tables.
inline std::string_view approach_tag(Approach a) {
  switch (a) {
    case Approach::ncm: return "NCM";
    case Approach::ncm_finch: return "NCM+FINCH";
    case Approach::fc1: return "FC1";
    case Approach::fc2: return "FC2";
  }
  return "?";
}

/// Accepts the report tags and the lower-case CLI spellings.
inline Approach parse_approach(std::string_view s) {
  if (s == "NCM" || s == "ncm") return Approach::ncm;
  if (s == "NCM+FINCH" || s == "ncm+finch" || s == "ncm-finch" || s == "ncm_finch") return Approach::ncm_finch;
  if (s == "FC1" || s == "fc1") return Approach::fc1;
  if (s == "FC2" || s == "fc2") return Approach::fc2;
  throw DomainError("unknown approach '" + std::string(s) + "' (expected ncm, ncm+finch, fc1 or fc2)");
}

/// A fitted f: x -> {0, 1}. Receives unlabeled query vectors only.
class DomainClassifier {
public:
  DomainClassifier(Approach approach, CentroidModel model, Metric metric)
      : approach_(approach), metric_(metric), model_(std::move(model)) {
    if (approach == Approach::fc1 || approach == Approach::fc2)
      throw DomainError("centroid model given for a linear-head approach");
    std::get<CentroidModel>(model_).validate();
  }

  explicit DomainClassifier(LinearHead head)
      : approach_(head.variant == LinearVariant::fc1 ? Approach::fc1 : Approach::fc2), model_(std::move(head)) {
    std::get<LinearHead>(model_).validate();
  }

  Approach approach() const noexcept { return approach_; }
  Metric metric() const noexcept { return metric_; }
  const std::variant<CentroidModel, LinearHead>& model() const noexcept { return model_; }

  std::size_t n_dims() const {
    if (const auto* c = std::get_if<CentroidModel>(&model_)) return c->n_dims();
    return std::get<LinearHead>(model_).input_dims;
  }

  template <typename T>
  int predict(std::span<const T> query) const {
    if (const auto* c = std::get_if<CentroidModel>(&model_)) return predict_centroid(*c, query, metric_);
    return predict_linear(std::get<LinearHead>(model_), query);
  }

  bool operator==(const DomainClassifier&) const = default;

private:
  Approach approach_;
  Metric metric_ = Metric::euclidean;
  std::variant<CentroidModel, LinearHead> model_;
};

inline DomainClassifier fit_classifier(Approach approach, const EmbeddingStore& id_store,
                                       const EmbeddingStore& ood_store, Metric metric, const TrainConfig& cfg) {
  switch (approach) {
    case Approach::ncm: return DomainClassifier(approach, fit_ncm(id_store, ood_store), metric);
    case Approach::ncm_finch: return DomainClassifier(approach, fit_ncm_finch(id_store, ood_store, metric), metric);
    case Approach::fc1: return DomainClassifier(fit_linear_head(id_store, ood_store, LinearVariant::fc1, cfg));
    case Approach::fc2: return DomainClassifier(fit_linear_head(id_store, ood_store, LinearVariant::fc2, cfg));
  }
  throw DomainError("unknown approach");
}

}  // namespace owr
