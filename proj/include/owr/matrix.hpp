#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "owr/error.hpp"

namespace owr {

/// Read-only row-major view over a dense matrix.
template <typename T>
struct MatrixView {
  std::span<const T> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const T> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

/// Owning row-major matrix of doubles (centroids, parameters).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }
  MatrixView<double> view() const { return {data, rows, cols}; }

  bool operator==(const Matrix&) const = default;
};

enum class Metric { euclidean, cosine };

inline std::string_view to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

inline Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw DomainError("unknown metric '" + std::string(s) + "' (expected euclidean or cosine)");
}

/// Dissimilarity used for every nearest-neighbor decision, accumulated in 64-bit.
/// Euclidean returns the squared distance (same ordering, no sqrt). Cosine returns
/// 1 - cos(a, b); a zero vector has similarity 0 with everything.
template <typename A, typename B>
double dissimilarity(std::span<const A> a, std::span<const B> b, Metric metric) {
  if (metric == Metric::euclidean) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
      acc += d * d;
    }
    return acc;
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = static_cast<double>(a[k]);
    const double y = static_cast<double>(b[k]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (const T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace owr
