#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "owr/error.hpp"

namespace owr {

/// Binary confusion counts with ID as the positive class.
/// tp: ID predicted ID. tn: OOD predicted OOD. p: ID total. n: OOD total.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t p = 0;
  std::uint64_t n = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    p += o.p;
    n += o.n;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  bool operator==(const ConfusionCounts&) const = default;

  /// Accounts one prediction.
  void add(int prediction, int truth) {
    if (truth == 1) {
      ++p;
      if (prediction == 1) ++tp;
    } else {
      ++n;
      if (prediction == 0) ++tn;
    }
  }
};

inline ConfusionCounts count_confusion(std::span<const int> predictions, std::span<const int> truths) {
  if (predictions.size() != truths.size())
    throw DomainError("count_confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                      std::to_string(truths.size()) + " truths");
  if (predictions.empty()) throw DomainError("count_confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if ((predictions[i] != 0 && predictions[i] != 1) || (truths[i] != 0 && truths[i] != 1))
      throw DomainError("count_confusion: labels must be 0 or 1 (index " + std::to_string(i) + ")");
    c.add(predictions[i], truths[i]);
  }
  return c;
}

/// Balanced accuracy, (tp/p + tn/n) / 2. Undefined without both classes.
inline double baccu(const ConfusionCounts& c) {
  if (c.p == 0 || c.n == 0)
    throw DomainError("baccu undefined: p=" + std::to_string(c.p) + ", n=" + std::to_string(c.n));
  if (c.tp > c.p || c.tn > c.n) throw DomainError("baccu: inconsistent counts (tp > p or tn > n)");
  return 0.5 * (static_cast<double>(c.tp) / static_cast<double>(c.p) +
                static_cast<double>(c.tn) / static_cast<double>(c.n));
}

}  // namespace owr
