#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <thread>
#include <vector>

#include "owr/error.hpp"
#include "owr/matrix.hpp"

namespace owr {

/// neighbor[i] is the index of the nearest other point to point i.
struct FirstNeighborTable {
  std::vector<std::size_t> neighbor;

  std::size_t size() const noexcept { return neighbor.size(); }
};

/// A flat clustering. Cluster ids are contiguous in [0, k) and numbered in order of
/// their smallest member index. `centroids` holds member means (k x dims); it is
/// empty when the partition was built from neighbor links alone.
struct Partition {
  std::vector<std::size_t> assignment;
  std::size_t k = 0;
  Matrix centroids;
};

/// Partitions ordered from finest to coarsest; k strictly decreases.
struct PartitionHierarchy {
  std::vector<Partition> partitions;

  std::vector<std::size_t> k_sequence() const {
    std::vector<std::size_t> ks;
    ks.reserve(partitions.size());
    for (const auto& p : partitions) ks.push_back(p.k);
    return ks;
  }
};

namespace detail {

/// Runs fn(begin, end) over [0, n) split into contiguous chunks. Each index is
/// handled by exactly one call, so per-index results do not depend on `workers`.
template <typename Fn>
void parallel_rows(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  // Not worth spawning threads for small scans.
  if (n < 256) workers = 1;
  workers = std::min(workers, n);
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t begin = 0; begin < n; begin += chunk)
    pool.emplace_back([&fn, begin, end = std::min(n, begin + chunk)] { fn(begin, end); });
}

struct DisjointSets {
  std::vector<std::size_t> parent;

  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

/// Exact first-neighbor search by full pairwise scan. Ties go to the smallest index.
/// `workers` = 0 picks the hardware concurrency.
template <typename T>
FirstNeighborTable first_neighbors(MatrixView<T> points, Metric metric = Metric::euclidean,
                                   std::size_t workers = 0) {
  const std::size_t n = points.rows;
  if (n < 2) throw DomainError("first_neighbors needs at least 2 points, got " + std::to_string(n));
  if (!all_finite(points.data)) throw DomainError("first_neighbors: input contains NaN or Inf");

  FirstNeighborTable table;
  table.neighbor.assign(n, 0);
  detail::parallel_rows(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto xi = points.row(i);
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = (i == 0) ? 1 : 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = dissimilarity(xi, points.row(j), metric);
        if (d < best) {
          best = d;
          best_j = j;
        }
      }
      table.neighbor[i] = best_j;
    }
  });
  return table;
}

/// Connected components of the first-neighbor graph: i and j are linked when
/// j = k(i), k(j) = i, or k(i) = k(j). The third condition adds no component
/// beyond the first two (both points already link to the shared neighbor), so a
/// union over the edges i -- k(i) is exact.
inline Partition adjacency_partition(const FirstNeighborTable& table) {
  const std::size_t n = table.size();
  detail::DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (table.neighbor[i] >= n) throw DomainError("first-neighbor table entry out of range");
    sets.unite(i, table.neighbor[i]);
  }
  Partition p;
  p.assignment.assign(n, 0);
  std::vector<std::size_t> id_of_root(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = sets.find(i);
    if (id_of_root[r] == std::numeric_limits<std::size_t>::max()) id_of_root[r] = p.k++;
    p.assignment[i] = id_of_root[r];
  }
  return p;
}

/// Means of the points in each cluster, accumulated in 64-bit.
template <typename T>
Matrix cluster_means(MatrixView<T> points, std::span<const std::size_t> assignment, std::size_t k) {
  Matrix centroids(k, points.cols);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    auto c = centroids.row(assignment[i]);
    auto x = points.row(i);
    for (std::size_t d = 0; d < points.cols; ++d) c[d] += static_cast<double>(x[d]);
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw DomainError("cluster " + std::to_string(c) + " has no members");
    for (double& v : centroids.row(c)) v /= static_cast<double>(counts[c]);
  }
  return centroids;
}

/// FINCH hierarchy. Level 0 groups the points by first-neighbor links; each next
/// level applies the same rule to the previous level's centroids. Centroids are
/// always means over the original points. Stops after emitting k = 1, or when a
/// merge fails to reduce k.
template <typename T>
PartitionHierarchy finch(MatrixView<T> points, Metric metric = Metric::euclidean, std::size_t workers = 0) {
  if (points.rows < 2) throw DomainError("finch needs at least 2 points, got " + std::to_string(points.rows));

  PartitionHierarchy h;
  Partition level = adjacency_partition(first_neighbors(points, metric, workers));
  level.centroids = cluster_means(points, level.assignment, level.k);
  h.partitions.push_back(std::move(level));

  while (h.partitions.back().k > 1) {
    const Partition& prev = h.partitions.back();
    const Partition merge = adjacency_partition(first_neighbors(prev.centroids.view(), metric, workers));
    if (merge.k >= prev.k) break;
    Partition next;
    next.k = merge.k;
    next.assignment.resize(prev.assignment.size());
    for (std::size_t i = 0; i < prev.assignment.size(); ++i)
      next.assignment[i] = merge.assignment[prev.assignment[i]];
    next.centroids = cluster_means(points, next.assignment, next.k);
    h.partitions.push_back(std::move(next));
  }
  return h;
}

/// The partition with the most clusters.
inline const Partition& select_partition(const PartitionHierarchy& h) {
  if (h.partitions.empty()) throw DomainError("select_partition: empty hierarchy");
  return *std::max_element(h.partitions.begin(), h.partitions.end(),
                           [](const Partition& a, const Partition& b) { return a.k < b.k; });
}

}  // namespace owr
