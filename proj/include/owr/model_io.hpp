#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "owr/classifiers.hpp"
#include "owr/embedding_store.hpp"
#include "owr/error.hpp"

// OWRM1 model container, little-endian throughout. See docs/formats.md.
//
//   offset  size  field
//   0       5     magic "OWRM1"
//   5       1     kind: 1 NCM, 2 NCM+FINCH, 3 FC1, 4 FC2
//   6       1     metric: 0 euclidean, 1 cosine
//   7       1     reserved, 0
//   8       4     u32 n_dims
//   centroid kinds (1, 2):
//   12      4     u32 m (centroid count)
//   16      m     domain tag per centroid: 0 OOD, 1 ID
//   16+m    8md   f64 centroids, row-major
//   linear kinds (3, 4):
//   12      4     u32 hidden width (0 for FC1)
//   16      8     f64 decision threshold
//   24      4     u32 parameter count
//   28      8p    f64 parameters in LinearHead layout

namespace owr {

namespace detail {

inline constexpr char kModelMagic[5] = {'O', 'W', 'R', 'M', '1'};

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<char>((bits >> s) & 0xFFu));
}

inline double get_f64(std::string_view in, std::size_t off) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

inline std::uint8_t kind_code(Approach a) {
  switch (a) {
    case Approach::ncm: return 1;
    case Approach::ncm_finch: return 2;
    case Approach::fc1: return 3;
    case Approach::fc2: return 4;
  }
  return 0;
}

}  // namespace detail

inline std::string encode_model(const DomainClassifier& clf) {
  std::string out(detail::kModelMagic, 5);
  out.push_back(static_cast<char>(detail::kind_code(clf.approach())));
  out.push_back(static_cast<char>(clf.metric() == Metric::euclidean ? 0 : 1));
  out.push_back('\0');
  detail::put_u32(out, static_cast<std::uint32_t>(clf.n_dims()));
  if (const auto* c = std::get_if<CentroidModel>(&clf.model())) {
    detail::put_u32(out, static_cast<std::uint32_t>(c->centroids.rows));
    for (Domain d : c->domain_of) out.push_back(static_cast<char>(d));
    for (double v : c->centroids.data) detail::put_f64(out, v);
    return out;
  }
  const auto& h = std::get<LinearHead>(clf.model());
  detail::put_u32(out, static_cast<std::uint32_t>(h.hidden_width));
  detail::put_f64(out, h.threshold);
  detail::put_u32(out, static_cast<std::uint32_t>(h.params.size()));
  for (double v : h.params) detail::put_f64(out, v);
  return out;
}

inline DomainClassifier decode_model(std::string_view bytes) {
  auto fail = [](std::size_t off, const std::string& what) {
    return FormatError("OWRM1: " + what + " at byte offset " + std::to_string(off));
  };
  auto need = [&](std::size_t off, std::uint64_t len) {
    if (bytes.size() < off || bytes.size() - off < len) throw fail(bytes.size(), "truncated model file");
  };
  need(0, 12);
  if (std::memcmp(bytes.data(), detail::kModelMagic, 5) != 0) throw fail(0, "bad magic (expected \"OWRM1\")");
  const auto kind = static_cast<std::uint8_t>(bytes[5]);
  const auto metric_code = static_cast<std::uint8_t>(bytes[6]);
  if (metric_code > 1) throw fail(6, "unknown metric code " + std::to_string(metric_code));
  const Metric metric = metric_code == 0 ? Metric::euclidean : Metric::cosine;
  const std::size_t dims = detail::get_u32(bytes, 8);
  std::size_t off = 12;

  auto finish = [&](DomainClassifier clf) {
    if (off != bytes.size()) throw fail(off, "trailing bytes after model payload");
    return clf;
  };

  if (kind == 1 || kind == 2) {
    need(off, 4);
    const std::size_t m = detail::get_u32(bytes, off);
    off += 4;
    need(off, m + 8ull * m * dims);
    CentroidModel model;
    model.centroids = Matrix(m, dims);
    for (std::size_t c = 0; c < m; ++c) {
      const auto tag = static_cast<std::uint8_t>(bytes[off + c]);
      if (tag > 1) throw fail(off + c, "bad domain tag " + std::to_string(tag));
      model.domain_of.push_back(static_cast<Domain>(tag));
    }
    off += m;
    for (double& v : model.centroids.data) {
      v = detail::get_f64(bytes, off);
      off += 8;
    }
    try {
      return finish(DomainClassifier(kind == 1 ? Approach::ncm : Approach::ncm_finch, std::move(model), metric));
    } catch (const DomainError& e) {
      throw FormatError(std::string("OWRM1: invalid centroid model: ") + e.what());
    }
  }
  if (kind == 3 || kind == 4) {
    need(off, 16);
    const std::size_t hidden = detail::get_u32(bytes, off);
    const double threshold = detail::get_f64(bytes, off + 4);
    const std::size_t count = detail::get_u32(bytes, off + 12);
    off += 16;
    need(off, 8ull * count);
    LinearHead head;
    head.variant = kind == 3 ? LinearVariant::fc1 : LinearVariant::fc2;
    head.input_dims = dims;
    head.hidden_width = hidden;
    head.threshold = threshold;
    head.params.resize(count);
    for (double& v : head.params) {
      v = detail::get_f64(bytes, off);
      off += 8;
    }
    if (kind == 3 && hidden != 0) throw fail(12, "FC1 model with non-zero hidden width");
    try {
      return finish(DomainClassifier(std::move(head)));
    } catch (const DomainError& e) {
      throw FormatError(std::string("OWRM1: invalid linear head: ") + e.what());
    }
  }
  throw fail(5, "unknown model kind " + std::to_string(kind));
}

inline void save_model(const DomainClassifier& clf, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(clf));
}

inline DomainClassifier load_model(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return decode_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace owr
