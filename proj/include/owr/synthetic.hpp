#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "owr/classifiers.hpp"
#include "owr/embedding_store.hpp"
#include "owr/protocol.hpp"

namespace owr::synthetic {

enum class Layout {
  /// ID and OOD are single Gaussian domains at -separation/2 and +separation/2 on axis 0.
  two_domains,
  /// Each domain has two lobes in the plane of axes 0 and 1: ID at (+a,+a) and
  /// (-a,-a), OOD at (+a,-a) and (-a,+a), with 2a = separation. Not linearly separable.
  xor_lobes,
};

/// Two domains, each made of `classes_per_domain` sub-blobs ("classes"). Class
/// centers scatter around their domain center with `domain_sigma` per coordinate;
/// samples scatter around their class center with `class_sigma`. The first half of
/// each domain's classes forms dataset "<prefix>_A", the second half "<prefix>_B".
struct DomainsConfig {
  Layout layout = Layout::two_domains;
  std::size_t dims = 32;
  std::size_t classes_per_domain = 20;
  std::size_t samples_per_class = 20;
  double domain_sigma = 1.0;
  double class_sigma = 0.5;
  double separation = 10.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kIdTrain = "SynthID_A";
inline constexpr const char* kIdTest = "SynthID_B";
inline constexpr const char* kOodTrain = "SynthOOD_A";
inline constexpr const char* kOodTest = "SynthOOD_B";

inline EmbeddingStore make_domains(const DomainsConfig& cfg) {
  detail::Rng rng(cfg.seed);
  std::vector<float> data;
  std::vector<RowMeta> rows;
  const double a = cfg.separation / 2.0;
  for (int domain = 1; domain >= 0; --domain) {
    const std::string prefix = domain == 1 ? "SynthID" : "SynthOOD";
    const std::string tag = domain == 1 ? "id" : "ood";
    for (std::size_t c = 0; c < cfg.classes_per_domain; ++c) {
      std::vector<double> center(cfg.dims, 0.0);
      if (cfg.layout == Layout::two_domains) {
        center[0] = domain == 1 ? -a : a;
      } else if (cfg.dims >= 2) {
        const double sign = (c % 2 == 0) ? 1.0 : -1.0;
        center[0] = sign * a;
        center[1] = (domain == 1 ? sign : -sign) * a;
      }
      for (double& v : center) v += cfg.domain_sigma * rng.normal();
      const bool first_half = c < cfg.classes_per_domain / 2;
      char label[64];
      std::snprintf(label, sizeof(label), "%s_class_%02zu", tag.c_str(), c);
      for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
        for (double v : center) data.push_back(static_cast<float>(v + cfg.class_sigma * rng.normal()));
        char id[96];
        std::snprintf(id, sizeof(id), "%s-c%02zu-s%03zu", tag.c_str(), c, s);
        rows.push_back({id, label, prefix + (first_half ? "_A" : "_B")});
      }
    }
  }
  return EmbeddingStore(cfg.dims, std::move(data), std::move(rows));
}

/// Train on the "_A" datasets, test on the "_B" datasets.
inline ScenarioManifest domains_manifest(std::string name = "SYNTH") {
  ScenarioManifest m;
  m.name = std::move(name);
  m.train_id = {kIdTrain};
  m.train_ood = {kOodTrain};
  m.test_id = {kIdTest};
  m.test_ood = {kOodTest};
  return m;
}

}  // namespace owr::synthetic
