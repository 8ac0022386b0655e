#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "owr/model_io.hpp"

namespace {

using owr::DomainClassifier;

owr::EmbeddingStore gaussian_store(std::mt19937_64& rng, double center, std::size_t n, std::size_t dims,
                                   const std::string& prefix) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> data;
  std::vector<owr::RowMeta> meta;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dims; ++d) data.push_back(static_cast<float>(center) + g(rng));
    meta.push_back({prefix + std::to_string(i), prefix + "_c", prefix + "_d"});
  }
  return owr::EmbeddingStore(dims, std::move(data), std::move(meta));
}

std::vector<DomainClassifier> all_kinds() {
  std::mt19937_64 rng(42);
  const auto id = gaussian_store(rng, 0.0, 30, 5, "id");
  const auto ood = gaussian_store(rng, 4.0, 30, 5, "ood");
  owr::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.hidden_width = 7;
  return {owr::fit_classifier(owr::Approach::ncm, id, ood, owr::Metric::euclidean, cfg),
          owr::fit_classifier(owr::Approach::ncm_finch, id, ood, owr::Metric::cosine, cfg),
          owr::fit_classifier(owr::Approach::fc1, id, ood, owr::Metric::euclidean, cfg),
          owr::fit_classifier(owr::Approach::fc2, id, ood, owr::Metric::euclidean, cfg)};
}

TEST(ModelIo, RoundTripsEveryKind) {
  for (const auto& clf : all_kinds()) {
    const std::string bytes = owr::encode_model(clf);
    EXPECT_EQ(bytes.substr(0, 5), "OWRM1");
    const auto back = owr::decode_model(bytes);
    EXPECT_EQ(back, clf) << owr::approach_tag(clf.approach());
    EXPECT_EQ(owr::encode_model(back), bytes);
  }
}

TEST(ModelIo, FileRoundTripPreservesPredictions) {
  oracle::TempDir tmp;
  std::mt19937_64 rng(7);
  std::normal_distribution<float> g(2.0f, 3.0f);
  for (const auto& clf : all_kinds()) {
    const auto path = tmp / "m.owrm";
    owr::save_model(clf, path);
    const auto back = owr::load_model(path);
    for (int i = 0; i < 50; ++i) {
      std::vector<float> q(5);
      for (float& v : q) v = g(rng);
      EXPECT_EQ(back.predict(std::span<const float>(q)), clf.predict(std::span<const float>(q)));
    }
  }
}

TEST(ModelIo, LayoutOfSmallNcmModel) {
  owr::CentroidModel m;
  m.centroids = owr::Matrix(2, 1);
  m.centroids.data = {1.0, -2.0};
  m.domain_of = {owr::Domain::id, owr::Domain::ood};
  const auto bytes = owr::encode_model(DomainClassifier(owr::Approach::ncm, m, owr::Metric::euclidean));
  ASSERT_EQ(bytes.size(), 12u + 4 + 2 + 16);
  EXPECT_EQ(bytes[5], 1);
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes[16], 1);
  EXPECT_EQ(bytes[17], 0);
  // 1.0 = 0x3FF0000000000000, little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[25]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 0xF0);
}

TEST(ModelIo, RejectsMalformedBytes) {
  const auto good = owr::encode_model(all_kinds()[3]);
  EXPECT_THROW(owr::decode_model(good.substr(0, 8)), owr::FormatError);
  EXPECT_THROW(owr::decode_model(good.substr(0, good.size() - 1)), owr::FormatError);
  EXPECT_THROW(owr::decode_model(good + "x"), owr::FormatError);
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(owr::decode_model(bad), owr::FormatError);
  bad = good;
  bad[5] = 9;
  EXPECT_THROW(owr::decode_model(bad), owr::FormatError);
  bad = good;
  bad[6] = 5;
  EXPECT_THROW(owr::decode_model(bad), owr::FormatError);
  bad = good;
  bad[8] = static_cast<char>(bad[8] + 1);  // dims no longer match the parameter count
  EXPECT_THROW(owr::decode_model(bad), owr::FormatError);

  const auto ncm = owr::encode_model(all_kinds()[0]);
  bad = ncm;
  bad[16] = 3;
  EXPECT_THROW(owr::decode_model(bad), owr::FormatError);
  bad = ncm;
  bad[16] = bad[17] = 1;  // no OOD centroid left
  EXPECT_THROW(owr::decode_model(bad), owr::FormatError);
}

TEST(ModelIo, FileErrors) {
  oracle::TempDir tmp;
  EXPECT_THROW(owr::load_model(tmp / "missing.owrm"), owr::IoError);
  owr::detail::write_file(tmp / "junk.owrm", "not a model");
  try {
    owr::load_model(tmp / "junk.owrm");
    FAIL();
  } catch (const owr::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("junk.owrm"), std::string::npos);
  }
}

}  // namespace
