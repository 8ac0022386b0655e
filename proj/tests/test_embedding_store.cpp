#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <string>

#include "oracles.hpp"
#include "owr/embedding_store.hpp"

namespace {

using owr::EmbeddingStore;
using owr::FormatError;
using owr::RowMeta;

std::string header(std::uint32_t rows, std::uint32_t dims) {
  std::string h = "EMB1";
  owr::detail::put_u32(h, 1);
  owr::detail::put_u32(h, rows);
  owr::detail::put_u32(h, dims);
  return h;
}

std::string with_meta(std::string bytes, const std::string& meta) {
  owr::detail::put_u32(bytes, static_cast<std::uint32_t>(meta.size()));
  return bytes + meta;
}

EmbeddingStore random_store(std::mt19937_64& rng, std::size_t rows, std::size_t dims) {
  std::uniform_real_distribution<float> u(-100.0f, 100.0f);
  std::vector<float> data(rows * dims);
  for (float& v : data) v = u(rng);
  std::vector<RowMeta> meta;
  for (std::size_t i = 0; i < rows; ++i)
    meta.push_back({"s" + std::to_string(i), "class " + std::to_string(i % 7), (i % 2) ? "A" : "B,with comma"});
  return EmbeddingStore(dims, std::move(data), std::move(meta));
}

TEST(EmbeddingStore, DecodesTwoByThreeBinary) {
  std::string bytes = header(2, 3);
  for (float f : {1.f, 2.f, 3.f, 4.f, 5.f, 6.f}) owr::detail::put_f32(bytes, f);
  bytes = with_meta(bytes, "0,a,catA,Garbage6\n1,b,catB,Garbage6\n");
  const auto s = owr::decode_emb1(bytes);
  EXPECT_EQ(s.n_rows(), 2u);
  EXPECT_EQ(s.n_dims(), 3u);
  EXPECT_EQ(s.row(1)[2], 6.f);
  EXPECT_EQ(s.meta(1).class_label, "catB");
}

TEST(EmbeddingStore, TruncatedPayloadIsReportedWithOffset) {
  std::string bytes = header(2, 3) + std::string(20, '\0');
  try {
    owr::decode_emb1(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("byte offset 36"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingStore, MalformedBinaryInputs) {
  EXPECT_THROW(owr::decode_emb1("EMB"), FormatError);
  std::string bad_magic = header(0, 1);
  bad_magic[0] = 'X';
  EXPECT_THROW(owr::decode_emb1(with_meta(bad_magic, "")), FormatError);
  std::string bad_version = header(0, 1);
  bad_version[4] = 2;
  EXPECT_THROW(owr::decode_emb1(with_meta(bad_version, "")), FormatError);

  std::string one = header(1, 1);
  owr::detail::put_f32(one, 0.5f);
  EXPECT_THROW(owr::decode_emb1(one), FormatError);                                   // no metadata length
  EXPECT_THROW(owr::decode_emb1(with_meta(one, "")), FormatError);                    // row 0 undescribed
  EXPECT_THROW(owr::decode_emb1(with_meta(one, "1,a,c,d\n")), FormatError);           // index out of range
  EXPECT_THROW(owr::decode_emb1(with_meta(one, "0,a,,d\n")), FormatError);            // empty label
  EXPECT_THROW(owr::decode_emb1(with_meta(one, "0,a,c\n")), FormatError);             // field count
  EXPECT_THROW(owr::decode_emb1(with_meta(one, "0,a,c,d\n") + "x"), FormatError);     // trailing bytes

  std::string two = header(2, 1);
  owr::detail::put_f32(two, 0.5f);
  owr::detail::put_f32(two, 1.5f);
  EXPECT_THROW(owr::decode_emb1(with_meta(two, "0,a,c,d\n0,b,c,d\n")), FormatError);  // duplicate index
  try {
    owr::decode_emb1(with_meta(two, "0,a,c,d\n1,a,c,d\n"));
    FAIL() << "expected duplicate sample_id";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate sample_id 'a'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("byte offset 36"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingStore, ParsesCsvWithoutHeader) {
  const auto s = owr::decode_csv("s1,catA,Garbage6,0.1,0.2\ns2,catB,Garbage6,0.3,0.4\n");
  EXPECT_EQ(s.n_rows(), 2u);
  EXPECT_EQ(s.n_dims(), 2u);
  EXPECT_EQ(owr::class_set(s), (std::set<std::string>{"catA", "catB"}));
  EXPECT_EQ(s.row(0)[1], 0.2f);
}

TEST(EmbeddingStore, CsvHeaderDetectedByNonNumericFourthField) {
  const auto s = owr::decode_csv("id,label,dataset,v0\r\nx,c,d,1e-3\r\n\r\n");
  ASSERT_EQ(s.n_rows(), 1u);
  EXPECT_EQ(s.row(0)[0], 1e-3f);
  // Only the first line may be a header.
  EXPECT_THROW(owr::decode_csv("x,c,d,1\nid,label,dataset,v0\n"), FormatError);
}

TEST(EmbeddingStore, CsvErrorsNameTheLine) {
  auto line_of = [](const std::string& text) {
    try {
      owr::decode_csv(text);
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(line_of("a,c,d,1,2\nb,c,d,1\n").find("line 2"), std::string::npos);
  EXPECT_NE(line_of("a,c,d,1\na,c,d,2\n").find("duplicate sample_id"), std::string::npos);
  EXPECT_NE(line_of("a,c,d,1\nb,c,d,1\nc,c,d,zz\n").find("line 3"), std::string::npos);
  EXPECT_NE(line_of("a,c,d\n").find("line 1"), std::string::npos);
  EXPECT_NE(line_of("a,\"c,d,1\n").find("unterminated"), std::string::npos);
}

TEST(EmbeddingStore, CsvQuotingRoundTrips) {
  const EmbeddingStore s(1, {0.1f}, {{"id \"q\"", "class, with comma", "ds"}});
  const auto back = owr::decode_csv(owr::encode_csv(s));
  EXPECT_EQ(back.meta(0), s.meta(0));
  EXPECT_EQ(back.row(0)[0], 0.1f);
}

TEST(EmbeddingStore, SingleValueBinaryRoundTripIsByteIdentical) {
  oracle::TempDir dir;
  const EmbeddingStore s(1, {0.5f}, {{"only", "c", "d"}});
  owr::save_store(s, dir / "a.emb");
  const auto back = owr::load_store(dir / "a.emb");
  EXPECT_EQ(back, s);
  owr::save_store(back, dir / "b.emb");
  EXPECT_EQ(owr::detail::read_file(dir / "a.emb"), owr::detail::read_file(dir / "b.emb"));
}

TEST(EmbeddingStore, RandomBinaryRoundTripIsBitwise) {
  std::mt19937_64 rng(42);
  const auto s = random_store(rng, 100, 64);
  const std::string bytes = owr::encode_emb1(s);
  const auto back = owr::decode_emb1(bytes);
  ASSERT_EQ(back.data().size(), s.data().size());
  EXPECT_EQ(std::memcmp(back.data().data(), s.data().data(), s.data().size() * sizeof(float)), 0);
  EXPECT_EQ(back, s);
}

TEST(EmbeddingStore, BinaryPreservesSpecialFloats) {
  const float nan = std::bit_cast<float>(0x7fc00123u);
  const EmbeddingStore s(4, {-0.0f, nan, INFINITY, 1e-45f}, {{"x", "c", "d"}});
  EXPECT_EQ(owr::decode_emb1(owr::encode_emb1(s)), s);
}

TEST(EmbeddingStore, CsvRoundTripPreservesValues) {
  oracle::TempDir dir;
  std::mt19937_64 rng(7);
  const auto s = random_store(rng, 20, 5);
  owr::save_store(s, dir / "s.csv");
  EXPECT_EQ(owr::load_store(dir / "s.csv"), s);

  const EmbeddingStore tenth(1, {0.1f}, {{"x", "c", "d"}});
  EXPECT_EQ(owr::decode_csv(owr::encode_csv(tenth)).row(0)[0], 0.1f);
}

TEST(EmbeddingStore, LoadErrors) {
  oracle::TempDir dir;
  EXPECT_THROW(owr::load_store(dir / "missing.emb"), owr::IoError);
  EXPECT_THROW(owr::load_store(dir / "x.txt"), FormatError);
  const EmbeddingStore s(1, {0.5f}, {{"only", "c", "d"}});
  EXPECT_THROW(owr::save_store(s, dir / "no" / "such" / "dir.emb"), owr::IoError);
}

TEST(EmbeddingStore, ConstructorRejectsBrokenInvariants) {
  EXPECT_THROW(EmbeddingStore(2, {1.f}, {{"a", "c", "d"}}), owr::DomainError);
  EXPECT_THROW(EmbeddingStore(1, {1.f}, {{"a", "", "d"}}), owr::DomainError);
  EXPECT_THROW(EmbeddingStore(1, {1.f, 2.f}, {{"a", "c", "d"}, {"a", "c", "d"}}), owr::DomainError);
  EXPECT_THROW(EmbeddingStore(1, {1.f}, {{"a", "c\n", "d"}}), owr::DomainError);
}

EmbeddingStore three_datasets() {
  return EmbeddingStore(1, {1, 2, 3, 4, 5},
                        {{"a1", "x", "A"}, {"b1", "y", "B"}, {"a2", "x", "A"}, {"c1", "z", "C"}, {"b2", "y", "B"}});
}

TEST(SelectByDatasets, Basics) {
  const auto s = three_datasets();
  const auto a = owr::select_by_datasets(s, {"A"});
  ASSERT_EQ(a.n_rows(), 2u);
  EXPECT_EQ(a.meta(0).sample_id, "a1");
  EXPECT_EQ(a.meta(1).sample_id, "a2");

  const auto none = owr::select_by_datasets(s, {});
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(none.n_dims(), 1u);

  EXPECT_EQ(owr::select_by_datasets(s, {"A", "B", "C"}), s);
  EXPECT_TRUE(owr::select_by_datasets(s, {"nope"}).empty());
}

TEST(SelectByDatasets, IdempotentAndUnionOfDisjointSelections) {
  std::mt19937_64 rng(3);
  const auto s = random_store(rng, 60, 3);
  for (const std::set<std::string>& names :
       {std::set<std::string>{"A"}, std::set<std::string>{"B,with comma"}, std::set<std::string>{"A", "B,with comma"}}) {
    const auto once = owr::select_by_datasets(s, names);
    EXPECT_EQ(owr::select_by_datasets(once, names), once);
  }
  // Concatenating the per-dataset selections gives the same rows as the union
  // selection, up to order.
  const auto a = owr::select_by_datasets(s, {"A"});
  const auto b = owr::select_by_datasets(s, {"B,with comma"});
  const auto joined = owr::concat(a, b);
  const auto both = owr::select_by_datasets(s, {"A", "B,with comma"});
  ASSERT_EQ(joined.n_rows(), both.n_rows());
  std::map<std::string, std::vector<float>> by_id;
  for (std::size_t i = 0; i < both.n_rows(); ++i)
    by_id[both.meta(i).sample_id] = {both.row(i).begin(), both.row(i).end()};
  for (std::size_t i = 0; i < joined.n_rows(); ++i)
    EXPECT_EQ(by_id.at(joined.meta(i).sample_id), std::vector<float>(joined.row(i).begin(), joined.row(i).end()));
}

TEST(EmbeddingStore, L2NormalizedRowsHaveUnitNorm) {
  const EmbeddingStore s(2, {3, 4, 0, 0}, {{"a", "c", "d"}, {"b", "c", "d"}});
  const auto n = owr::l2_normalized(s);
  EXPECT_FLOAT_EQ(n.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(n.row(0)[1], 0.8f);
  EXPECT_EQ(n.row(1)[0], 0.0f);
}

}  // namespace
