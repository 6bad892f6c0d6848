#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stgraph/features.hpp"

using namespace stgraph;

TEST(EncodeHour, QuarterPoints) {
  auto h0 = encode_hour(0), h6 = encode_hour(6), h12 = encode_hour(12);
  EXPECT_NEAR(h0.sin, 0.0, 1e-15);
  EXPECT_NEAR(h0.cos, 1.0, 1e-15);
  EXPECT_NEAR(h6.sin, 1.0, 1e-15);
  EXPECT_NEAR(h6.cos, 0.0, 1e-15);
  EXPECT_NEAR(h12.sin, 0.0, 1e-15);
  EXPECT_NEAR(h12.cos, -1.0, 1e-15);
}

TEST(EncodeHour, OutOfRange) {
  EXPECT_THROW(encode_hour(-1), DataError);
  EXPECT_THROW(encode_hour(24), DataError);
}

TEST(EncodeHour, UnitCircleAndWrapAround) {
  for (int h = 0; h < 24; ++h) {
    const auto e = encode_hour(h);
    EXPECT_NEAR(e.sin * e.sin + e.cos * e.cos, 1.0, 1e-9);
  }
  auto dist = [](CyclicPair a, CyclicPair b) { return std::hypot(a.sin - b.sin, a.cos - b.cos); };
  EXPECT_LT(dist(encode_hour(23), encode_hour(0)), dist(encode_hour(12), encode_hour(0)));
  // h and h + 24 share an angle once extended past the day boundary.
  EXPECT_NEAR(std::sin(2 * std::numbers::pi * 25 / 24.0), encode_hour(1).sin, 1e-12);
}

TEST(EncodeWeekday, Points) {
  const auto d0 = encode_weekday(0);
  EXPECT_NEAR(d0.sin, 0.0, 1e-15);
  EXPECT_NEAR(d0.cos, 1.0, 1e-15);
  const auto d3 = encode_weekday(3), d4 = encode_weekday(4);
  EXPECT_NEAR(d3.cos, d4.cos, 1e-12);
  EXPECT_NEAR(d3.sin, -d4.sin, 1e-12);
  const auto d6 = encode_weekday(6);
  EXPECT_DOUBLE_EQ(d6.sin, std::sin(12 * std::numbers::pi / 7));
  EXPECT_DOUBLE_EQ(d6.cos, std::cos(12 * std::numbers::pi / 7));
  EXPECT_THROW(encode_weekday(7), DataError);
  EXPECT_THROW(encode_weekday(-1), DataError);
}

TEST(EmbedHash, EmptyTextIsZero) {
  const auto e = embed_hash("");
  for (double v : e) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(embed_hash("  ,;-- "), e);
}

TEST(EmbedHash, UnitNormForNonEmptyText) {
  for (const char* s : {"a", "rear-end at signal", "Unit 1 FAILED to control speed and struck unit 2"}) {
    double n2 = 0.0;
    for (double v : embed_hash(s)) n2 += v * v;
    EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-9);
  }
}

TEST(EmbedHash, RepetitionRemovedByNormalization) {
  // Hand computation: "rear-end" yields tokens {rear, end} with signed unit
  // counts s_rear at bin b_rear and s_end at b_end; doubling the text doubles
  // both counts, which normalisation removes.
  const auto tokens = tokenize("rear-end");
  ASSERT_EQ(tokens, (std::vector<std::string>{"rear", "end"}));
  Embedding expected{};
  for (const auto& t : tokens) {
    const auto h = token_hash(t);
    expected[h % kEmbeddingDim] += ((h / kEmbeddingDim) & 1U) ? -1.0 : 1.0;
  }
  double n2 = 0.0;
  for (double v : expected) n2 += v * v;
  for (double& v : expected) v /= std::sqrt(n2);

  const auto once = embed_hash("rear-end");
  const auto twice = embed_hash("rear-end rear-end");
  for (std::size_t j = 0; j < kEmbeddingDim; ++j) {
    EXPECT_NEAR(once[j], expected[j], 1e-15);
    EXPECT_NEAR(twice[j], once[j], 1e-15);
  }
}

TEST(EmbedHash, CaseInsensitiveAndStableHash) {
  EXPECT_EQ(embed_hash("Struck Pole"), embed_hash("struck pole"));
  // Pin the hash so the embedding stays reproducible across platforms.
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(token_hash("struck"), token_hash("struck"));
}

TEST(LoadEmbeddings, TwoRows) {
  std::vector<std::pair<std::string, Embedding>> rows;
  Embedding a{}, b{};
  a[0] = 1.5e-3;
  b[383] = -2.0;
  rows.push_back({"r1", a});
  rows.push_back({"r2", b});
  const auto table = parse_embeddings_text(serialize_embeddings(rows));
  EXPECT_EQ(table.size(), 2u);
  EXPECT_EQ(table.at("r1"), a);
  EXPECT_EQ(table.at("r2"), b);
  EXPECT_THROW(table.at("r3"), DataError);
}

TEST(LoadEmbeddings, ShortRowNamesTheLine) {
  std::string text = "id";
  for (int j = 0; j < 384; ++j) text += ",e" + std::to_string(j);
  text += "\nr1";
  for (int j = 0; j < 383; ++j) text += ",0.5";
  text += "\n";
  try {
    parse_embeddings_text(text);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("383"), std::string::npos);
  }
}

TEST(LoadEmbeddings, DuplicateIdAndBadHeader) {
  std::string header = "id";
  for (int j = 0; j < 384; ++j) header += ",e" + std::to_string(j);
  std::string row = "x";
  for (int j = 0; j < 384; ++j) row += ",1";
  EXPECT_THROW(parse_embeddings_text(header + "\n" + row + "\n" + row + "\n"), DataError);
  EXPECT_THROW(parse_embeddings_text("id,e0\nx,1\n"), SchemaError);
}

TEST(FineNodeFeatures, LayoutAndLength) {
  CrashRecord r;
  r.id = "m";
  parse_date_time("2024-01-01", "00:00", r.timestamp);  // a Monday
  r.sae_level = 0;
  const Embedding zero{};
  const auto x = fine_node_features(r, zero);
  ASSERT_EQ(x.size(), 389u);
  const std::vector<double> head{0, 0, 1, 0, 1};
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(x[j], head[j], 1e-15);
  for (std::size_t j = 5; j < 389; ++j) EXPECT_EQ(x[j], 0.0);

  CrashRecord r2 = r;
  r2.narrative = "entirely different";
  const auto e2 = embed_hash(r2.narrative);
  const auto x2 = fine_node_features(r2, e2);
  EXPECT_TRUE(std::equal(x.begin(), x.begin() + 5, x2.begin()));
  for (std::size_t j = 0; j < 384; ++j) EXPECT_EQ(x2[5 + j], e2[j]);
}

TEST(FineNodeFeatures, DimensionMismatch) {
  CrashRecord r;
  r.id = "m";
  std::vector<double> short_emb(100, 0.0);
  EXPECT_THROW(fine_node_features(r, short_emb), ShapeError);
}
