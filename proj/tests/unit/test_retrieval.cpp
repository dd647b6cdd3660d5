#include <gtest/gtest.h>

#include <set>

#include "semsr/metrics.hpp"
#include "semsr/retrieval.hpp"
#include "support/fixtures.hpp"

namespace semsr {
namespace {

RankedList list_of(std::vector<ItemIndex> items) {
  RankedList out;
  double score = static_cast<double>(items.size());
  for (auto i : items) out.entries.push_back({i, score--});
  return out;
}

TEST(Index, NormalizesRows) {
  Matrix t(3, 2);
  t << 0.6, 0.8, 3.0, 4.0, -1.0, 0.0;
  const auto index = build_index(t);
  EXPECT_NEAR((index.rows().row(0) - t.row(0)).cwiseAbs().maxCoeff(), 0.0, 1e-7);
  EXPECT_NEAR(index.rows().row(1).norm(), 1.0, 1e-12);
  EXPECT_NEAR(index.rows()(1, 0), 0.6, 1e-12);
}

TEST(Index, ThousandRandomRowsAreUnit) {
  std::mt19937_64 rng(1);
  const auto index = build_index(testing::uniform(1000, 16, -5, 5, rng));
  for (Eigen::Index i = 0; i < 1000; ++i) EXPECT_NEAR(index.rows().row(i).norm(), 1.0, 1e-6);
}

TEST(Index, ZeroRowNamesTheItem) {
  Matrix t = Matrix::Ones(4, 3);
  t.row(2).setZero();
  try {
    build_index(t);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("item 2"), std::string::npos);
  }
}

TEST(Query, SelfSimilarityRanksFirst) {
  std::mt19937_64 rng(2);
  const Matrix t = testing::uniform(50, 8, -1, 1, rng);
  const auto index = build_index(t);
  for (ItemIndex i = 0; i < 50; i += 7) {
    const auto r = index.query(t.row(i).transpose() * 3.0, 5);
    EXPECT_EQ(r.entries[0].item, i);
    EXPECT_NEAR(r.entries[0].score, 1.0, 1e-6);
  }
}

TEST(Query, OrthogonalQueryTiesByIndex) {
  Matrix t = Matrix::Zero(5, 3);
  t.col(0).setOnes();
  t(1, 1) = 0.5;  // still orthogonal to e2
  const auto r = build_index(t).query(Vector::Unit(3, 2), 5);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(r.entries[k].item, k);
    EXPECT_EQ(r.entries[k].score, 0.0);
  }
}

TEST(Query, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix t = testing::uniform(200, 6, -1, 1, rng);
    const Vector q = testing::uniform(6, 1, -1, 1, rng);
    const auto got = build_index(t).query(q, 10);
    std::vector<std::pair<double, ItemIndex>> all;
    for (Eigen::Index i = 0; i < 200; ++i)
      all.emplace_back(-t.row(i).dot(q) / (t.row(i).norm() * q.norm()), static_cast<ItemIndex>(i));
    std::sort(all.begin(), all.end());
    for (std::size_t k = 0; k < 10; ++k) {
      EXPECT_EQ(got.entries[k].item, all[k].second);
      EXPECT_NEAR(got.entries[k].score, -all[k].first, 1e-12);
    }
  }
}

TEST(Query, FullDepthIsPermutationAndErrors) {
  std::mt19937_64 rng(4);
  const auto index = build_index(testing::uniform(30, 4, -1, 1, rng));
  auto items = index.query(Vector::Ones(4), 30).items();
  std::sort(items.begin(), items.end());
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(items[i], i);
  EXPECT_THROW(index.query(Vector::Zero(4), 3), DataError);
  EXPECT_THROW(index.query(Vector::Ones(5), 3), UsageError);
  EXPECT_THROW(index.query(Vector::Ones(4), 31), UsageError);
}

TEST(Rerank, ReordersByRanker) {
  // a=0, b=1, c=2 with ranker b > c > a.
  const std::vector<double> ranker{0.1, 0.9, 0.5};
  EXPECT_EQ(rerank(list_of({0, 1, 2}), ranker, 3).items(), (std::vector<ItemIndex>{1, 2, 0}));
}

TEST(Rerank, AgreeingRankerIsAFixedPoint) {
  const std::vector<double> ranker{0.3, 0.2, 0.1, 0.0};
  const auto cands = list_of({0, 1, 2, 3});
  EXPECT_EQ(rerank(cands, ranker, 4).items(), cands.items());
}

TEST(Rerank, HeadPermutationMatchesSortOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ItemIndex> items(300);
    std::iota(items.begin(), items.end(), 0);
    seeded_shuffle(items, rng);
    items.resize(100);
    const auto cands = list_of(items);
    std::vector<double> ranker(300);
    for (auto& x : ranker) x = std::round(unit_uniform(rng) * 50.0);
    const auto out = rerank(cands, ranker, 20);
    ASSERT_EQ(out.size(), 20u);
    std::vector<ItemIndex> head(items.begin(), items.begin() + 20);
    std::vector<ItemIndex> expected = head;
    std::sort(expected.begin(), expected.end(), [&](ItemIndex a, ItemIndex b) {
      return ranker[a] != ranker[b] ? ranker[a] > ranker[b] : a < b;
    });
    EXPECT_EQ(out.items(), expected);
    EXPECT_EQ(rerank(out, ranker, 20).items(), out.items());
    const std::vector<ItemIndex> target{items[static_cast<std::size_t>(trial) % 40]};
    EXPECT_EQ(recall_at_k(out, target[0], 20), recall_at_k(cands, target[0], 20));
  }
}

TEST(Rerank, Errors) {
  const std::vector<double> short_scores{0.1, 0.2};
  EXPECT_THROW(rerank(list_of({0, 1, 5}), short_scores, 3), DataError);
  EXPECT_THROW(rerank(list_of({0, 1}), short_scores, 3), UsageError);
}

TEST(Candidates, FileRoundTrip) {
  const auto dir = testing::temp_dir("cands");
  std::vector<CandidateRecord> records{{0, list_of({4, 2, 9}), 2}, {1, list_of({1, 3}), std::nullopt}};
  records[0].ranked.entries[1].score = 0.1 + 0.2;
  write_candidates(dir + "/c.jsonl", records);
  const auto back = read_candidates(dir + "/c.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].ranked.items(), records[0].ranked.items());
  EXPECT_EQ(back[0].ranked.entries[1].score, 0.1 + 0.2);
  EXPECT_EQ(back[0].target, std::optional<ItemIndex>(2));
  EXPECT_FALSE(back[1].target.has_value());
  EXPECT_EQ(back[1].example, 1u);
}

}  // namespace
}  // namespace semsr
