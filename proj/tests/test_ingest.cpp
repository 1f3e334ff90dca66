#include <cflab/ingest.hpp>

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>
#include <tuple>

using namespace cflab;

namespace {

std::string jester_row(std::initializer_list<std::pair<std::size_t, std::string>> rated,
                       std::size_t width = 101) {
  std::vector<std::string> cells(width, "99");
  cells[0] = std::to_string(rated.size());
  for (const auto& [col, v] : rated) cells[col] = v;
  std::string row;
  for (std::size_t c = 0; c < cells.size(); ++c) row += (c ? ", " : "") + cells[c];
  return row + "\n";
}

Dataset toy_timed() {
  Dataset ds;
  ds.n_users = 3;
  ds.n_items = 3;
  ds.scale = {1, 5};
  ds.triples = {{0, 0, 5, 50}, {1, 1, 4, 10}, {2, 2, 3, 40}, {0, 1, 2, 20}, {1, 0, 1, 30}};
  return ds;
}

using Key = std::tuple<std::size_t, std::size_t, double>;

std::multiset<Key> keys(const std::vector<TimedTriple>& ts) {
  std::multiset<Key> out;
  for (const auto& t : ts) out.emplace(t.user, t.item, t.vote);
  return out;
}

}  // namespace

TEST(ParseMovieLens, StandardLine) {
  std::istringstream in("1::1193::5::978300760\n");
  const auto ds = parse_movielens(in);
  ASSERT_EQ(ds.triples.size(), 1u);
  EXPECT_EQ(ds.triples[0], (TimedTriple{0, 0, 5.0, 978300760}));
  EXPECT_EQ(ds.scale, (Scale{1, 5}));
}

TEST(ParseMovieLens, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(parse_movielens(in).triples.empty());
}

TEST(ParseMovieLens, RatingOutsideScale) {
  std::istringstream in("1::1193::9::0\n");
  EXPECT_THROW(parse_movielens(in), DataError);
}

TEST(ParseMovieLens, MalformedLineReportsLineNumber) {
  std::istringstream in("1::1::5::1\n1::2::4\n");
  try {
    parse_movielens(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(ParseMovieLens, IdsAreDenseInFirstAppearanceOrder) {
  std::istringstream in("10::7::3::1\n4::7::2::2\n10::3::1::3\n");
  const auto ds = parse_movielens(in);
  EXPECT_EQ(ds.n_users, 2u);
  EXPECT_EQ(ds.n_items, 2u);
  EXPECT_EQ(ds.triples[1].user, 1u);
  EXPECT_EQ(ds.triples[1].item, 0u);
  EXPECT_EQ(ds.triples[2].item, 1u);
}

TEST(ParseJester, RatedCellsOnly) {
  std::istringstream in(jester_row({{2, "-7.82"}, {5, "4.17"}}));
  const auto ds = parse_jester(in);
  ASSERT_EQ(ds.triples.size(), 2u);
  EXPECT_DOUBLE_EQ(ds.triples[0].vote, -7.82);
  EXPECT_EQ(ds.triples[0].item, 1u);
  EXPECT_DOUBLE_EQ(ds.triples[1].vote, 4.17);
  EXPECT_EQ(ds.triples[1].item, 4u);
  EXPECT_FALSE(ds.timed());
  EXPECT_EQ(ds.n_items, 100u);
  EXPECT_EQ(ds.scale, (Scale{-10, 10}));
}

TEST(ParseJester, FullyUnratedRow) {
  std::istringstream in(jester_row({}) + jester_row({{1, "0.5"}}));
  const auto ds = parse_jester(in);
  EXPECT_EQ(ds.n_users, 2u);
  ASSERT_EQ(ds.triples.size(), 1u);
  EXPECT_EQ(ds.triples[0].user, 1u);
}

TEST(ParseJester, WrongWidth) {
  std::istringstream in(jester_row({}, 50));
  EXPECT_THROW(parse_jester(in), DataError);
}

TEST(ParseJester, VoteOutsideScale) {
  std::istringstream in(jester_row({{3, "10.5"}}));
  EXPECT_THROW(parse_jester(in), DataError);
}

TEST(ParseTriples, HeaderAndTimestamps) {
  std::istringstream in("user_id,item_id,vote,timestamp\n0,1,4.5,100\n2,0,1,90\n");
  const auto ds = parse_triples(in);
  ASSERT_EQ(ds.triples.size(), 2u);
  EXPECT_EQ(ds.n_users, 3u);
  EXPECT_EQ(ds.n_items, 2u);
  EXPECT_TRUE(ds.timed());
  EXPECT_EQ(ds.scale, (Scale{1, 4.5}));
}

TEST(ParseTriples, MixedTimestampsRejected) {
  std::istringstream in("0,1,4,100\n1,1,2\n");
  EXPECT_THROW(parse_triples(in), DataError);
}

TEST(ParseTriples, ExplicitScaleIsEnforced) {
  std::istringstream in("0,0,6\n");
  EXPECT_THROW(parse_triples(in, Scale{1, 5}), DataError);
}

TEST(ParseTriples, WriteThenReadRoundTrips) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> vote(-3, 3);
  std::vector<TimedTriple> ts;
  for (std::size_t k = 0; k < 200; ++k) ts.push_back({k % 13, k % 17, vote(rng), static_cast<std::int64_t>(k)});
  std::stringstream buf;
  write_triples(buf, ts);
  const auto back = parse_triples(buf);
  EXPECT_EQ(back.triples, ts);
}

TEST(Reduce, FullFractionsAreIdentity) {
  const auto ds = toy_timed();
  const auto out = reduce_dataset(ds, 1.0, 1.0, 9);
  EXPECT_EQ(out.triples, ds.triples);
  EXPECT_EQ(out.n_users, ds.n_users);
}

TEST(Reduce, DeterministicAndConsistent) {
  Dataset ds;
  ds.n_users = 200;
  ds.n_items = 80;
  ds.scale = {1, 5};
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.2);
  for (std::size_t u = 0; u < 200; ++u)
    for (std::size_t i = 0; i < 80; ++i)
      if (coin(rng)) ds.triples.push_back({u, i, 3.0, std::nullopt});
  const auto a = reduce_dataset(ds, 0.5, 0.5, 42);
  const auto b = reduce_dataset(ds, 0.5, 0.5, 42);
  EXPECT_EQ(a.triples, b.triples);
  EXPECT_NEAR(static_cast<double>(a.n_users), 100.0, 30.0);
  const double eta_src = static_cast<double>(ds.triples.size()) / (200.0 * 80.0);
  const double eta_red = static_cast<double>(a.triples.size()) / (a.n_users * a.n_items);
  EXPECT_NEAR(eta_red / eta_src, 1.0, 0.2);
  for (const auto& t : a.triples) {
    EXPECT_LT(t.user, a.n_users);
    EXPECT_LT(t.item, a.n_items);
  }
}

TEST(Reduce, ExactShape) {
  Dataset ds;
  ds.n_users = 50;
  ds.n_items = 20;
  ds.scale = {1, 5};
  for (std::size_t u = 0; u < 50; ++u)
    for (std::size_t i = 0; i < 20; ++i)
      if ((u + i) % 3 == 0) ds.triples.push_back({u, i, 2.0, std::nullopt});
  const auto out = reduce_to_shape(ds, 25, 10, 5);
  EXPECT_EQ(out.n_users, 25u);
  EXPECT_EQ(out.n_items, 10u);
  EXPECT_THROW(reduce_to_shape(ds, 51, 10, 5), UsageError);
}

TEST(Reduce, EmptyResultIsAnError) {
  Dataset ds;
  ds.n_users = 2;
  ds.n_items = 2;
  ds.scale = {1, 5};
  ds.triples = {{0, 0, 1, std::nullopt}};
  bool saw_error = false;
  for (std::uint64_t seed = 0; seed < 64 && !saw_error; ++seed) {
    try {
      reduce_dataset(ds, 0.5, 0.5, seed);
    } catch (const DataError&) {
      saw_error = true;
    }
  }
  EXPECT_TRUE(saw_error);
}

TEST(Split, TemporalTrainIsEarliestInTimeOrder) {
  const auto ds = toy_timed();
  SplitPlan plan{SplitMode::temporal, 2, 0, {}};
  const auto s = split(ds.triples, plan);
  ASSERT_EQ(s.train.size(), 3u);
  EXPECT_EQ(*s.train[0].timestamp, 10);
  EXPECT_EQ(*s.train[1].timestamp, 20);
  EXPECT_EQ(*s.train[2].timestamp, 30);
  EXPECT_EQ(*s.test[0].timestamp, 40);
  EXPECT_EQ(*s.test[1].timestamp, 50);
}

TEST(Split, TemporalTiesKeepInputOrder) {
  std::vector<TimedTriple> ts{{0, 0, 1, 5}, {1, 0, 2, 5}, {2, 0, 3, 1}, {3, 0, 4, 5}};
  const auto s = split(ts, {SplitMode::temporal, 1, 0, {}});
  EXPECT_EQ(s.train[1].user, 0u);
  EXPECT_EQ(s.train[2].user, 1u);
  EXPECT_EQ(s.test[0].user, 3u);
}

TEST(Split, TestSizeMustLeaveTraining) {
  const auto ds = toy_timed();
  EXPECT_THROW(split(ds.triples, {SplitMode::random, 5, 0, {}}), DataError);
  EXPECT_THROW(split(ds.triples, {SplitMode::random, 0, 0, {}}), UsageError);
}

TEST(Split, TemporalNeedsTimestamps) {
  std::vector<TimedTriple> ts{{0, 0, 1, std::nullopt}, {1, 0, 2, std::nullopt}};
  EXPECT_THROW(split(ts, {SplitMode::temporal, 1, 0, {}}), DataError);
}

TEST(Split, RandomIsSeededPartition) {
  std::vector<TimedTriple> ts;
  for (std::size_t k = 0; k < 300; ++k) ts.push_back({k / 10, k % 10, 1.0 + k % 5, std::nullopt});
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const SplitPlan plan{SplitMode::random, 40, seed, {}};
    const auto a = split(ts, plan), b = split(ts, plan);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    auto all = keys(a.train);
    const auto test = keys(a.test);
    for (const auto& k : test) EXPECT_EQ(all.count(k), 0u);
    all.insert(test.begin(), test.end());
    EXPECT_EQ(all, keys(ts));
  }
}

TEST(Fill, CurrentTargetIsNoOp) {
  RatingMatrix m(2, 2, {1, 5});
  m.insert(0, 0, 1);
  std::vector<TimedTriple> train{{1, 1, 2, std::nullopt}};
  std::size_t cursor = 0;
  fill_to_checkpoint(train, cursor, m, 0.25);
  EXPECT_EQ(cursor, 0u);
  EXPECT_EQ(m.n_entries(), 1u);
}

TEST(Fill, ConsumesExactlyEnough) {
  RatingMatrix m(2, 2, {1, 5});
  m.insert(0, 0, 1);
  std::vector<TimedTriple> train{{1, 1, 2, std::nullopt}, {0, 1, 3, std::nullopt}};
  std::size_t cursor = 0;
  fill_to_checkpoint(train, cursor, m, 0.5);
  EXPECT_EQ(cursor, 1u);
  EXPECT_DOUBLE_EQ(sparsity(m), 0.5);
}

TEST(Fill, ExhaustionReportsAchievedSparsity) {
  std::vector<TimedTriple> all;
  for (std::size_t u = 0; u < 4; ++u)
    for (std::size_t i = 0; i < 4; ++i) all.push_back({u, i, 3.0, std::nullopt});
  const auto parts = split(all, {SplitMode::random, 8, 1, {}});
  ProgressiveFill fill(parts.train, 4, 4, {1, 5});
  EXPECT_DOUBLE_EQ(fill.final_sparsity(), 0.5);
  try {
    fill.fill_to(1.0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos) << e.what();
  }
}

TEST(Checkpoints, GeometricGrid) {
  const auto c = geometric_checkpoints(0.04, 15);
  ASSERT_EQ(c.size(), 15u);
  EXPECT_NEAR(c.front(), 0.0008, 1e-15);
  EXPECT_EQ(c.back(), 0.04);
  for (std::size_t k = 1; k < c.size(); ++k) {
    EXPECT_GT(c[k], c[k - 1]);
    if (k + 1 < c.size()) { EXPECT_NEAR(c[k] / c[k - 1], c[k + 1] / c[k], 1e-12); }
  }
}
