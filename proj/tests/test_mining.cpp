#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "cvr/error.hpp"
#include "cvr/mining.hpp"
#include "support.hpp"

namespace cvr::bench {
namespace {

using data::CandidateKind;

data::VideoRecord video(const std::string& id, const std::string& task, int steps) {
  data::VideoRecord v{id, task, {}};
  for (int s = 0; s < steps; ++s) {
    v.steps.push_back({id + "_s" + std::to_string(s), s, "caption " + std::to_string(s),
                       "step" + std::to_string(s)});
  }
  return v;
}

QuerySkeleton query_at(const data::AnnotationSet& ann, const std::string& gt, std::size_t L = 5) {
  for (auto& q : build_queries(ann, L)) {
    if (q.gt_clip_id == gt) return q;
  }
  throw std::runtime_error("no query for " + gt);
}

std::map<CandidateKind, int> histogram(const data::QueryInstance& q) {
  std::map<CandidateKind, int> h;
  for (const auto& c : q.candidates) ++h[c.kind];
  return h;
}

TEST(BuildQueries, SlidingWindow) {
  data::AnnotationSet ann;
  ann.videos.push_back(video("v", "t", 5));
  const auto qs = build_queries(ann, 5);
  ASSERT_EQ(qs.size(), 4u);
  EXPECT_EQ(qs.back().gt_clip_id, "v_s4");
  EXPECT_EQ(qs.back().context_ids, (std::vector<std::string>{"v_s0", "v_s1", "v_s2", "v_s3"}));
  EXPECT_EQ(qs.back().query_id, "v_s4");

  for (const auto& q : build_queries(ann, 1)) EXPECT_EQ(q.context_ids.size(), 1u);
  for (const auto& q : build_queries(ann, 0)) EXPECT_TRUE(q.context_ids.empty());
  EXPECT_EQ(build_queries(ann, 0).size(), 4u);

  data::AnnotationSet single;
  single.videos.push_back(video("w", "t", 1));
  EXPECT_TRUE(build_queries(single, 5).empty());
}

TEST(StateNegatives, AvoidsPredecessorWhileAlternativesExist) {
  data::AnnotationSet ann;
  ann.videos.push_back(video("v", "t", 6));
  const AnnotationIndex index(ann);
  const auto q = query_at(ann, "v_s3");
  const MiningRules rules;
  const std::set<std::string> allowed{"v_s0", "v_s1", "v_s4", "v_s5"};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = make_rng(seed);
    const auto negs = mine_state_negatives(index, q, 3, rules, rng);
    ASSERT_EQ(negs.size(), 3u);
    bool past = false, future = false;
    for (const auto& id : negs) {
      EXPECT_TRUE(allowed.contains(id)) << id;
      past |= id < "v_s3";
      future |= id > "v_s3";
    }
    EXPECT_TRUE(past && future);
  }
}

TEST(StateNegatives, PredecessorAsLastResortAndZeroK) {
  data::AnnotationSet ann;
  ann.videos.push_back(video("v", "t", 2));
  const AnnotationIndex index(ann);
  const auto q = query_at(ann, "v_s1");
  Rng rng = make_rng(1);
  EXPECT_EQ(mine_state_negatives(index, q, 3, MiningRules{}, rng),
            std::vector<std::string>{"v_s0"});
  EXPECT_TRUE(mine_state_negatives(index, q, 0, MiningRules{}, rng).empty());
}

TEST(IdentityNegatives, TaskStepMatch) {
  data::AnnotationSet ann;
  ann.videos.push_back(video("a", "t", 3));
  ann.videos.push_back(video("b", "t", 3));
  ann.videos.push_back(video("c", "other", 3));
  const AnnotationIndex index(ann);
  MiningRules rules;
  rules.identity = IdentityStrategy::TaskStepMatch;
  Rng rng = make_rng(2);
  const auto q = query_at(ann, "a_s2");
  EXPECT_EQ(mine_identity_negatives(index, q, 1, rules, nullptr, rng),
            std::vector<std::string>{"b_s2"});
  // strict pool holds one clip; the fallback tops up from the same task
  rules.identity = IdentityStrategy::TaskStepFallback;
  const auto relaxed = mine_identity_negatives(index, q, 3, rules, nullptr, rng);
  ASSERT_EQ(relaxed.size(), 3u);
  EXPECT_EQ(relaxed[0], "b_s2");
  for (const auto& id : relaxed) EXPECT_EQ(id.substr(0, 2), "b_");
}

TEST(IdentityNegatives, CaptionKnnRanksExactMatchFirst) {
  data::AnnotationSet ann;
  ann.videos.push_back(video("a", "t", 2));
  ann.videos.push_back(video("b", "t", 2));
  ann.videos.push_back(video("c", "t", 2));
  data::EmbeddingStore captions(2);
  captions.add("a_s0", std::vector<double>{1, 0});
  captions.add("a_s1", std::vector<double>{0.6, 0.8});
  captions.add("b_s0", std::vector<double>{0, 1});
  captions.add("b_s1", std::vector<double>{0.6, 0.8});
  captions.add("c_s0", std::vector<double>{0.8, 0.6});
  captions.add("c_s1", std::vector<double>{-1, 0});
  const AnnotationIndex index(ann);
  Rng rng = make_rng(3);
  const auto negs = mine_identity_negatives(index, query_at(ann, "a_s1"), 2, MiningRules{}, &captions, rng);
  EXPECT_EQ(negs, (std::vector<std::string>{"b_s1", "c_s0"}));
  EXPECT_THROW(mine_identity_negatives(index, query_at(ann, "a_s1"), 2, MiningRules{}, nullptr, rng),
               Error);
}

TEST(IdentityNegatives, SingleVideoHasNone) {
  data::AnnotationSet ann;
  ann.videos.push_back(video("a", "t", 4));
  const AnnotationIndex index(ann);
  Rng rng = make_rng(4);
  for (auto strategy : {IdentityStrategy::TaskStepMatch, IdentityStrategy::TaskStepFallback,
                        IdentityStrategy::LexicalJaccard}) {
    MiningRules rules;
    rules.identity = strategy;
    EXPECT_TRUE(mine_identity_negatives(index, query_at(ann, "a_s2"), 3, rules, nullptr, rng).empty());
  }
}

class Assembly : public ::testing::Test {
 protected:
  QuerySkeleton q{"g", 0, 1, "g", {"ctx"}};
  std::vector<std::string> easy{"e0", "e1", "e2", "e3", "e4", "e5", "e6", "e7", "e8", "e9"};
  MiningRules rules;
};

TEST_F(Assembly, FullHardPools) {
  Rng rng = make_rng(5);
  AssemblyStats stats;
  const auto inst = assemble_pool(q, "v", {"s1", "s2", "s3"}, {"i1", "i2", "i3"}, easy, rules, rng, &stats);
  const auto h = histogram(inst);
  EXPECT_EQ(h.at(CandidateKind::GroundTruth), 1);
  EXPECT_EQ(h.at(CandidateKind::StateNeg), 3);
  EXPECT_EQ(h.at(CandidateKind::IdentityNeg), 3);
  EXPECT_EQ(h.at(CandidateKind::EasyNeg), 3);
  EXPECT_EQ(stats.backfilled, 0u);
}

TEST_F(Assembly, BackfillTrace) {
  Rng rng = make_rng(6);
  AssemblyStats stats;
  const auto inst = assemble_pool(q, "v", {"s1"}, {"i1", "i2", "i3", "i4", "i5"}, easy, rules, rng, &stats);
  const auto h = histogram(inst);
  EXPECT_EQ(h.at(CandidateKind::GroundTruth), 1);
  EXPECT_EQ(h.at(CandidateKind::StateNeg), 1);
  EXPECT_EQ(h.at(CandidateKind::IdentityNeg), 5);
  EXPECT_EQ(h.at(CandidateKind::EasyNeg), 3);
  EXPECT_EQ(stats.backfilled, 2u);
}

TEST_F(Assembly, NoHardNegatives) {
  Rng rng = make_rng(7);
  const auto h = histogram(assemble_pool(q, "v", {}, {}, easy, rules, rng));
  EXPECT_EQ(h.at(CandidateKind::GroundTruth), 1);
  EXPECT_EQ(h.at(CandidateKind::EasyNeg), 9);
}

TEST_F(Assembly, InsufficientEasyPool) {
  Rng rng = make_rng(8);
  try {
    assemble_pool(q, "v", {"s1"}, {}, {"e0", "e1"}, rules, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientCandidates);
  }
}

TEST_F(Assembly, OrderDependsOnlyOnRng) {
  Rng a = make_rng(9);
  Rng b = make_rng(9);
  EXPECT_EQ(assemble_pool(q, "v", {"s1", "s2"}, {"i1"}, easy, rules, a),
            assemble_pool(q, "v", {"s1", "s2"}, {"i1"}, easy, rules, b));
}

data::AnnotationSet n_videos(int n) {
  data::AnnotationSet ann;
  for (int i = 0; i < n; ++i) ann.videos.push_back(video("v" + std::to_string(i), "t", 2));
  return ann;
}

std::set<std::string> video_ids(const data::AnnotationSet& ann) {
  std::set<std::string> ids;
  for (const auto& v : ann.videos) ids.insert(v.video_id);
  return ids;
}

TEST(Split, Examples) {
  const auto ten = n_videos(10);
  const auto [train, held] = split_by_video(ten, 0.8, 42);
  EXPECT_EQ(train.videos.size(), 8u);
  EXPECT_EQ(held.videos.size(), 2u);
  const auto again = split_by_video(ten, 0.8, 42);
  EXPECT_EQ(again.first, train);
  EXPECT_EQ(again.second, held);

  const auto [a, b] = split_by_video(n_videos(2), 0.5, 1);
  EXPECT_EQ(a.videos.size(), 1u);
  EXPECT_EQ(b.videos.size(), 1u);
}

TEST(Split, DisjointCoverForAnySeed) {
  const auto ann = n_videos(13);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [train, held] = split_by_video(ann, 0.7, seed);
    auto t = video_ids(train);
    const auto h = video_ids(held);
    for (const auto& id : h) EXPECT_FALSE(t.contains(id));
    t.insert(h.begin(), h.end());
    EXPECT_EQ(t, video_ids(ann));
  }
}

// Benchmark invariants on random annotation sets, for every identity strategy.
TEST(MinedBenchmarkProperty, InvariantsOnRandomSets) {
  Rng rng = make_rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ann = testing::random_annotations(rng);
    const auto captions = testing::random_captions(ann, 6, rng);
    MiningRules rules;
    rules.identity = static_cast<IdentityStrategy>(trial % 4);
    rules.seed = trial;
    const auto mined = mine_benchmark(ann, 1 + trial % 5, rules, &captions);
    const AnnotationIndex index(ann);
    for (const auto& q : mined.benchmark.queries) {
      ASSERT_NO_THROW(data::validate_query(q, 10, mined.benchmark.context_len));
      ASSERT_NO_THROW(check_provenance(q, index));
      auto h = histogram(q);
      EXPECT_LE(h[CandidateKind::StateNeg] + h[CandidateKind::IdentityNeg], 6);
    }
  }
}

TEST(MinedBenchmarkProperty, WorkerCountDoesNotChangeOutput) {
  Rng rng = make_rng(11);
  const auto ann = testing::random_annotations(rng);
  const auto captions = testing::random_captions(ann, 6, rng);
  const MiningRules rules;
  EXPECT_EQ(mine_benchmark(ann, 5, rules, &captions, 1).benchmark,
            mine_benchmark(ann, 5, rules, &captions, 8).benchmark);
}

TEST(Provenance, RejectsForeignStateNegative) {
  data::AnnotationSet ann;
  ann.videos.push_back(video("a", "t", 3));
  ann.videos.push_back(video("b", "t", 3));
  const AnnotationIndex index(ann);
  data::QueryInstance q{"a_s2", "a_s2", "a", "a_s2", {"a_s0", "a_s1"},
                        {{"a_s2", CandidateKind::GroundTruth}, {"b_s1", CandidateKind::StateNeg}}};
  EXPECT_THROW(check_provenance(q, index), Error);
  q.candidates[1].kind = CandidateKind::IdentityNeg;
  EXPECT_NO_THROW(check_provenance(q, index));
  q.context_ids = {"a_s1", "a_s0"};
  EXPECT_THROW(check_provenance(q, index), Error);
}

}  // namespace
}  // namespace cvr::bench
