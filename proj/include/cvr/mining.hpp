#pragma once
// Benchmark construction: sliding-window queries over annotated step clips,
// typed hard-negative mining (state / identity), cross-pool backfill, easy
// padding and the per-query shuffled candidate pool.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvr/annotations.hpp"
#include "cvr/benchmark_file.hpp"
#include "cvr/embedding_store.hpp"
#include "cvr/rng.hpp"
#include "cvr/run_config.hpp"

namespace cvr::bench {

enum class IdentityStrategy {
  CaptionKnn,        // top-k cross-video clips by caption-embedding cosine
  TaskStepMatch,     // other videos, same task and same step label
  TaskStepFallback,  // TaskStepMatch, topped up from same task / other steps
  LexicalJaccard,    // caption token-set Jaccard; for data without caption embeddings
};
enum class EasyStrategy { DiffVideo, DiffTask };

IdentityStrategy parse_identity_strategy(std::string_view name);
std::string_view identity_strategy_name(IdentityStrategy s);
EasyStrategy parse_easy_strategy(std::string_view name);
std::string_view easy_strategy_name(EasyStrategy s);

struct MiningRules {
  IdentityStrategy identity = IdentityStrategy::CaptionKnn;
  EasyStrategy easy = EasyStrategy::DiffVideo;
  bool avoid_immediate_predecessor = true;
  std::size_t max_state = 3;
  std::size_t max_ident = 3;
  std::size_t pool_size = 10;
  std::uint64_t seed = 42;
};

MiningRules rules_from_config(const data::RunConfig& cfg);

// Location lookups over an AnnotationSet. Holds a reference; the set must
// outlive the index.
class AnnotationIndex {
 public:
  struct Location {
    std::size_t video = 0;
    std::size_t position = 0;  // index into VideoRecord::steps
  };

  explicit AnnotationIndex(const data::AnnotationSet& ann);

  const data::AnnotationSet& annotations() const { return *ann_; }
  std::optional<Location> locate(std::string_view clip_id) const;
  const data::StepRecord& step(Location loc) const {
    return ann_->videos[loc.video].steps[loc.position];
  }
  const std::vector<std::string>& caption_tokens(Location loc) const;

 private:
  const data::AnnotationSet* ann_;
  data::StringMap<Location> where_;
  std::vector<std::vector<std::vector<std::string>>> tokens_;
};

struct QuerySkeleton {
  std::string query_id;  // equals the gt clip id
  std::size_t video = 0;
  std::size_t position = 0;
  std::string gt_clip_id;
  std::vector<std::string> context_ids;  // chronological, most recent last
};

// One query per step at position >= 1; context = up to L preceding steps.
std::vector<QuerySkeleton> build_queries(const data::AnnotationSet& ann, std::size_t context_len);

// Per-query stream derived from (seed, query_id).
Rng query_rng(std::uint64_t seed, std::string_view query_id);

// Same-video clips other than the target, alternating past and future picks
// (each side in random order). The immediate predecessor is held back until
// nothing else is left when rules.avoid_immediate_predecessor is set.
std::vector<std::string> mine_state_negatives(const AnnotationIndex& index, const QuerySkeleton& q,
                                              std::size_t k, const MiningRules& rules, Rng& rng);

// Cross-video clips chosen by rules.identity. CaptionKnn requires `captions`
// (MissingCaptionEmbedding otherwise) and ranks by cosine, ties by clip id.
std::vector<std::string> mine_identity_negatives(const AnnotationIndex& index,
                                                 const QuerySkeleton& q, std::size_t k,
                                                 const MiningRules& rules,
                                                 const data::EmbeddingStore* captions, Rng& rng);

// Candidate easy negatives in annotation order (other videos, or other tasks).
std::vector<std::string> easy_pool(const AnnotationIndex& index, const QuerySkeleton& q,
                                   const MiningRules& rules);

struct AssemblyStats {
  std::size_t state = 0;
  std::size_t ident = 0;
  std::size_t easy = 0;
  std::size_t backfilled = 0;  // hard slots filled from the other hard pool
};

// Takes up to max_state of `state_negs` and up to max_ident of `ident_negs`,
// backfills a shortfall in either from the other list's leftovers (keeping the
// true kind), pads with easy negatives and shuffles. Throws
// InsufficientCandidates when the easy pool cannot fill the remainder.
data::QueryInstance assemble_pool(const QuerySkeleton& q, std::string_view source_video_id,
                                  const std::vector<std::string>& state_negs,
                                  const std::vector<std::string>& ident_negs,
                                  const std::vector<std::string>& easy, const MiningRules& rules,
                                  Rng& rng, AssemblyStats* stats = nullptr);

struct MiningReport {
  std::size_t queries = 0;
  std::size_t ground_truth = 0;
  std::size_t state = 0;
  std::size_t ident = 0;
  std::size_t easy = 0;
  std::size_t queries_with_backfill = 0;
  std::size_t backfilled_slots = 0;
  std::size_t queries_without_state = 0;
  std::size_t queries_without_ident = 0;
};
std::string dump_mining_report(const MiningReport& report);

struct MinedBenchmark {
  data::Benchmark benchmark;
  MiningReport report;
};

// Output is independent of `workers`.
MinedBenchmark mine_benchmark(const data::AnnotationSet& ann, std::size_t context_len,
                              const MiningRules& rules, const data::EmbeddingStore* captions,
                              std::size_t workers = 1);

// Cross-checks a row against the annotations: state negatives from the source
// video, identity and easy negatives from other videos, context clips from
// the source video strictly before the target in chronological order.
// Throws InvalidQuery.
void check_provenance(const data::QueryInstance& q, const AnnotationIndex& index);

// Disjoint partition by video id; deterministic in `seed`.
std::pair<data::AnnotationSet, data::AnnotationSet> split_by_video(const data::AnnotationSet& ann,
                                                                   double train_frac,
                                                                   std::uint64_t seed);

}  // namespace cvr::bench
