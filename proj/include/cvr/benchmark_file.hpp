#pragma once
// Benchmark rows: one query with its context history and a typed, shuffled
// candidate pool. Serialized as JSON:
//   {"pool_size": 10, "context_len": 5, "queries": [
//     {"query_id": ..., "query_text_id": ..., "source_video_id": ..., "gt_clip_id": ...,
//      "context_ids": [...], "candidates": [{"clip_id": ..., "kind": "StateNeg"}, ...]}]}

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cvr::data {

enum class CandidateKind { GroundTruth, StateNeg, IdentityNeg, EasyNeg };

std::string_view kind_name(CandidateKind kind);
CandidateKind parse_kind(std::string_view name);  // SchemaError

struct Candidate {
  std::string clip_id;
  CandidateKind kind = CandidateKind::EasyNeg;

  bool operator==(const Candidate&) const = default;
};

struct QueryInstance {
  std::string query_id;
  std::string query_text_id;
  std::string source_video_id;
  std::string gt_clip_id;
  std::vector<std::string> context_ids;  // chronological, most recent last
  std::vector<Candidate> candidates;     // evaluation order

  bool operator==(const QueryInstance&) const = default;
};

struct Benchmark {
  std::size_t pool_size = 10;
  std::size_t context_len = 5;
  std::vector<QueryInstance> queries;

  bool operator==(const Benchmark&) const = default;
};

// Checks the row-local invariants: exactly one GroundTruth equal to
// gt_clip_id, unique candidate ids, gt absent from negatives and context,
// pool_size candidates, context no longer than context_len. Throws InvalidQuery.
void validate_query(const QueryInstance& query, std::size_t pool_size, std::size_t context_len);

std::string dump_benchmark(const Benchmark& bench);
Benchmark parse_benchmark(std::string_view json_text);  // validates every row
Benchmark load_benchmark(const std::filesystem::path& path);
void save_benchmark(const Benchmark& bench, const std::filesystem::path& path);

}  // namespace cvr::data
