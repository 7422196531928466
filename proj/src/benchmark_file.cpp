#include "cvr/benchmark_file.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cvr/error.hpp"
#include "json.hpp"

namespace cvr::data {

using nlohmann::json;

std::string_view kind_name(CandidateKind kind) {
  switch (kind) {
    case CandidateKind::GroundTruth: return "GroundTruth";
    case CandidateKind::StateNeg: return "StateNeg";
    case CandidateKind::IdentityNeg: return "IdentityNeg";
    case CandidateKind::EasyNeg: return "EasyNeg";
  }
  return "?";
}

CandidateKind parse_kind(std::string_view name) {
  if (name == "GroundTruth") return CandidateKind::GroundTruth;
  if (name == "StateNeg") return CandidateKind::StateNeg;
  if (name == "IdentityNeg") return CandidateKind::IdentityNeg;
  if (name == "EasyNeg") return CandidateKind::EasyNeg;
  throw Error(Errc::SchemaError, "unknown candidate kind '" + std::string(name) + "'");
}

void validate_query(const QueryInstance& q, std::size_t pool_size, std::size_t context_len) {
  auto fail = [&](const std::string& why) {
    throw Error(Errc::InvalidQuery, "query " + q.query_id + ": " + why);
  };
  if (q.candidates.size() != pool_size) {
    fail(std::to_string(q.candidates.size()) + " candidates, expected " +
         std::to_string(pool_size));
  }
  if (q.context_ids.size() > context_len) fail("context longer than context_len");
  std::unordered_set<std::string_view> seen;
  std::size_t gt_count = 0;
  for (const auto& c : q.candidates) {
    if (!seen.insert(c.clip_id).second) fail("duplicate candidate " + c.clip_id);
    if (c.kind == CandidateKind::GroundTruth) {
      ++gt_count;
      if (c.clip_id != q.gt_clip_id) fail("GroundTruth candidate is not gt_clip_id");
    } else if (c.clip_id == q.gt_clip_id) {
      fail("gt clip appears as a negative");
    }
  }
  if (gt_count != 1) fail("expected exactly one GroundTruth candidate");
  for (const auto& id : q.context_ids) {
    if (id == q.gt_clip_id) fail("gt clip appears in its own context");
  }
}

std::string dump_benchmark(const Benchmark& bench) {
  json queries = json::array();
  for (const auto& q : bench.queries) {
    json candidates = json::array();
    for (const auto& c : q.candidates) {
      candidates.push_back({{"clip_id", c.clip_id}, {"kind", kind_name(c.kind)}});
    }
    queries.push_back({{"query_id", q.query_id},
                       {"query_text_id", q.query_text_id},
                       {"source_video_id", q.source_video_id},
                       {"gt_clip_id", q.gt_clip_id},
                       {"context_ids", q.context_ids},
                       {"candidates", candidates}});
  }
  json doc = {{"pool_size", bench.pool_size},
              {"context_len", bench.context_len},
              {"queries", queries}};
  return doc.dump(1) + "\n";
}

Benchmark parse_benchmark(std::string_view json_text) {
  Benchmark bench;
  try {
    const json doc = json::parse(json_text);
    bench.pool_size = doc.at("pool_size").get<std::size_t>();
    bench.context_len = doc.at("context_len").get<std::size_t>();
    for (const auto& jq : doc.at("queries")) {
      QueryInstance q;
      q.query_id = jq.at("query_id").get<std::string>();
      q.query_text_id = jq.at("query_text_id").get<std::string>();
      q.source_video_id = jq.at("source_video_id").get<std::string>();
      q.gt_clip_id = jq.at("gt_clip_id").get<std::string>();
      q.context_ids = jq.at("context_ids").get<std::vector<std::string>>();
      for (const auto& jc : jq.at("candidates")) {
        q.candidates.push_back(
            {jc.at("clip_id").get<std::string>(), parse_kind(jc.at("kind").get<std::string>())});
      }
      bench.queries.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("benchmark: ") + e.what());
  }
  std::unordered_set<std::string_view> query_ids;
  for (const auto& q : bench.queries) {
    if (!query_ids.insert(q.query_id).second) throw Error(Errc::DuplicateId, "query " + q.query_id);
    validate_query(q, bench.pool_size, bench.context_len);
  }
  return bench;
}

Benchmark load_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_benchmark(buffer.str());
}

void save_benchmark(const Benchmark& bench, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << dump_benchmark(bench);
}

}  // namespace cvr::data
