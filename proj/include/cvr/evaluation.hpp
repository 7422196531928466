#pragma once
// Ranking metrics over a benchmark, the top-1 error breakdown, the
// ensemble grid search and report serialization.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvr/benchmark_file.hpp"
#include "cvr/scoring.hpp"

namespace cvr::eval {

enum class TopCategory { Exact, IdentConsistent, IdentInconsistent };
std::string_view category_name(TopCategory c);

struct QueryRecord {
  std::string query_id;
  std::size_t gt_rank = 0;  // 1-based
  std::string top_clip_id;
  data::CandidateKind top_kind = data::CandidateKind::GroundTruth;
  TopCategory category = TopCategory::Exact;
  std::optional<bool> beats_state;  // absent when the pool has no state negative
  std::optional<bool> beats_ident;
};

struct Breakdown {
  double exact = 0.0;
  double ident_consistent = 0.0;  // same source video, wrong clip
  double ident_inconsistent = 0.0;
};

struct EvalReport {
  std::string label;
  std::size_t queries = 0;
  double acc = 0.0;
  double mnr = 0.0;
  double state_acc = 0.0;
  double ident_acc = 0.0;
  std::size_t state_excluded = 0;  // queries without any state negative
  std::size_t ident_excluded = 0;
  Breakdown breakdown;
  std::vector<QueryRecord> records;
};

// Metrics from per-query scores (one vector per query, pool order).
EvalReport summarize(const data::Benchmark& bench, const std::vector<std::vector<double>>& scores);

// Cached triples for every query; reused by grid search and mode sweeps.
struct TripleTable {
  std::vector<std::vector<ScoreTriple>> rows;
  std::vector<bool> has_context;
};
TripleTable compute_triples(const data::Benchmark& bench, const Stores& stores,
                            const Predictor* predictor, std::size_t workers = 1);

EvalReport evaluate(const data::Benchmark& bench, const TripleTable& table, const Scorer& scorer);
EvalReport evaluate(const data::Benchmark& bench, const Stores& stores, const Scorer& scorer,
                    std::size_t workers = 1);

struct GridPoint {
  EnsembleWeights weights;
  double acc = 0.0;
  double mnr = 0.0;
};

struct GridResult {
  EnsembleWeights best;
  double acc = 0.0;
  double mnr = 0.0;
  std::vector<GridPoint> points;  // every evaluated point, w_v-major order
};

// Exhaustive FullEnsemble search: max acc, then min mnr, then smallest
// (w_v, w_p). Throws EmptyGrid.
GridResult grid_search(const data::Benchmark& validation, const TripleTable& table,
                       const std::vector<double>& grid_wv, const std::vector<double>& grid_wp);
std::string grid_csv(const GridResult& grid);

// Unweighted mean of the headline metrics over per-dataset reports; records
// and breakdown are averaged, exclusion counts summed.
EvalReport macro_average(const std::vector<EvalReport>& reports, std::string label);

std::string dump_report(const EvalReport& report);  // JSON, per-query rows included
EvalReport parse_report(std::string_view json_text);
std::string report_csv(const EvalReport& report);   // one row per query
std::string render_table(const std::vector<EvalReport>& reports);
std::string summary_csv(const std::vector<EvalReport>& reports);

}  // namespace cvr::eval
