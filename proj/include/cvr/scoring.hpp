#pragma once
// Candidate scoring. Every mode is a function of three per-candidate cosines:
//   A = sim(query text, c), B = sim(last context clip, c), C = sim(v_hat, c).

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cvr/baselines.hpp"
#include "cvr/benchmark_file.hpp"
#include "cvr/cast.hpp"
#include "cvr/embedding_store.hpp"

namespace cvr::eval {

enum class Mode {
  TextOnly,             // A
  VisOnly,              // B
  CastOnly,             // C
  HeuristicLateFusion,  // A + alpha * B
  SemanticEnsemble,     // A + w_p * C
  FullEnsemble,         // A + w_v * B + w_p * C
  LearnedLateFusion,    // MLP(A, B)
};

Mode parse_mode(std::string_view name);  // UsageError
std::string_view mode_name(Mode mode);
bool needs_predictor(Mode mode);

struct EnsembleWeights {
  double w_v = 0.0;
  double w_p = 0.0;

  bool operator==(const EnsembleWeights&) const = default;
};

struct ScoreTriple {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

using Predictor = std::variant<std::monostate, model::CastParams, model::EarlyFusionParams>;

struct Stores {
  const data::EmbeddingStore* clips = nullptr;
  const data::EmbeddingStore* text = nullptr;  // keyed by query_text_id
};

struct Scorer {
  Mode mode = Mode::TextOnly;
  EnsembleWeights weights;
  double alpha = 0.5;
  const Predictor* predictor = nullptr;
  const model::LateFusionParams* late_fusion = nullptr;
};

// Checks that the scorer carries what its mode needs (UsageError).
void check_scorer(const Scorer& scorer);

// Predicted next-state embedding for a query, in eval mode. The history is
// truncated to the predictor's context window, keeping the most recent clips;
// an empty context gives a zero anchor.
math::Vector predict_state(const Predictor& predictor, const data::QueryInstance& query,
                           const Stores& stores);

// Per-candidate triples in pool order. B is 0 when the context is empty and C
// is 0 when no predictor is given.
std::vector<ScoreTriple> score_triples(const data::QueryInstance& query, const Stores& stores,
                                       const Predictor* predictor);

// Combines triples under the scorer's mode. VisOnly on an empty context throws
// MissingContext.
std::vector<double> combine(const std::vector<ScoreTriple>& triples, bool has_context,
                            const Scorer& scorer);

struct RankedCandidate {
  std::string clip_id;
  data::CandidateKind kind = data::CandidateKind::EasyNeg;
  double score = 0.0;
};

// Descending score, ties by ascending clip id.
std::vector<std::size_t> rank_order(const data::QueryInstance& query,
                                    const std::vector<double>& scores);

std::vector<RankedCandidate> score_candidates(const data::QueryInstance& query,
                                              const Stores& stores, const Scorer& scorer);

}  // namespace cvr::eval
