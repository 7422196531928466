#include "cvr/scoring.hpp"

#include <algorithm>
#include <numeric>

#include "cvr/error.hpp"

namespace cvr::eval {

using math::Vector;

namespace {

constexpr std::pair<Mode, std::string_view> kModeNames[] = {
    {Mode::TextOnly, "text"},
    {Mode::VisOnly, "vis"},
    {Mode::CastOnly, "cast"},
    {Mode::HeuristicLateFusion, "heuristic-late-fusion"},
    {Mode::SemanticEnsemble, "semantic-ensemble"},
    {Mode::FullEnsemble, "full-ensemble"},
    {Mode::LearnedLateFusion, "learned-late-fusion"},
};

double safe_sim(math::ConstSpan a, math::ConstSpan b) {
  if (math::norm(a) <= math::kEpsilonNorm || math::norm(b) <= math::kEpsilonNorm) return 0.0;
  return math::cosine_sim(a, b);
}

}  // namespace

Mode parse_mode(std::string_view name) {
  for (const auto& [mode, n] : kModeNames) {
    if (n == name) return mode;
  }
  throw Error(Errc::UsageError, "unknown scoring mode '" + std::string(name) + "'");
}

std::string_view mode_name(Mode mode) {
  for (const auto& [m, n] : kModeNames) {
    if (m == mode) return n;
  }
  return "?";
}

bool needs_predictor(Mode mode) {
  return mode == Mode::CastOnly || mode == Mode::SemanticEnsemble || mode == Mode::FullEnsemble;
}

void check_scorer(const Scorer& scorer) {
  if (needs_predictor(scorer.mode) &&
      (scorer.predictor == nullptr || std::holds_alternative<std::monostate>(*scorer.predictor))) {
    throw Error(Errc::UsageError,
                "mode " + std::string(mode_name(scorer.mode)) + " needs a predictor checkpoint");
  }
  if (scorer.mode == Mode::LearnedLateFusion && scorer.late_fusion == nullptr) {
    throw Error(Errc::UsageError, "mode learned-late-fusion needs a late-fusion checkpoint");
  }
}

Vector predict_state(const Predictor& predictor, const data::QueryInstance& query,
                     const Stores& stores) {
  const std::size_t d = stores.clips->dim();
  const auto q = stores.text->get(query.query_text_id);
  std::size_t keep = query.context_ids.size();
  if (const auto* cast = std::get_if<model::CastParams>(&predictor)) {
    keep = std::min(keep, cast->context_len);
  }
  model::PredictorInput in;
  in.query = q;
  for (std::size_t i = query.context_ids.size() - keep; i < query.context_ids.size(); ++i) {
    in.history.push_back(stores.clips->get(query.context_ids[i]));
  }
  const Vector zero(d, 0.0);
  in.anchor = query.context_ids.empty() ? math::ConstSpan(zero)
                                        : stores.clips->get(query.context_ids.back());
  const model::ForwardOptions opt{};
  return std::visit(
      [&](const auto& p) -> Vector {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          throw Error(Errc::UsageError, "no predictor given");
        } else {
          return model::predict(p, in, opt, nullptr);
        }
      },
      predictor);
}

std::vector<ScoreTriple> score_triples(const data::QueryInstance& query, const Stores& stores,
                                       const Predictor* predictor) {
  const auto q = stores.text->get(query.query_text_id);
  const bool has_context = !query.context_ids.empty();
  const math::ConstSpan prev = has_context ? stores.clips->get(query.context_ids.back())
                                           : math::ConstSpan{};
  Vector v_hat;
  if (predictor != nullptr && !std::holds_alternative<std::monostate>(*predictor)) {
    v_hat = predict_state(*predictor, query, stores);
  }
  std::vector<ScoreTriple> out;
  out.reserve(query.candidates.size());
  for (const auto& cand : query.candidates) {
    const auto c = stores.clips->get(cand.clip_id);
    ScoreTriple t;
    t.a = safe_sim(q, c);
    if (has_context) t.b = safe_sim(prev, c);
    if (!v_hat.empty()) t.c = safe_sim(v_hat, c);
    out.push_back(t);
  }
  return out;
}

std::vector<double> combine(const std::vector<ScoreTriple>& triples, bool has_context,
                            const Scorer& scorer) {
  if (scorer.mode == Mode::VisOnly && !has_context) {
    throw Error(Errc::MissingContext, "visual-continuity score needs a nonempty context");
  }
  std::vector<double> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    double s = 0.0;
    switch (scorer.mode) {
      case Mode::TextOnly: s = t.a; break;
      case Mode::VisOnly: s = t.b; break;
      case Mode::CastOnly: s = t.c; break;
      case Mode::HeuristicLateFusion: s = t.a + scorer.alpha * t.b; break;
      case Mode::SemanticEnsemble: s = t.a + scorer.weights.w_p * t.c; break;
      case Mode::FullEnsemble: s = t.a + scorer.weights.w_v * t.b + scorer.weights.w_p * t.c; break;
      case Mode::LearnedLateFusion:
        s = model::late_fusion_score(*scorer.late_fusion, t.a, t.b, nullptr);
        break;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> rank_order(const data::QueryInstance& query,
                                    const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (scores[i] != scores[j]) return scores[i] > scores[j];
    return query.candidates[i].clip_id < query.candidates[j].clip_id;
  });
  return order;
}

std::vector<RankedCandidate> score_candidates(const data::QueryInstance& query,
                                              const Stores& stores, const Scorer& scorer) {
  check_scorer(scorer);
  const auto triples = score_triples(query, stores, scorer.predictor);
  const auto scores = combine(triples, !query.context_ids.empty(), scorer);
  std::vector<RankedCandidate> out;
  for (std::size_t i : rank_order(query, scores)) {
    out.push_back({query.candidates[i].clip_id, query.candidates[i].kind, scores[i]});
  }
  return out;
}

}  // namespace cvr::eval
