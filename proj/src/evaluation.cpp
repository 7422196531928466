#include "cvr/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "cvr/error.hpp"
#include "cvr/parallel.hpp"
#include "json.hpp"

namespace cvr::eval {

using data::CandidateKind;
using json = nlohmann::ordered_json;

std::string_view category_name(TopCategory c) {
  switch (c) {
    case TopCategory::Exact: return "exact";
    case TopCategory::IdentConsistent: return "ident_consistent_state_misaligned";
    case TopCategory::IdentInconsistent: return "ident_inconsistent";
  }
  return "?";
}

namespace {

TopCategory parse_category(std::string_view name) {
  for (auto c : {TopCategory::Exact, TopCategory::IdentConsistent, TopCategory::IdentInconsistent}) {
    if (category_name(c) == name) return c;
  }
  throw Error(Errc::SchemaError, "unknown category '" + std::string(name) + "'");
}

QueryRecord record_for(const data::QueryInstance& q, const std::vector<double>& scores) {
  const auto order = rank_order(q, scores);
  QueryRecord r;
  r.query_id = q.query_id;
  bool state_seen = false;
  bool ident_seen = false;
  bool has_state = false;
  bool has_ident = false;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& cand = q.candidates[order[pos]];
    switch (cand.kind) {
      case CandidateKind::GroundTruth:
        r.gt_rank = pos + 1;
        r.beats_state = !state_seen;
        r.beats_ident = !ident_seen;
        break;
      case CandidateKind::StateNeg: state_seen = has_state = true; break;
      case CandidateKind::IdentityNeg: ident_seen = has_ident = true; break;
      case CandidateKind::EasyNeg: break;
    }
  }
  if (!has_state) r.beats_state.reset();
  if (!has_ident) r.beats_ident.reset();
  const auto& top = q.candidates[order.front()];
  r.top_clip_id = top.clip_id;
  r.top_kind = top.kind;
  r.category = top.kind == CandidateKind::GroundTruth ? TopCategory::Exact
               : top.kind == CandidateKind::StateNeg  ? TopCategory::IdentConsistent
                                                      : TopCategory::IdentInconsistent;
  return r;
}

void finalize(EvalReport& rep) {
  const std::size_t n = rep.records.size();
  rep.queries = n;
  std::size_t hits = 0, rank_sum = 0, state_n = 0, state_ok = 0, ident_n = 0, ident_ok = 0;
  std::size_t cat[3] = {0, 0, 0};
  for (const auto& r : rep.records) {
    hits += r.gt_rank == 1;
    rank_sum += r.gt_rank;
    if (r.beats_state) {
      ++state_n;
      state_ok += *r.beats_state;
    }
    if (r.beats_ident) {
      ++ident_n;
      ident_ok += *r.beats_ident;
    }
    ++cat[static_cast<int>(r.category)];
  }
  auto frac = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  rep.acc = frac(hits, n);
  rep.mnr = frac(rank_sum, n);
  rep.state_acc = frac(state_ok, state_n);
  rep.ident_acc = frac(ident_ok, ident_n);
  rep.state_excluded = n - state_n;
  rep.ident_excluded = n - ident_n;
  rep.breakdown = {frac(cat[0], n), frac(cat[1], n), frac(cat[2], n)};
}

}  // namespace

EvalReport summarize(const data::Benchmark& bench, const std::vector<std::vector<double>>& scores) {
  if (scores.size() != bench.queries.size()) {
    throw Error(Errc::ShapeMismatch, "score rows do not match benchmark queries");
  }
  EvalReport rep;
  rep.records.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != bench.queries[i].candidates.size()) {
      throw Error(Errc::ShapeMismatch, "score count differs from pool for " + bench.queries[i].query_id);
    }
    rep.records.push_back(record_for(bench.queries[i], scores[i]));
  }
  finalize(rep);
  return rep;
}

TripleTable compute_triples(const data::Benchmark& bench, const Stores& stores,
                            const Predictor* predictor, std::size_t workers) {
  TripleTable t;
  t.rows.resize(bench.queries.size());
  t.has_context.resize(bench.queries.size());
  parallel_for(bench.queries.size(), workers, [&](std::size_t i) {
    t.rows[i] = score_triples(bench.queries[i], stores, predictor);
  });
  for (std::size_t i = 0; i < bench.queries.size(); ++i) {
    t.has_context[i] = !bench.queries[i].context_ids.empty();
  }
  return t;
}

EvalReport evaluate(const data::Benchmark& bench, const TripleTable& table, const Scorer& scorer) {
  if (table.rows.size() != bench.queries.size()) {
    throw Error(Errc::ShapeMismatch, "triple table does not match benchmark");
  }
  std::vector<std::vector<double>> scores(bench.queries.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = combine(table.rows[i], table.has_context[i], scorer);
  }
  EvalReport rep = summarize(bench, scores);
  rep.label = std::string(mode_name(scorer.mode));
  return rep;
}

EvalReport evaluate(const data::Benchmark& bench, const Stores& stores, const Scorer& scorer,
                    std::size_t workers) {
  check_scorer(scorer);
  const Predictor* predictor = needs_predictor(scorer.mode) ? scorer.predictor : nullptr;
  return evaluate(bench, compute_triples(bench, stores, predictor, workers), scorer);
}

GridResult grid_search(const data::Benchmark& validation, const TripleTable& table,
                       const std::vector<double>& grid_wv, const std::vector<double>& grid_wp) {
  if (grid_wv.empty() || grid_wp.empty()) throw Error(Errc::EmptyGrid, "ensemble grid is empty");
  if (validation.queries.empty()) throw Error(Errc::EmptyGrid, "validation set is empty");
  GridResult out;
  bool have = false;
  for (double wv : grid_wv) {
    for (double wp : grid_wp) {
      Scorer s;
      s.mode = Mode::FullEnsemble;
      s.weights = {wv, wp};
      const EvalReport rep = evaluate(validation, table, s);
      out.points.push_back({s.weights, rep.acc, rep.mnr});
      const auto& best = out.best;
      const bool better =
          !have || rep.acc > out.acc ||
          (rep.acc == out.acc &&
           (rep.mnr < out.mnr ||
            (rep.mnr == out.mnr && (wv < best.w_v || (wv == best.w_v && wp < best.w_p)))));
      if (better) {
        out.best = s.weights;
        out.acc = rep.acc;
        out.mnr = rep.mnr;
        have = true;
      }
    }
  }
  return out;
}

std::string grid_csv(const GridResult& grid) {
  std::string out = "w_v,w_p,acc,mnr\n";
  char line[128];
  for (const auto& p : grid.points) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", p.weights.w_v, p.weights.w_p,
                  p.acc, p.mnr);
    out += line;
  }
  return out;
}

EvalReport macro_average(const std::vector<EvalReport>& reports, std::string label) {
  EvalReport out;
  out.label = std::move(label);
  if (reports.empty()) return out;
  const double k = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    out.queries += r.queries;
    out.acc += r.acc / k;
    out.mnr += r.mnr / k;
    out.state_acc += r.state_acc / k;
    out.ident_acc += r.ident_acc / k;
    out.state_excluded += r.state_excluded;
    out.ident_excluded += r.ident_excluded;
    out.breakdown.exact += r.breakdown.exact / k;
    out.breakdown.ident_consistent += r.breakdown.ident_consistent / k;
    out.breakdown.ident_inconsistent += r.breakdown.ident_inconsistent / k;
  }
  return out;
}

namespace {

json optional_bool(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

std::optional<bool> read_optional_bool(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<bool>();
}

const char* tri(const std::optional<bool>& v) { return !v ? "" : (*v ? "1" : "0"); }

}  // namespace

std::string dump_report(const EvalReport& r) {
  json j;
  j["label"] = r.label;
  j["queries"] = r.queries;
  j["acc"] = r.acc;
  j["mnr"] = r.mnr;
  j["state_acc"] = r.state_acc;
  j["ident_acc"] = r.ident_acc;
  j["state_excluded"] = r.state_excluded;
  j["ident_excluded"] = r.ident_excluded;
  j["breakdown"] = {{"exact", r.breakdown.exact},
                    {"ident_consistent_state_misaligned", r.breakdown.ident_consistent},
                    {"ident_inconsistent", r.breakdown.ident_inconsistent}};
  json rows = json::array();
  for (const auto& q : r.records) {
    rows.push_back({{"query_id", q.query_id},
                    {"gt_rank", q.gt_rank},
                    {"top_clip_id", q.top_clip_id},
                    {"top_kind", data::kind_name(q.top_kind)},
                    {"category", category_name(q.category)},
                    {"beats_state", optional_bool(q.beats_state)},
                    {"beats_ident", optional_bool(q.beats_ident)}});
  }
  j["records"] = std::move(rows);
  return j.dump(1) + "\n";
}

EvalReport parse_report(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.label = j.at("label").get<std::string>();
    r.queries = j.at("queries").get<std::size_t>();
    r.acc = j.at("acc").get<double>();
    r.mnr = j.at("mnr").get<double>();
    r.state_acc = j.at("state_acc").get<double>();
    r.ident_acc = j.at("ident_acc").get<double>();
    r.state_excluded = j.at("state_excluded").get<std::size_t>();
    r.ident_excluded = j.at("ident_excluded").get<std::size_t>();
    const auto& b = j.at("breakdown");
    r.breakdown = {b.at("exact").get<double>(),
                   b.at("ident_consistent_state_misaligned").get<double>(),
                   b.at("ident_inconsistent").get<double>()};
    for (const auto& row : j.at("records")) {
      QueryRecord q;
      q.query_id = row.at("query_id").get<std::string>();
      q.gt_rank = row.at("gt_rank").get<std::size_t>();
      q.top_clip_id = row.at("top_clip_id").get<std::string>();
      q.top_kind = data::parse_kind(row.at("top_kind").get<std::string>());
      q.category = parse_category(row.at("category").get<std::string>());
      q.beats_state = read_optional_bool(row.at("beats_state"));
      q.beats_ident = read_optional_bool(row.at("beats_ident"));
      r.records.push_back(std::move(q));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("eval report: ") + e.what());
  }
}

std::string report_csv(const EvalReport& r) {
  std::string out = "query_id,gt_rank,top_clip_id,top_kind,category,beats_state,beats_ident\n";
  for (const auto& q : r.records) {
    out += q.query_id + "," + std::to_string(q.gt_rank) + "," + q.top_clip_id + "," +
           std::string(data::kind_name(q.top_kind)) + "," + std::string(category_name(q.category)) +
           "," + tri(q.beats_state) + "," + tri(q.beats_ident) + "\n";
  }
  return out;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  int width = 5;
  for (const auto& r : reports) width = std::max(width, static_cast<int>(r.label.size()));
  std::string out;
  char line[512];
  std::snprintf(line, sizeof(line), "%-*s %8s %7s %6s %10s %10s %7s %9s %11s\n", width, "label", "queries",
                "acc", "mnr", "state_acc", "ident_acc", "exact", "id_cons", "id_incons");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-*s %8zu %7.2f %6.2f %10.2f %10.2f %7.2f %9.2f %11.2f\n", width,
                  r.label.substr(0, 200).c_str(), r.queries, 100 * r.acc, r.mnr, 100 * r.state_acc,
                  100 * r.ident_acc, 100 * r.breakdown.exact, 100 * r.breakdown.ident_consistent,
                  100 * r.breakdown.ident_inconsistent);
    out += line;
  }
  return out;
}

std::string summary_csv(const std::vector<EvalReport>& reports) {
  std::string out =
      "label,queries,acc,mnr,state_acc,ident_acc,state_excluded,ident_excluded,exact,"
      "ident_consistent_state_misaligned,ident_inconsistent\n";
  char line[512];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%s,%zu,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%.17g,%.17g,%.17g\n",
                  r.label.c_str(), r.queries, r.acc, r.mnr, r.state_acc, r.ident_acc,
                  r.state_excluded, r.ident_excluded, r.breakdown.exact,
                  r.breakdown.ident_consistent, r.breakdown.ident_inconsistent);
    out += line;
  }
  return out;
}

}  // namespace cvr::eval
