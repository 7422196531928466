#include "cvr/mining.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "cvr/error.hpp"
#include "cvr/parallel.hpp"
#include "json.hpp"

namespace cvr::bench {

using data::CandidateKind;

IdentityStrategy parse_identity_strategy(std::string_view name) {
  if (name == "caption-knn") return IdentityStrategy::CaptionKnn;
  if (name == "task-step") return IdentityStrategy::TaskStepMatch;
  if (name == "task-step-fallback") return IdentityStrategy::TaskStepFallback;
  if (name == "lexical") return IdentityStrategy::LexicalJaccard;
  throw Error(Errc::UsageError, "unknown identity strategy '" + std::string(name) + "'");
}

std::string_view identity_strategy_name(IdentityStrategy s) {
  switch (s) {
    case IdentityStrategy::CaptionKnn: return "caption-knn";
    case IdentityStrategy::TaskStepMatch: return "task-step";
    case IdentityStrategy::TaskStepFallback: return "task-step-fallback";
    case IdentityStrategy::LexicalJaccard: return "lexical";
  }
  return "?";
}

EasyStrategy parse_easy_strategy(std::string_view name) {
  if (name == "diff-video") return EasyStrategy::DiffVideo;
  if (name == "diff-task") return EasyStrategy::DiffTask;
  throw Error(Errc::UsageError, "unknown easy strategy '" + std::string(name) + "'");
}

std::string_view easy_strategy_name(EasyStrategy s) {
  return s == EasyStrategy::DiffVideo ? "diff-video" : "diff-task";
}

MiningRules rules_from_config(const data::RunConfig& cfg) {
  MiningRules r;
  r.identity = parse_identity_strategy(cfg.identity_strategy);
  r.easy = parse_easy_strategy(cfg.easy_strategy);
  r.avoid_immediate_predecessor = cfg.avoid_immediate_predecessor;
  r.max_state = cfg.max_state_negs;
  r.max_ident = cfg.max_ident_negs;
  r.pool_size = cfg.pool_size;
  r.seed = cfg.seed;
  return r;
}

namespace {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

bool same_step_label(const data::StepRecord& a, const data::StepRecord& b) {
  if (a.task_step_label && b.task_step_label) return *a.task_step_label == *b.task_step_label;
  return a.step_index == b.step_index;
}

struct Scored {
  double score;
  std::string id;
};

std::vector<std::string> top_k(std::vector<Scored> scored, std::size_t k) {
  std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.id < y.id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && out.size() < k; ++i) out.push_back(scored[i].id);
  return out;
}

}  // namespace

AnnotationIndex::AnnotationIndex(const data::AnnotationSet& ann) : ann_(&ann) {
  tokens_.resize(ann.videos.size());
  for (std::size_t v = 0; v < ann.videos.size(); ++v) {
    const auto& steps = ann.videos[v].steps;
    tokens_[v].resize(steps.size());
    for (std::size_t p = 0; p < steps.size(); ++p) {
      where_.emplace(steps[p].clip_id, Location{v, p});
      tokens_[v][p] = tokenize(steps[p].caption);
    }
  }
}

std::optional<AnnotationIndex::Location> AnnotationIndex::locate(std::string_view clip_id) const {
  auto it = where_.find(clip_id);
  if (it == where_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& AnnotationIndex::caption_tokens(Location loc) const {
  return tokens_[loc.video][loc.position];
}

std::vector<QuerySkeleton> build_queries(const data::AnnotationSet& ann, std::size_t context_len) {
  std::vector<QuerySkeleton> out;
  for (std::size_t v = 0; v < ann.videos.size(); ++v) {
    const auto& steps = ann.videos[v].steps;
    for (std::size_t t = 1; t < steps.size(); ++t) {
      QuerySkeleton q;
      q.query_id = steps[t].clip_id;
      q.video = v;
      q.position = t;
      q.gt_clip_id = steps[t].clip_id;
      const std::size_t first = t > context_len ? t - context_len : 0;
      for (std::size_t p = first; p < t; ++p) q.context_ids.push_back(steps[p].clip_id);
      out.push_back(std::move(q));
    }
  }
  return out;
}

Rng query_rng(std::uint64_t seed, std::string_view query_id) {
  return make_rng(derive_seed(seed, query_id));
}

std::vector<std::string> mine_state_negatives(const AnnotationIndex& index, const QuerySkeleton& q,
                                              std::size_t k, const MiningRules& rules, Rng& rng) {
  const auto& steps = index.annotations().videos.at(q.video).steps;
  std::vector<std::string> past;
  std::vector<std::string> future;
  std::optional<std::string> predecessor;
  for (std::size_t p = 0; p < steps.size(); ++p) {
    if (p == q.position) continue;
    if (p + 1 == q.position && rules.avoid_immediate_predecessor) {
      predecessor = steps[p].clip_id;
    } else if (p < q.position) {
      past.push_back(steps[p].clip_id);
    } else {
      future.push_back(steps[p].clip_id);
    }
  }
  std::shuffle(past.begin(), past.end(), rng);
  std::shuffle(future.begin(), future.end(), rng);

  std::vector<std::string> out;
  std::size_t ip = 0;
  std::size_t iff = 0;
  bool take_past = true;
  while (out.size() < k && (ip < past.size() || iff < future.size())) {
    if ((take_past && ip < past.size()) || iff >= future.size()) {
      out.push_back(past[ip++]);
    } else {
      out.push_back(future[iff++]);
    }
    take_past = !take_past;
  }
  if (out.size() < k && predecessor) out.push_back(*predecessor);
  return out;
}

std::vector<std::string> mine_identity_negatives(const AnnotationIndex& index,
                                                 const QuerySkeleton& q, std::size_t k,
                                                 const MiningRules& rules,
                                                 const data::EmbeddingStore* captions, Rng& rng) {
  if (k == 0) return {};
  const auto& ann = index.annotations();
  const auto& source = ann.videos.at(q.video);
  const auto& target = source.steps.at(q.position);

  switch (rules.identity) {
    case IdentityStrategy::CaptionKnn: {
      if (captions == nullptr) {
        throw Error(Errc::MissingCaptionEmbedding, "caption-knn mining needs a caption store");
      }
      if (!captions->contains(target.clip_id)) {
        throw Error(Errc::MissingCaptionEmbedding, target.clip_id);
      }
      const auto anchor = captions->get(target.clip_id);
      std::vector<Scored> scored;
      for (std::size_t v = 0; v < ann.videos.size(); ++v) {
        if (v == q.video) continue;
        for (const auto& s : ann.videos[v].steps) {
          if (!captions->contains(s.clip_id)) throw Error(Errc::MissingCaptionEmbedding, s.clip_id);
          scored.push_back({math::cosine_sim(anchor, captions->get(s.clip_id)), s.clip_id});
        }
      }
      return top_k(std::move(scored), k);
    }
    case IdentityStrategy::LexicalJaccard: {
      const auto& anchor = index.caption_tokens({q.video, q.position});
      std::vector<Scored> scored;
      for (std::size_t v = 0; v < ann.videos.size(); ++v) {
        if (v == q.video) continue;
        for (std::size_t p = 0; p < ann.videos[v].steps.size(); ++p) {
          const double j = jaccard(anchor, index.caption_tokens({v, p}));
          if (j > 0.0) scored.push_back({j, ann.videos[v].steps[p].clip_id});
        }
      }
      return top_k(std::move(scored), k);
    }
    case IdentityStrategy::TaskStepMatch:
    case IdentityStrategy::TaskStepFallback: {
      std::vector<std::string> strict;
      std::vector<std::string> relaxed;
      for (std::size_t v = 0; v < ann.videos.size(); ++v) {
        if (v == q.video || ann.videos[v].task_id != source.task_id) continue;
        for (const auto& s : ann.videos[v].steps) {
          (same_step_label(s, target) ? strict : relaxed).push_back(s.clip_id);
        }
      }
      std::shuffle(strict.begin(), strict.end(), rng);
      if (strict.size() > k) strict.resize(k);
      if (rules.identity == IdentityStrategy::TaskStepFallback && strict.size() < k) {
        std::shuffle(relaxed.begin(), relaxed.end(), rng);
        for (std::size_t i = 0; i < relaxed.size() && strict.size() < k; ++i) {
          strict.push_back(relaxed[i]);
        }
      }
      return strict;
    }
  }
  return {};
}

std::vector<std::string> easy_pool(const AnnotationIndex& index, const QuerySkeleton& q,
                                   const MiningRules& rules) {
  const auto& ann = index.annotations();
  const auto& source = ann.videos.at(q.video);
  std::vector<std::string> out;
  for (std::size_t v = 0; v < ann.videos.size(); ++v) {
    if (v == q.video) continue;
    if (rules.easy == EasyStrategy::DiffTask && ann.videos[v].task_id == source.task_id) continue;
    for (const auto& s : ann.videos[v].steps) out.push_back(s.clip_id);
  }
  return out;
}

data::QueryInstance assemble_pool(const QuerySkeleton& q, std::string_view source_video_id,
                                  const std::vector<std::string>& state_negs,
                                  const std::vector<std::string>& ident_negs,
                                  const std::vector<std::string>& easy, const MiningRules& rules,
                                  Rng& rng, AssemblyStats* stats) {
  if (rules.pool_size < 2) throw Error(Errc::BadSpec, "pool_size must be at least 2");
  const std::size_t hard_budget = std::min(rules.max_state + rules.max_ident, rules.pool_size - 1);
  std::size_t take_state = std::min({state_negs.size(), rules.max_state, hard_budget});
  std::size_t take_ident = std::min({ident_negs.size(), rules.max_ident, hard_budget - take_state});
  std::size_t shortfall = hard_budget - take_state - take_ident;
  const std::size_t extra_ident = std::min(ident_negs.size() - take_ident, shortfall);
  shortfall -= extra_ident;
  const std::size_t extra_state = std::min(state_negs.size() - take_state, shortfall);
  take_state += extra_state;
  take_ident += extra_ident;

  data::QueryInstance out;
  out.query_id = q.query_id;
  out.query_text_id = q.query_id;
  out.source_video_id = std::string(source_video_id);
  out.gt_clip_id = q.gt_clip_id;
  out.context_ids = q.context_ids;

  std::unordered_set<std::string> used{q.gt_clip_id};
  out.candidates.push_back({q.gt_clip_id, CandidateKind::GroundTruth});
  auto push_hard = [&](const std::string& id, CandidateKind kind) {
    if (!used.insert(id).second) {
      throw Error(Errc::InvalidQuery, "query " + q.query_id + ": hard negative " + id +
                                          " duplicates another candidate");
    }
    out.candidates.push_back({id, kind});
  };
  for (std::size_t i = 0; i < take_state; ++i) push_hard(state_negs[i], CandidateKind::StateNeg);
  for (std::size_t i = 0; i < take_ident; ++i) push_hard(ident_negs[i], CandidateKind::IdentityNeg);

  const std::size_t need_easy = rules.pool_size - out.candidates.size();
  std::vector<std::string> available;
  for (const auto& id : easy) {
    if (!used.contains(id)) available.push_back(id);
  }
  if (available.size() < need_easy) {
    throw Error(Errc::InsufficientCandidates,
                "query " + q.query_id + ": needs " + std::to_string(need_easy) +
                    " easy negatives, only " + std::to_string(available.size()) + " available");
  }
  // partial Fisher-Yates
  for (std::size_t i = 0; i < need_easy; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, available.size() - 1);
    std::swap(available[i], available[pick(rng)]);
    out.candidates.push_back({available[i], CandidateKind::EasyNeg});
  }
  std::shuffle(out.candidates.begin(), out.candidates.end(), rng);

  if (stats != nullptr) {
    *stats = {take_state, take_ident, need_easy, extra_state + extra_ident};
  }
  return out;
}

std::string dump_mining_report(const MiningReport& r) {
  nlohmann::ordered_json doc = {
      {"queries", r.queries},
      {"kind_counts",
       {{"GroundTruth", r.ground_truth},
        {"StateNeg", r.state},
        {"IdentityNeg", r.ident},
        {"EasyNeg", r.easy}}},
      {"queries_with_backfill", r.queries_with_backfill},
      {"backfilled_slots", r.backfilled_slots},
      {"queries_without_state_negatives", r.queries_without_state},
      {"queries_without_identity_negatives", r.queries_without_ident},
  };
  return doc.dump(1) + "\n";
}

MinedBenchmark mine_benchmark(const data::AnnotationSet& ann, std::size_t context_len,
                              const MiningRules& rules, const data::EmbeddingStore* captions,
                              std::size_t workers) {
  const AnnotationIndex index(ann);
  const auto skeletons = build_queries(ann, context_len);
  std::vector<data::QueryInstance> rows(skeletons.size());
  std::vector<AssemblyStats> stats(skeletons.size());
  const std::size_t hard_budget = rules.max_state + rules.max_ident;

  parallel_for(skeletons.size(), workers, [&](std::size_t i) {
    const auto& q = skeletons[i];
    Rng rng = query_rng(rules.seed, q.query_id);
    const auto state = mine_state_negatives(index, q, hard_budget, rules, rng);
    const auto ident = mine_identity_negatives(index, q, hard_budget, rules, captions, rng);
    const auto easy = easy_pool(index, q, rules);
    rows[i] = assemble_pool(q, ann.videos[q.video].video_id, state, ident, easy, rules, rng,
                            &stats[i]);
  });

  MinedBenchmark out;
  out.benchmark.pool_size = rules.pool_size;
  out.benchmark.context_len = context_len;
  out.benchmark.queries = std::move(rows);
  auto& r = out.report;
  for (const auto& s : stats) {
    ++r.queries;
    ++r.ground_truth;
    r.state += s.state;
    r.ident += s.ident;
    r.easy += s.easy;
    r.backfilled_slots += s.backfilled;
    if (s.backfilled > 0) ++r.queries_with_backfill;
    if (s.state == 0) ++r.queries_without_state;
    if (s.ident == 0) ++r.queries_without_ident;
  }
  return out;
}

void check_provenance(const data::QueryInstance& q, const AnnotationIndex& index) {
  auto fail = [&](const std::string& why) {
    throw Error(Errc::InvalidQuery, "query " + q.query_id + ": " + why);
  };
  const auto gt = index.locate(q.gt_clip_id);
  if (!gt) fail("gt clip not in annotations");
  const auto& ann = index.annotations();
  if (ann.videos[gt->video].video_id != q.source_video_id) fail("gt not in source video");
  for (const auto& c : q.candidates) {
    const auto loc = index.locate(c.clip_id);
    if (!loc) fail("candidate " + c.clip_id + " not in annotations");
    const bool same_video = loc->video == gt->video;
    switch (c.kind) {
      case CandidateKind::GroundTruth: break;
      case CandidateKind::StateNeg:
        if (!same_video) fail("state negative " + c.clip_id + " from another video");
        break;
      case CandidateKind::IdentityNeg:
      case CandidateKind::EasyNeg:
        if (same_video) fail("cross-video negative " + c.clip_id + " from the source video");
        break;
    }
  }
  std::size_t previous = 0;
  for (std::size_t i = 0; i < q.context_ids.size(); ++i) {
    const auto loc = index.locate(q.context_ids[i]);
    if (!loc || loc->video != gt->video) fail("context clip outside the source video");
    if (loc->position >= gt->position) fail("context clip does not precede the target");
    if (i > 0 && loc->position <= previous) fail("context not in chronological order");
    previous = loc->position;
  }
}

std::pair<data::AnnotationSet, data::AnnotationSet> split_by_video(const data::AnnotationSet& ann,
                                                                   double train_frac,
                                                                   std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw Error(Errc::BadSpec, "train_frac must lie in (0, 1)");
  }
  const std::size_t n = ann.videos.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ann.videos[a].video_id < ann.videos[b].video_id;
  });
  Rng rng = make_rng(derive_seed(seed, "split_by_video"));
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  else n_train = n;
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  std::pair<data::AnnotationSet, data::AnnotationSet> out;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? out.first : out.second).videos.push_back(ann.videos[i]);
  }
  return out;
}

}  // namespace cvr::bench
