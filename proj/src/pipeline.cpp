#include "cvr/pipeline.hpp"

#include <cstdio>

#include "cvr/error.hpp"

namespace cvr::pipeline {

using train::ModelKind;

namespace {

std::size_t model_dim(const Sources& src, const data::RunConfig& cfg) {
  const std::size_t d = src.clips->dim();
  if (cfg.d != 0 && cfg.d != d) {
    throw Error(Errc::DimMismatch, "config d=" + std::to_string(cfg.d) + " but clip store has d=" +
                                       std::to_string(d));
  }
  if (src.text->dim() != d) throw Error(Errc::DimMismatch, "text and clip stores differ in d");
  return d;
}

}  // namespace

TrainedModel train_model(ModelKind kind, const data::AnnotationSet& ann, const Sources& src,
                         const data::RunConfig& cfg) {
  check_config(cfg);
  const std::size_t d = model_dim(src, cfg);
  const auto rules = bench::rules_from_config(cfg);
  const auto data = train::build_training_instances(ann, *src.clips, *src.text, src.captions,
                                                    cfg.context_len, rules, cfg.workers);
  const auto opt = train::train_options(cfg);
  const std::uint64_t init_seed = derive_seed(cfg.seed, model_kind_name(kind));
  TrainedModel out;
  out.kind = kind;
  switch (kind) {
    case ModelKind::Cast: {
      auto r = train::train_predictor(
          model::init_cast_params(d, cfg.n_heads, cfg.context_len, init_seed), data, opt);
      out.checkpoint = model::to_checkpoint(r.params);
      out.curve = std::move(r.curve);
      break;
    }
    case ModelKind::EarlyFusionDirect:
    case ModelKind::EarlyFusionResidual: {
      const bool residual = kind == ModelKind::EarlyFusionResidual;
      auto r = train::train_predictor(model::init_early_fusion_params(d, 2 * d, residual, init_seed),
                                      data, opt);
      out.checkpoint = model::to_checkpoint(r.params);
      out.curve = std::move(r.curve);
      break;
    }
    case ModelKind::LateFusion: {
      auto r = train::train_late_fusion(model::init_late_fusion_params(8, init_seed), data, opt);
      out.checkpoint = model::to_checkpoint(r.params);
      out.curve = std::move(r.curve);
      break;
    }
  }
  return out;
}

eval::Predictor predictor_from_checkpoint(const model::Checkpoint& ckpt) {
  if (ckpt.kind == model::CastParams::kKind) return model::cast_from_checkpoint(ckpt);
  if (ckpt.kind == "ef-direct" || ckpt.kind == "ef-residual") {
    return model::early_fusion_from_checkpoint(ckpt);
  }
  throw Error(Errc::UsageError, "checkpoint kind '" + ckpt.kind + "' is not a state predictor");
}

ThreeWaySplit split_three(const data::AnnotationSet& ann, double train_frac, double val_frac,
                          std::uint64_t seed) {
  auto [train, held_out] = bench::split_by_video(ann, train_frac, seed);
  auto [fit, val] = bench::split_by_video(train, 1.0 - val_frac, derive_seed(seed, "validation"));
  return {std::move(fit), std::move(val), std::move(held_out)};
}

SelectedWeights select_weights(const data::Benchmark& validation, const eval::TripleTable& table,
                               const data::RunConfig& cfg) {
  return {eval::grid_search(validation, table, cfg.grid_wv, cfg.grid_wp),
          eval::grid_search(validation, table, {0.0}, cfg.grid_wp)};
}

const eval::EvalReport& ExperimentResult::row(std::string_view label) const {
  for (const auto& r : reports) {
    if (r.label == label) return r;
  }
  throw Error(Errc::UsageError, "no report row '" + std::string(label) + "'");
}

namespace {

eval::EvalReport labelled(eval::EvalReport r, std::string label) {
  r.label = std::move(label);
  return r;
}

data::Benchmark mine(const data::AnnotationSet& ann, const Sources& src,
                     const data::RunConfig& cfg, bench::MiningReport* report = nullptr) {
  auto mined = bench::mine_benchmark(ann, cfg.context_len, bench::rules_from_config(cfg),
                                     src.captions, cfg.workers);
  if (report) *report = mined.report;
  return std::move(mined.benchmark);
}

}  // namespace

ExperimentResult run_experiment(const data::AnnotationSet& ann, const Sources& src,
                                const data::RunConfig& cfg, const ExperimentOptions& opt) {
  return run_experiment(split_three(ann, cfg.train_frac, opt.val_frac, cfg.seed), src, cfg, opt);
}

ExperimentResult run_experiment(const ThreeWaySplit& split, const Sources& src,
                                const data::RunConfig& cfg, const ExperimentOptions& opt) {
  ExperimentResult out;
  const auto val_bench = mine(split.validation, src, cfg);
  const auto eval_bench = mine(split.eval, src, cfg, &out.eval_mining);
  const auto stores = src.stores();

  const auto base = eval::compute_triples(eval_bench, stores, nullptr, cfg.workers);
  auto mode_row = [&](eval::Mode mode, std::string label) {
    eval::Scorer s;
    s.mode = mode;
    s.alpha = cfg.heuristic_alpha;
    return labelled(eval::evaluate(eval_bench, base, s), std::move(label));
  };
  out.reports.push_back(mode_row(eval::Mode::TextOnly, "text"));
  if (cfg.context_len > 0) out.reports.push_back(mode_row(eval::Mode::VisOnly, "vis"));
  out.reports.push_back(mode_row(eval::Mode::HeuristicLateFusion, "heuristic-late-fusion"));

  {
    const auto lf = train_model(ModelKind::LateFusion, split.fit, src, cfg);
    const auto params = model::late_fusion_from_checkpoint(lf.checkpoint);
    eval::Scorer s;
    s.mode = eval::Mode::LearnedLateFusion;
    s.late_fusion = &params;
    out.reports.push_back(labelled(eval::evaluate(eval_bench, base, s), "learned-late-fusion"));
  }

  for (ModelKind kind : {ModelKind::Cast, ModelKind::EarlyFusionDirect, ModelKind::EarlyFusionResidual}) {
    const auto trained = train_model(kind, split.fit, src, cfg);
    const eval::Predictor predictor = predictor_from_checkpoint(trained.checkpoint);
    const auto val_table = eval::compute_triples(val_bench, stores, &predictor, cfg.workers);
    const auto weights = select_weights(val_bench, val_table, cfg);
    const auto table = eval::compute_triples(eval_bench, stores, &predictor, cfg.workers);
    const std::string name(model_kind_name(kind));

    eval::Scorer s;
    s.predictor = &predictor;
    s.mode = eval::Mode::CastOnly;
    out.reports.push_back(labelled(eval::evaluate(eval_bench, table, s), name + "-only"));
    s.mode = eval::Mode::SemanticEnsemble;
    s.weights = weights.semantic.best;
    out.reports.push_back(labelled(eval::evaluate(eval_bench, table, s), name + "-semantic-ensemble"));
    s.mode = eval::Mode::FullEnsemble;
    s.weights = weights.full.best;
    out.reports.push_back(labelled(eval::evaluate(eval_bench, table, s), name + "-full-ensemble"));
    if (kind == ModelKind::Cast) {
      out.cast_weights = weights;
      out.cast_curve = trained.curve;
    }
  }

  if (opt.latents != nullptr) {
    std::vector<std::vector<double>> scores;
    for (const auto& q : eval_bench.queries) {
      scores.push_back(synth::oracle_scores(q, *opt.latents, *src.clips));
    }
    out.reports.push_back(labelled(eval::summarize(eval_bench, scores), "oracle"));
  }
  return out;
}

std::vector<SweepRow> context_sweep(const data::AnnotationSet& ann, const Sources& src,
                                    const data::RunConfig& cfg,
                                    const std::vector<std::size_t>& lengths, double val_frac) {
  const auto split = split_three(ann, cfg.train_frac, val_frac, cfg.seed);
  std::vector<SweepRow> rows;
  for (std::size_t len : lengths) {
    data::RunConfig c = cfg;
    c.context_len = len;
    const auto val_bench = mine(split.validation, src, c);
    const auto eval_bench = mine(split.eval, src, c);
    const auto trained = train_model(ModelKind::Cast, split.fit, src, c);
    const eval::Predictor predictor = predictor_from_checkpoint(trained.checkpoint);
    const auto weights =
        select_weights(val_bench, eval::compute_triples(val_bench, src.stores(), &predictor, c.workers), c);
    eval::Scorer s;
    s.mode = eval::Mode::FullEnsemble;
    s.predictor = &predictor;
    s.weights = weights.full.best;
    const auto rep = eval::evaluate(eval_bench, src.stores(), s, c.workers);
    rows.push_back({len, rep.acc, rep.mnr, rep.state_acc, rep.ident_acc, s.weights});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "context_len,acc,mnr,state_acc,ident_acc,w_v,w_p\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.context_len,
                  r.acc, r.mnr, r.state_acc, r.ident_acc, r.weights.w_v, r.weights.w_p);
    out += line;
  }
  return out;
}

}  // namespace cvr::pipeline
