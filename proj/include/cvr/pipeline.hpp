#pragma once
// End-to-end stages shared by the CLI and the acceptance run: training by
// model kind, fit/validation/eval splitting, the reference experiment and the
// context-length sweep.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cvr/annotations.hpp"
#include "cvr/evaluation.hpp"
#include "cvr/mining.hpp"
#include "cvr/params.hpp"
#include "cvr/run_config.hpp"
#include "cvr/synth.hpp"
#include "cvr/trainer.hpp"

namespace cvr::pipeline {

struct Sources {
  const data::EmbeddingStore* clips = nullptr;
  const data::EmbeddingStore* text = nullptr;
  const data::EmbeddingStore* captions = nullptr;  // optional

  eval::Stores stores() const { return {clips, text}; }
};

struct TrainedModel {
  train::ModelKind kind = train::ModelKind::Cast;
  model::Checkpoint checkpoint;
  std::vector<train::EpochStats> curve;
};

TrainedModel train_model(train::ModelKind kind, const data::AnnotationSet& ann,
                         const Sources& src, const data::RunConfig& cfg);

// CAST or early-fusion predictor; UsageError for other checkpoint kinds.
eval::Predictor predictor_from_checkpoint(const model::Checkpoint& ckpt);

struct ThreeWaySplit {
  data::AnnotationSet fit;
  data::AnnotationSet validation;
  data::AnnotationSet eval;
};
// Videos go to train/eval by cfg.train_frac; `val_frac` of the training
// videos are then held out for ensemble-weight selection.
ThreeWaySplit split_three(const data::AnnotationSet& ann, double train_frac, double val_frac,
                          std::uint64_t seed);

struct SelectedWeights {
  eval::GridResult full;
  eval::GridResult semantic;  // w_v fixed at 0
};
SelectedWeights select_weights(const data::Benchmark& validation, const eval::TripleTable& table,
                               const data::RunConfig& cfg);

struct ExperimentOptions {
  double val_frac = 0.25;
  const synth::Latents* latents = nullptr;  // adds an oracle row when set
};

struct ExperimentResult {
  std::vector<eval::EvalReport> reports;  // labelled rows
  SelectedWeights cast_weights;
  std::vector<train::EpochStats> cast_curve;
  bench::MiningReport eval_mining;

  const eval::EvalReport& row(std::string_view label) const;  // UsageError if absent
};

// Trains CAST, both early-fusion variants and learned late fusion on the fit
// videos, selects ensemble weights on the validation videos and evaluates
// every mode on the eval videos.
ExperimentResult run_experiment(const data::AnnotationSet& ann, const Sources& src,
                                const data::RunConfig& cfg, const ExperimentOptions& opt = {});
// Same on a given split (opt.val_frac unused).
ExperimentResult run_experiment(const ThreeWaySplit& split, const Sources& src,
                                const data::RunConfig& cfg, const ExperimentOptions& opt = {});

struct SweepRow {
  std::size_t context_len = 0;
  double acc = 0.0;
  double mnr = 0.0;
  double state_acc = 0.0;
  double ident_acc = 0.0;
  eval::EnsembleWeights weights;
};

// Retrains CAST per context length and reports its FullEnsemble metrics.
std::vector<SweepRow> context_sweep(const data::AnnotationSet& ann, const Sources& src,
                                    const data::RunConfig& cfg,
                                    const std::vector<std::size_t>& lengths, double val_frac = 0.25);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace cvr::pipeline
