#pragma once
// Training-instance construction and the deterministic training loop.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cvr/annotations.hpp"
#include "cvr/baselines.hpp"
#include "cvr/cast.hpp"
#include "cvr/embedding_store.hpp"
#include "cvr/losses.hpp"
#include "cvr/mining.hpp"
#include "cvr/optimizer.hpp"
#include "cvr/run_config.hpp"

namespace cvr::train {

// One supervised step. Negative slots are always max_state / max_ident long:
// a short hard pool is topped up from the other pool's leftovers, and any
// remaining slot holds a zero vector flagged invalid.
struct TrainingInstance {
  std::string query_id;
  math::Vector query;
  math::Vector anchor;  // zero vector when the context is empty
  bool has_anchor = false;
  std::vector<math::Vector> history;
  math::Vector positive;
  std::vector<math::Vector> state_negs;
  std::vector<bool> state_valid;
  std::vector<math::Vector> ident_negs;
  std::vector<bool> ident_valid;

  model::PredictorInput input() const;
  std::vector<Negative> state_negatives() const;
  std::vector<Negative> ident_negatives() const;
};

// Embedding stores are expected to hold unit vectors. Text is keyed by the
// query (= target clip) id.
std::vector<TrainingInstance> build_training_instances(const data::AnnotationSet& ann,
                                                       const data::EmbeddingStore& clips,
                                                       const data::EmbeddingStore& text,
                                                       const data::EmbeddingStore* captions,
                                                       std::size_t context_len,
                                                       const bench::MiningRules& rules,
                                                       std::size_t workers = 1);

enum class ModelKind { Cast, EarlyFusionDirect, EarlyFusionResidual, LateFusion };
ModelKind parse_model_kind(std::string_view name);
std::string_view model_kind_name(ModelKind kind);

struct TrainOptions {
  LossWeights loss;
  AdamWConfig adamw;
  std::size_t batch_size = 512;
  std::size_t epochs = 30;
  std::uint64_t seed = 42;
  double dropout_rate = 0.1;
  std::size_t workers = 1;
};
TrainOptions train_options(const data::RunConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double total = 0.0;
  double batch = 0.0;
  double state = 0.0;
  double ident = 0.0;
};
std::string loss_curve_csv(const std::vector<EpochStats>& curve);

template <class P>
struct TrainResult {
  P params;
  std::vector<EpochStats> curve;
};

// Bit-identical for a fixed seed regardless of `workers`: per-epoch shuffles
// and per-instance dropout streams are derived from (seed, epoch, index) and
// gradients are reduced in a fixed order.
TrainResult<model::CastParams> train_predictor(model::CastParams init,
                                               const std::vector<TrainingInstance>& data,
                                               const TrainOptions& opt);
TrainResult<model::EarlyFusionParams> train_predictor(model::EarlyFusionParams init,
                                                      const std::vector<TrainingInstance>& data,
                                                      const TrainOptions& opt);
// Scores are A = sim(query, c) and B = sim(anchor, c) (0 for zero vectors);
// logits are score / tau under the same three-term objective.
TrainResult<model::LateFusionParams> train_late_fusion(model::LateFusionParams init,
                                                       const std::vector<TrainingInstance>& data,
                                                       const TrainOptions& opt);

}  // namespace cvr::train
