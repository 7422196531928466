#pragma once

#include <vector>

#include "cvr/math.hpp"
#include "cvr/rng.hpp"

namespace cvr::model {

// Inputs of a next-state predictor. `anchor` is the most recent context clip
// (a zero vector when the context is empty); `history` is the context in
// chronological order, most recent last. Embeddings are frozen features and
// never receive gradients.
struct PredictorInput {
  math::ConstSpan query;
  math::ConstSpan anchor;
  std::vector<math::ConstSpan> history;
};

struct ForwardOptions {
  bool train = false;
  double dropout_rate = 0.1;
  Rng* rng = nullptr;  // required only when train && dropout_rate > 0
};

}  // namespace cvr::model
