#pragma once
// AdamW with decoupled weight decay:
//   theta <- theta * (1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps)

#include <cstdint>
#include <vector>

#include "cvr/params.hpp"

namespace cvr::train {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamWConfig hp;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

template <model::ParamSet P>
OptimizerState make_optimizer_state(const P& params, const AdamWConfig& hp) {
  OptimizerState s;
  s.hp = hp;
  for (const auto& t : params.tensors()) {
    s.m.emplace_back(t.values.size(), 0.0);
    s.v.emplace_back(t.values.size(), 0.0);
  }
  return s;
}

// Throws ShapeMismatch when params, grads and state disagree.
void adamw_step(std::vector<model::TensorRef> params, const std::vector<model::ConstTensorRef>& grads,
                OptimizerState& state);

template <model::ParamSet P>
void adamw_step(P& params, const P& grads, OptimizerState& state) {
  adamw_step(params.tensors(), grads.tensors(), state);
}

}  // namespace cvr::train
