#include "cvr/optimizer.hpp"

#include <cmath>

#include "cvr/error.hpp"
#include "cvr/kernels.hpp"

namespace cvr::train {

void adamw_step(std::vector<model::TensorRef> params, const std::vector<model::ConstTensorRef>& grads,
                OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw Error(Errc::ShapeMismatch, "optimizer tensor count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values.size() != grads[i].values.size() ||
        params[i].values.size() != state.m[i].size()) {
      throw Error(Errc::ShapeMismatch, "optimizer shape mismatch at " + std::string(params[i].name));
    }
  }
  ++state.step;
  const auto& hp = state.hp;
  const double decay = 1.0 - hp.lr * hp.weight_decay;
  const double bias1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    k.adamw(params[i].values.data(), grads[i].values.data(), state.m[i].data(), state.v[i].data(),
            params[i].values.size(), hp.lr, decay, hp.beta1, hp.beta2, bias1, bias2, hp.eps);
  }
}

}  // namespace cvr::train
