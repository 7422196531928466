#include "cvr/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cvr/error.hpp"
#include "cvr/kernels.hpp"

namespace cvr::math {
namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(Errc::ShapeMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double dot(ConstSpan a, ConstSpan b) {
  require_same(a.size(), b.size(), "dot");
  return kernels::dot(a, b);
}

double norm(ConstSpan x) { return std::sqrt(kernels::dot(x, x)); }

void add_into(ConstSpan x, MutSpan y) {
  require_same(x.size(), y.size(), "add_into");
  kernels::axpy(1.0, x, y);
}

Vector add(ConstSpan a, ConstSpan b) {
  require_same(a.size(), b.size(), "add");
  Vector out(a.begin(), a.end());
  kernels::axpy(1.0, b, out);
  return out;
}

Vector concat(ConstSpan a, ConstSpan b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

bool all_finite(ConstSpan x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

NormalizeCache l2_normalize_fwd(ConstSpan x) {
  const double n = norm(x);
  if (!(n > kEpsilonNorm)) {
    throw Error(Errc::NormUnderflow, "vector norm " + std::to_string(n) + " at or below floor");
  }
  NormalizeCache cache{Vector(x.begin(), x.end()), n};
  kernels::scale(1.0 / n, cache.y);
  return cache;
}

NormalizeCache l2_normalize_floor_fwd(ConstSpan x) {
  if (norm(x) > kEpsilonNorm) return l2_normalize_fwd(x);
  Vector shifted(x.begin(), x.end());
  if (shifted.empty()) throw Error(Errc::ShapeMismatch, "cannot normalize an empty vector");
  shifted[0] += kEpsilonNorm;
  const double n = norm(shifted);
  if (!(n > 0.0)) throw Error(Errc::NormUnderflow, "vector norm vanished after floor shift");
  NormalizeCache cache{std::move(shifted), n};
  kernels::scale(1.0 / n, cache.y);
  return cache;
}

Vector l2_normalize(ConstSpan x) { return l2_normalize_fwd(x).y; }

Vector l2_normalize_bwd(const NormalizeCache& cache, ConstSpan grad_y) {
  require_same(cache.y.size(), grad_y.size(), "l2_normalize_bwd");
  // d(x/|x|) = (I - y y^T) / |x|
  const double proj = kernels::dot(cache.y, grad_y);
  Vector gx(grad_y.begin(), grad_y.end());
  kernels::axpy(-proj, cache.y, gx);
  kernels::scale(1.0 / cache.norm, gx);
  return gx;
}

double cosine_sim(ConstSpan a, ConstSpan b) {
  require_same(a.size(), b.size(), "cosine_sim");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > kEpsilonNorm) || !(nb > kEpsilonNorm)) {
    throw Error(Errc::NormUnderflow, "cosine similarity of a zero vector");
  }
  return std::clamp(kernels::dot(a, b) / (na * nb), -1.0, 1.0);
}

CosineGrads cosine_sim_bwd(ConstSpan a, ConstSpan b, double grad_out) {
  require_same(a.size(), b.size(), "cosine_sim_bwd");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > kEpsilonNorm) || !(nb > kEpsilonNorm)) {
    throw Error(Errc::NormUnderflow, "cosine similarity of a zero vector");
  }
  const double s = kernels::dot(a, b) / (na * nb);
  // ds/da = b/(|a||b|) - s a/|a|^2
  CosineGrads g{Vector(a.size(), 0.0), Vector(b.size(), 0.0)};
  kernels::axpy(grad_out / (na * nb), b, g.a);
  kernels::axpy(-grad_out * s / (na * na), a, g.a);
  kernels::axpy(grad_out / (na * nb), a, g.b);
  kernels::axpy(-grad_out * s / (nb * nb), b, g.b);
  return g;
}

Vector matvec(const Matrix& w, ConstSpan x) {
  require_same(w.cols, x.size(), "matvec input");
  Vector y(w.rows, 0.0);
  kernels::active().gemv(w.data.data(), x.data(), y.data(), w.rows, w.cols);
  return y;
}

Vector linear_fwd(ConstSpan x, const Matrix& w, ConstSpan b) {
  require_same(w.rows, b.size(), "linear bias");
  Vector y = matvec(w, x);
  kernels::axpy(1.0, b, y);
  return y;
}

Vector linear_bwd(ConstSpan x, const Matrix& w, ConstSpan grad_y, Matrix& grad_w,
                  MutSpan grad_b) {
  require_same(w.cols, x.size(), "linear_bwd input");
  require_same(w.rows, grad_y.size(), "linear_bwd upstream");
  require_same(grad_w.rows * grad_w.cols, w.rows * w.cols, "linear_bwd weight grad");
  const auto& k = kernels::active();
  Vector gx(w.cols, 0.0);
  k.gemv_t_acc(w.data.data(), grad_y.data(), gx.data(), w.rows, w.cols);
  k.ger_acc(grad_y.data(), x.data(), grad_w.data.data(), w.rows, w.cols);
  if (!grad_b.empty()) {
    require_same(grad_b.size(), grad_y.size(), "linear_bwd bias grad");
    k.axpy(1.0, grad_y.data(), grad_b.data(), grad_y.size());
  }
  return gx;
}

Vector layer_norm_fwd(ConstSpan x, ConstSpan gamma, ConstSpan beta, LayerNormCache* cache) {
  require_same(x.size(), gamma.size(), "layer_norm gamma");
  require_same(x.size(), beta.size(), "layer_norm beta");
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + kEpsilonLayerNorm);
  Vector x_hat(n);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x_hat[i] = (x[i] - mean) * inv_std;
    y[i] = gamma[i] * x_hat[i] + beta[i];
  }
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = inv_std;
  }
  return y;
}

Vector layer_norm_bwd(const LayerNormCache& cache, ConstSpan gamma, ConstSpan grad_y,
                      MutSpan grad_gamma, MutSpan grad_beta) {
  const std::size_t n = cache.x_hat.size();
  require_same(n, grad_y.size(), "layer_norm_bwd upstream");
  require_same(n, gamma.size(), "layer_norm_bwd gamma");
  Vector g_hat(n);
  double sum_g = 0.0;
  double sum_gx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grad_gamma[i] += grad_y[i] * cache.x_hat[i];
    grad_beta[i] += grad_y[i];
    g_hat[i] = grad_y[i] * gamma[i];
    sum_g += g_hat[i];
    sum_gx += g_hat[i] * cache.x_hat[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector gx(n);
  for (std::size_t i = 0; i < n; ++i) {
    gx[i] = cache.inv_std * (g_hat[i] - inv_n * sum_g - cache.x_hat[i] * inv_n * sum_gx);
  }
  return gx;
}

Vector stable_softmax(ConstSpan logits, const std::vector<bool>& mask) {
  if (!mask.empty()) require_same(mask.size(), logits.size(), "softmax mask");
  auto masked = [&](std::size_t i) { return !mask.empty() && mask[i]; };
  double max_logit = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (masked(i)) continue;
    max_logit = std::max(max_logit, logits[i]);
    any = true;
  }
  if (!any) throw Error(Errc::AllMasked, "softmax over a fully masked row");
  Vector p(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (masked(i)) continue;
    p[i] = std::exp(logits[i] - max_logit);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Vector softmax_bwd(ConstSpan probs, ConstSpan grad_probs) {
  require_same(probs.size(), grad_probs.size(), "softmax_bwd");
  const double inner = kernels::dot(probs, grad_probs);
  Vector g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = probs[i] * (grad_probs[i] - inner);
  return g;
}

Vector relu_fwd(ConstSpan x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Vector relu_bwd(ConstSpan x, ConstSpan grad_y) {
  require_same(x.size(), grad_y.size(), "relu_bwd");
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? grad_y[i] : 0.0;
  return g;
}

DropoutResult dropout_fwd(ConstSpan x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(Errc::BadSpec, "dropout rate must lie in [0, 1)");
  }
  DropoutResult out{Vector(x.begin(), x.end()), Vector(x.size(), 1.0)};
  if (rate == 0.0) return out;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.scale[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
    out.y[i] = x[i] * out.scale[i];
  }
  return out;
}

Vector dropout_bwd(ConstSpan scale, ConstSpan grad_y) {
  require_same(scale.size(), grad_y.size(), "dropout_bwd");
  Vector g(grad_y.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_y[i] * scale[i];
  return g;
}

}  // namespace cvr::math
