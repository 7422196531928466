#include <gtest/gtest.h>

#include <numeric>

#include "cvr/baselines.hpp"
#include "cvr/cast.hpp"
#include "cvr/error.hpp"
#include "support.hpp"

namespace cvr::model {
namespace {

using math::Vector;
using testing::kFdTolerance;
using testing::max_param_rel_err;
using testing::random_unit;
using testing::random_vector;
using testing::ScratchDir;

constexpr std::size_t kL = 3;

std::size_t heads_for(std::size_t d) { return std::min<std::size_t>(8, d / 2); }

// Random values in every tensor (not just the init pattern) so biases, LN
// affine terms and all paths carry gradient.
template <ParamSet P>
void randomize(P& p, Rng& rng, double scale = 0.5) {
  for (auto& t : p.tensors()) {
    const auto v = random_vector(t.values.size(), rng, scale);
    std::copy(v.begin(), v.end(), t.values.begin());
  }
}

struct Sample {
  Vector query;
  Vector anchor;
  std::vector<Vector> history;

  PredictorInput input() const {
    PredictorInput in{query, anchor, {}};
    for (const auto& h : history) in.history.emplace_back(h);
    return in;
  }
};

Sample sample(std::size_t d, std::size_t h, Rng& rng) {
  Sample s{random_unit(d, rng), random_unit(d, rng), {}};
  for (std::size_t i = 0; i < h; ++i) s.history.push_back(random_unit(d, rng));
  if (h > 0) s.anchor = s.history.back();
  return s;
}

struct GradCase {
  std::size_t d;
  std::size_t history;
};

class ModelGradients : public ::testing::TestWithParam<GradCase> {};

template <class P>
double predictor_grad_error(P& p, const Sample& s, Rng& rng) {
  const std::size_t d = s.query.size();
  const Vector c = random_vector(d, rng);
  typename P::Tape tape;
  const ForwardOptions eval{};
  predict(p, s.input(), eval, &tape);
  P grads = zeros_like(p);
  backward(p, tape, c, grads);
  return max_param_rel_err(p, grads, [&] { return math::dot(predict(p, s.input(), eval, nullptr), c); });
}

TEST_P(ModelGradients, Cast) {
  const auto [d, h] = GetParam();
  Rng rng = make_rng(1000 + 10 * d + h);
  CastParams p = make_cast_params(d, heads_for(d), kL);
  randomize(p, rng);
  EXPECT_LT(predictor_grad_error(p, sample(d, h, rng), rng), kFdTolerance);
}

TEST_P(ModelGradients, EarlyFusionDirect) {
  const auto [d, h] = GetParam();
  Rng rng = make_rng(2000 + 10 * d + h);
  EarlyFusionParams p = make_early_fusion_params(d, 2 * d, false);
  randomize(p, rng);
  EXPECT_LT(predictor_grad_error(p, sample(d, h, rng), rng), kFdTolerance);
}

TEST_P(ModelGradients, EarlyFusionResidual) {
  const auto [d, h] = GetParam();
  Rng rng = make_rng(3000 + 10 * d + h);
  EarlyFusionParams p = make_early_fusion_params(d, 2 * d, true);
  randomize(p, rng);
  EXPECT_LT(predictor_grad_error(p, sample(d, h, rng), rng), kFdTolerance);
}

INSTANTIATE_TEST_SUITE_P(DimsAndHistory, ModelGradients,
                         ::testing::Values(GradCase{4, 0}, GradCase{4, 1}, GradCase{4, kL},
                                           GradCase{8, 0}, GradCase{8, 1}, GradCase{8, kL},
                                           GradCase{16, 0}, GradCase{16, 1}, GradCase{16, kL}),
                         [](const auto& info) {
                           return "d" + std::to_string(info.param.d) + "_h" +
                                  std::to_string(info.param.history);
                         });

TEST(CastGradients, ZeroAnchorWithEmptyContext) {
  for (std::size_t d : {4, 8, 16}) {
    Rng rng = make_rng(4000 + d);
    CastParams p = make_cast_params(d, heads_for(d), kL);
    randomize(p, rng);
    Sample s = sample(d, 0, rng);
    s.anchor.assign(d, 0.0);
    EXPECT_LT(predictor_grad_error(p, s, rng), kFdTolerance) << "d=" << d;
  }
}

TEST(LateFusion, Gradients) {
  Rng rng = make_rng(5);
  LateFusionParams p = make_late_fusion_params(8);
  randomize(p, rng);
  for (int i = 0; i < 10; ++i) {
    const double a = 2 * uniform01(rng) - 1;
    const double b = 2 * uniform01(rng) - 1;
    LateFusionTape tape;
    late_fusion_score(p, a, b, &tape);
    LateFusionParams grads = zeros_like(p);
    late_fusion_backward(p, tape, 1.3, grads);
    EXPECT_LT(max_param_rel_err(p, grads, [&] { return 1.3 * late_fusion_score(p, a, b, nullptr); }),
              kFdTolerance);
  }
}

TEST(LateFusion, WeightedSumMatchesHeuristicRanking) {
  Rng rng = make_rng(6);
  for (double alpha : {0.0, 0.3, 0.5, 1.2}) {
    const LateFusionParams p = late_fusion_weighted_sum(8, alpha);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> a(10), b(10);
      for (int i = 0; i < 10; ++i) {
        a[i] = 2 * uniform01(rng) - 1;
        b[i] = 2 * uniform01(rng) - 1;
      }
      std::vector<int> by_mlp(10), by_sum(10);
      std::iota(by_mlp.begin(), by_mlp.end(), 0);
      std::iota(by_sum.begin(), by_sum.end(), 0);
      std::sort(by_mlp.begin(), by_mlp.end(), [&](int i, int j) {
        return late_fusion_score(p, a[i], b[i], nullptr) > late_fusion_score(p, a[j], b[j], nullptr);
      });
      std::sort(by_sum.begin(), by_sum.end(),
                [&](int i, int j) { return a[i] + alpha * b[i] > a[j] + alpha * b[j]; });
      EXPECT_EQ(by_mlp, by_sum);
    }
  }
}

TEST(Cast, ZeroParamsIsResidualIdentity) {
  Rng rng = make_rng(7);
  CastParams p = make_cast_params(16, 8, kL);
  fill(p, 0.0);
  const Sample s = sample(16, 2, rng);
  const Vector out = predict(p, s.input(), ForwardOptions{}, nullptr);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], s.anchor[i], 1e-15);
}

TEST(Cast, EmptyHistoryIgnoresContextPath) {
  Rng rng = make_rng(8);
  CastParams p = init_cast_params(16, 8, kL, 1);
  const Sample s = sample(16, 0, rng);
  const Vector before = predict(p, s.input(), ForwardOptions{}, nullptr);
  for (math::Matrix* w : {&p.wq, &p.wh, &p.wo, &p.wa, &p.wb}) w->data = random_vector(w->data.size(), rng);
  p.ba = random_vector(16, rng);
  EXPECT_EQ(predict(p, s.input(), ForwardOptions{}, nullptr), before);

  // and equals normalize(anchor + cond path) computed from a zeroed context path
  CastParams cond_only = p;
  for (math::Matrix* w : {&cond_only.wq, &cond_only.wh, &cond_only.wo, &cond_only.wa, &cond_only.wb}) {
    std::fill(w->data.begin(), w->data.end(), 0.0);
  }
  const Vector ref = predict(cond_only, s.input(), ForwardOptions{}, nullptr);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(before[i], ref[i], 1e-15);
}

TEST(Cast, PaddingInvariance) {
  Rng rng = make_rng(9);
  CastParams padded = make_cast_params(16, 8, 5);
  randomize(padded, rng);
  for (std::size_t h = 1; h < 5; ++h) {
    const Sample s = sample(16, h, rng);
    CastParams exact = padded;
    exact.context_len = h;
    const Vector a = predict(padded, s.input(), ForwardOptions{}, nullptr);
    const Vector b = predict(exact, s.input(), ForwardOptions{}, nullptr);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  }
}

TEST(Cast, OutputIsUnitNorm) {
  Rng rng = make_rng(10);
  const CastParams p = init_cast_params(64, 8, 5, 3);
  for (std::size_t h = 0; h <= 5; ++h) {
    EXPECT_NEAR(math::norm(predict(p, sample(64, h, rng).input(), ForwardOptions{}, nullptr)), 1.0, 1e-12);
  }
}

TEST(Cast, BackwardIsLinearAndZeroForZeroGrad) {
  Rng rng = make_rng(11);
  CastParams p = make_cast_params(8, 4, kL);
  randomize(p, rng);
  const Sample s = sample(8, 2, rng);
  CastTape tape;
  predict(p, s.input(), ForwardOptions{}, &tape);
  const Vector g1 = random_vector(8, rng);
  const Vector g2 = random_vector(8, rng);

  CastParams zero = zeros_like(p);
  backward(p, tape, Vector(8, 0.0), zero);
  for (const auto& t : zero.tensors()) {
    for (double v : t.values) EXPECT_EQ(v, 0.0);
  }

  CastParams sep = zeros_like(p);
  backward(p, tape, g1, sep);
  backward(p, tape, g2, sep);
  CastParams joint = zeros_like(p);
  backward(p, tape, math::add(g1, g2), joint);
  const auto a = sep.tensors();
  const auto b = joint.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].values.size(); ++i) {
      EXPECT_NEAR(a[t].values[i], b[t].values[i], 1e-12 * (1 + std::abs(b[t].values[i])));
    }
  }
}

TEST(Cast, EvalModeIsDeterministicAndTrainModeFollowsRng) {
  Rng rng = make_rng(12);
  const CastParams p = init_cast_params(16, 8, kL, 4);
  const Sample s = sample(16, 3, rng);
  EXPECT_EQ(predict(p, s.input(), ForwardOptions{}, nullptr),
            predict(p, s.input(), ForwardOptions{}, nullptr));
  Rng r1 = make_rng(99);
  Rng r2 = make_rng(99);
  const ForwardOptions t1{true, 0.5, &r1};
  const ForwardOptions t2{true, 0.5, &r2};
  const Vector a = predict(p, s.input(), t1, nullptr);
  EXPECT_EQ(a, predict(p, s.input(), t2, nullptr));
  EXPECT_NE(a, predict(p, s.input(), ForwardOptions{}, nullptr));
}

TEST(Cast, InitIsSeededXavier) {
  const CastParams a = init_cast_params(64, 8, 5, 7);
  EXPECT_EQ(a.head_dim(), 8u);
  EXPECT_EQ(a.w1.data, init_cast_params(64, 8, 5, 7).w1.data);
  EXPECT_NE(a.w1.data, init_cast_params(64, 8, 5, 8).w1.data);
  for (double g : a.ln1_gamma) EXPECT_EQ(g, 1.0);
  for (double b : a.b1) EXPECT_EQ(b, 0.0);

  // w1: 128 x 128, uniform(-l, l) with l = sqrt(6 / 256)
  const double limit = std::sqrt(6.0 / 256.0);
  double sum = 0.0;
  for (double w : a.w1.data) {
    EXPECT_LE(std::abs(w), limit);
    sum += w;
  }
  const double n = static_cast<double>(a.w1.data.size());
  const double standard_error = limit / std::sqrt(3.0 * n);
  EXPECT_LT(std::abs(sum / n), 3.0 * standard_error);
}

TEST(Cast, ShapeErrors) {
  try {
    make_cast_params(10, 8, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadDims);
  }
  Rng rng = make_rng(13);
  const CastParams p = init_cast_params(8, 4, 2, 1);
  try {
    predict(p, sample(8, 3, rng).input(), ForwardOptions{}, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::HistoryTooLong);
  }
  try {
    predict(p, sample(4, 1, rng).input(), ForwardOptions{}, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
  CastTape tape;
  predict(init_cast_params(16, 8, 2, 1), sample(16, 1, rng).input(), ForwardOptions{}, &tape);
  CastParams grads = zeros_like(p);
  try {
    backward(p, tape, Vector(8, 1.0), grads);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TapeMismatch);
  }
}

TEST(EarlyFusion, ZeroParams) {
  Rng rng = make_rng(14);
  const Sample s = sample(8, 2, rng);
  EarlyFusionParams residual = make_early_fusion_params(8, 16, true);
  const Vector r = predict(residual, s.input(), ForwardOptions{}, nullptr);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(r[i], s.anchor[i], 1e-15);
  EarlyFusionParams direct = make_early_fusion_params(8, 16, false);
  const Vector d = predict(direct, s.input(), ForwardOptions{}, nullptr);
  EXPECT_TRUE(math::all_finite(d));
  EXPECT_NEAR(math::norm(d), 1.0, 1e-12);
}

TEST(Checkpoint, RoundTripsEveryKind) {
  ScratchDir dir("ckpt");
  const CastParams cast = init_cast_params(16, 8, 3, 1);
  save_checkpoint(to_checkpoint(cast), dir / "cast.bin");
  const CastParams cast2 = cast_from_checkpoint(load_checkpoint(dir / "cast.bin"));
  EXPECT_EQ(cast2.context_len, 3u);
  EXPECT_EQ(to_checkpoint(cast2), to_checkpoint(cast));
  EXPECT_EQ(peek_checkpoint_kind(dir / "cast.bin"), "cast");

  const EarlyFusionParams ef = init_early_fusion_params(8, 16, true, 2);
  save_checkpoint(to_checkpoint(ef), dir / "ef.bin");
  EXPECT_EQ(to_checkpoint(early_fusion_from_checkpoint(load_checkpoint(dir / "ef.bin"))), to_checkpoint(ef));

  const LateFusionParams lf = init_late_fusion_params(8, 3);
  save_checkpoint(to_checkpoint(lf), dir / "lf.bin");
  EXPECT_EQ(to_checkpoint(late_fusion_from_checkpoint(load_checkpoint(dir / "lf.bin"))), to_checkpoint(lf));

  EXPECT_THROW(cast_from_checkpoint(load_checkpoint(dir / "lf.bin")), Error);
}

}  // namespace
}  // namespace cvr::model
