#include <gtest/gtest.h>

#include <cmath>

#include "cvr/error.hpp"
#include "cvr/losses.hpp"
#include "cvr/optimizer.hpp"
#include "cvr/synth.hpp"
#include "cvr/trainer.hpp"
#include "support.hpp"

namespace cvr::train {
namespace {

using math::ConstSpan;
using math::Vector;
using testing::kFdTolerance;
using testing::max_rel_err;
using testing::random_unit;
using testing::random_vector;

std::vector<ConstSpan> spans(const std::vector<Vector>& vs) { return {vs.begin(), vs.end()}; }

// ---- losses -------------------------------------------------------------

TEST(Losses, SingleRowBatchIsZero) {
  Rng rng = make_rng(1);
  const std::vector<Vector> v{random_unit(8, rng)};
  const std::vector<Vector> p{random_unit(8, rng)};
  const BatchLoss l = loss_batch(v, spans(p), 0.07);
  EXPECT_DOUBLE_EQ(l.value, 0.0);
  for (double g : l.grad_pred[0]) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(Losses, EmptyNegativesIsZero) {
  Rng rng = make_rng(2);
  const Vector v = random_unit(8, rng), p = random_unit(8, rng);
  const LocalLoss l = loss_local(v, p, {}, 0.07);
  EXPECT_EQ(l.value, 0.0);
  for (double g : l.grad_pred) EXPECT_EQ(g, 0.0);
}

TEST(Losses, NegativeEqualToPositiveGivesLn2) {
  Rng rng = make_rng(3);
  const Vector v = random_unit(8, rng), p = random_unit(8, rng);
  const LocalLoss l = loss_local(v, p, {Negative{p, true}}, 0.07);
  EXPECT_NEAR(l.value, std::log(2.0), 1e-9);
}

TEST(Losses, ZeroFallbackNegativeContributesUnitTerm) {
  Rng rng = make_rng(4);
  const Vector v = random_unit(8, rng), p = random_unit(8, rng);
  const Vector zero(8, 0.0);
  const double s = math::cosine_sim(v, p) / 0.07;
  const LocalLoss kept = loss_local(v, p, {Negative{zero, false}}, 0.07);
  EXPECT_NEAR(kept.value, -s + std::log(std::exp(s) + 1.0), 1e-12);
  const LocalLoss dropped = loss_local(v, p, {Negative{zero, false}}, 0.07, true);
  EXPECT_EQ(dropped.value, 0.0);
}

TEST(Losses, TwoRowBatchByHand) {
  Rng rng = make_rng(5);
  const std::vector<Vector> v{random_unit(6, rng), random_unit(6, rng)};
  const std::vector<Vector> p{random_unit(6, rng), random_unit(6, rng)};
  const double tau = 0.1;
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double s0 = math::cosine_sim(v[i], p[0]) / tau;
    const double s1 = math::cosine_sim(v[i], p[1]) / tau;
    const double own = i == 0 ? s0 : s1;
    expected += -own + std::log(std::exp(s0) + std::exp(s1));
  }
  EXPECT_NEAR(loss_batch(v, spans(p), tau).value, expected / 2.0, 1e-12);
}

TEST(Losses, InfoNceLogitsGradientSumsToZero) {
  const std::vector<double> negs{0.3, -1.0, 2.0};
  const LogitLoss l = infonce_logits(1.5, negs);
  double sum = l.grad_pos;
  for (double g : l.grad_negs) sum += g;
  EXPECT_NEAR(sum, 0.0, 1e-15);
  EXPECT_NEAR(l.value, -1.5 + std::log(std::exp(1.5) + std::exp(0.3) + std::exp(-1.0) + std::exp(2.0)), 1e-12);
}

struct LossFixture {
  std::vector<Vector> v, p;
  std::vector<std::vector<Vector>> sn, in;
  std::vector<std::vector<Negative>> state, ident;

  LossFixture(std::size_t b, std::size_t d, Rng& rng) {
    for (std::size_t i = 0; i < b; ++i) {
      v.push_back(random_vector(d, rng));
      p.push_back(random_unit(d, rng));
      sn.push_back({random_unit(d, rng), random_unit(d, rng), Vector(d, 0.0)});
      in.push_back({random_unit(d, rng), random_unit(d, rng)});
    }
    for (std::size_t i = 0; i < b; ++i) {
      state.push_back({{sn[i][0], true}, {sn[i][1], true}, {sn[i][2], false}});
      ident.push_back({{in[i][0], true}, {in[i][1], true}});
    }
  }
  TotalLoss eval(const LossWeights& w) const { return loss_total(v, spans(p), state, ident, w); }
};

TEST(Losses, TotalIsWeightedSum) {
  Rng rng = make_rng(6);
  const LossFixture f(5, 8, rng);
  const LossWeights w{};
  const TotalLoss t = f.eval(w);
  EXPECT_NEAR(t.total, t.batch + w.lambda_s * t.state + w.lambda_i * t.ident, 1e-9);
  EXPECT_NEAR(t.batch, loss_batch(f.v, spans(f.p), w.tau).value, 1e-12);
  double state = 0.0;
  for (std::size_t i = 0; i < 5; ++i) state += loss_state(f.v[i], f.p[i], f.state[i], w.tau).value;
  EXPECT_NEAR(t.state, state / 5.0, 1e-12);
}

TEST(Losses, TotalGradientMatchesFiniteDifferences) {
  Rng rng = make_rng(7);
  LossFixture f(4, 6, rng);
  const LossWeights w{0.5, 5.0, 1.0, false};
  const TotalLoss t = f.eval(w);
  for (std::size_t i = 0; i < f.v.size(); ++i) {
    const auto numeric = testing::fd_gradient([&] { return f.eval(w).total; }, f.v[i]);
    EXPECT_LT(max_rel_err(t.grad_pred[i], numeric), kFdTolerance) << "row " << i;
  }
}

// ---- optimizer ----------------------------------------------------------

struct Toy {
  std::vector<double> x;
  std::vector<model::TensorRef> tensors() { return {model::ref("x", x)}; }
  std::vector<model::ConstTensorRef> tensors() const { return {model::ref("x", x)}; }
};

TEST(AdamW, ZeroGradientOnlyDecays) {
  Toy p{{1.0, -2.0, 0.5}};
  Toy g{{0.0, 0.0, 0.0}};
  const AdamWConfig hp{0.1, 0.01};
  OptimizerState s = make_optimizer_state(p, hp);
  adamw_step(p, g, s);
  EXPECT_DOUBLE_EQ(p.x[0], 1.0 * (1 - 0.1 * 0.01));
  EXPECT_DOUBLE_EQ(p.x[1], -2.0 * (1 - 0.1 * 0.01));
}

TEST(AdamW, FirstStepMovesByLrAgainstGradientSign) {
  Toy p{{0.0, 0.0, 0.0}};
  Toy g{{3.0, -0.2, 1e-3}};
  const AdamWConfig hp{0.01, 0.0};
  OptimizerState s = make_optimizer_state(p, hp);
  adamw_step(p, g, s);
  EXPECT_NEAR(p.x[0], -0.01, 1e-8);
  EXPECT_NEAR(p.x[1], 0.01, 1e-8);
  EXPECT_NEAR(p.x[2], -0.01, 1e-6);
}

TEST(AdamW, ZeroLearningRateIsNoOp) {
  Toy p{{1.0, 2.0}};
  Toy g{{0.5, -0.5}};
  OptimizerState s = make_optimizer_state(p, AdamWConfig{0.0, 0.5});
  adamw_step(p, g, s);
  EXPECT_EQ(p.x, (std::vector<double>{1.0, 2.0}));
}

TEST(AdamW, DescendsQuadraticBowl) {
  Toy p{{3.0, -4.0}};
  OptimizerState s = make_optimizer_state(p, AdamWConfig{0.05, 1e-3});
  auto f = [&] { return p.x[0] * p.x[0] + p.x[1] * p.x[1]; };
  double prev = f();
  for (int i = 0; i < 100; ++i) {
    Toy g{{2 * p.x[0], 2 * p.x[1]}};
    adamw_step(p, g, s);
    const double now = f();
    EXPECT_LT(now, prev) << "step " << i;
    prev = now;
  }
}

TEST(AdamW, ShapeMismatchThrows) {
  Toy p{{1.0, 2.0}};
  Toy g{{1.0}};
  OptimizerState s = make_optimizer_state(p, AdamWConfig{});
  EXPECT_THROW(adamw_step(p, g, s), Error);
}

// ---- training loop ------------------------------------------------------

struct SmallWorld {
  synth::World world;
  std::vector<TrainingInstance> data;

  SmallWorld() : world(make()) {
    data = build_training_instances(world.annotations, world.clips, world.text, &world.captions, 3,
                                    bench::MiningRules{}, 1);
  }
  static synth::World make() {
    synth::WorldSpec s;
    s.d = 16;
    s.d_id = 4;
    s.d_st = 8;
    s.n_tasks = 3;
    s.videos_per_task = 4;
    s.steps_per_video = 5;
    s.seed = 3;
    return synth::generate(s);
  }
};

const SmallWorld& small_world() {
  static const SmallWorld w;
  return w;
}

TrainOptions quick(std::size_t epochs, std::size_t workers = 1) {
  TrainOptions o;
  o.batch_size = 8;
  o.epochs = epochs;
  o.adamw.lr = 1e-3;
  o.workers = workers;
  o.seed = 11;
  return o;
}

TEST(Instances, SlotsAreAlwaysFull) {
  const auto& w = small_world();
  ASSERT_FALSE(w.data.empty());
  for (const auto& inst : w.data) {
    EXPECT_EQ(inst.state_negs.size(), 3u);
    EXPECT_EQ(inst.ident_negs.size(), 3u);
    EXPECT_EQ(inst.history.size() > 0, inst.has_anchor);
    EXPECT_LE(inst.history.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      if (!inst.state_valid[i]) EXPECT_EQ(math::norm(inst.state_negs[i]), 0.0);
      if (!inst.ident_valid[i]) EXPECT_EQ(math::norm(inst.ident_negs[i]), 0.0);
    }
  }
}

TEST(Instances, ShortStatePoolIsToppedUpFromIdentityPool) {
  // two-step videos have one state negative candidate at most
  synth::WorldSpec s;
  s.d = 16;
  s.d_id = 4;
  s.d_st = 8;
  s.n_tasks = 2;
  s.videos_per_task = 6;
  s.steps_per_video = 2;
  const auto w = synth::generate(s);
  const auto data = build_training_instances(w.annotations, w.clips, w.text, &w.captions, 1,
                                             bench::MiningRules{}, 1);
  for (const auto& inst : data) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(inst.state_valid[i]);
  }
}

TEST(Training, ZeroEpochsReturnsInit) {
  const auto init = model::init_cast_params(16, 8, 3, 5);
  const auto r = train_predictor(init, small_world().data, quick(0));
  EXPECT_EQ(model::to_checkpoint(r.params), model::to_checkpoint(init));
  EXPECT_TRUE(r.curve.empty());
}

TEST(Training, DeterministicAcrossRunsAndWorkers) {
  const auto init = model::init_cast_params(16, 8, 3, 5);
  const auto a = train_predictor(init, small_world().data, quick(3, 1));
  const auto b = train_predictor(init, small_world().data, quick(3, 1));
  const auto c = train_predictor(init, small_world().data, quick(3, 8));
  EXPECT_EQ(model::to_checkpoint(a.params), model::to_checkpoint(b.params));
  EXPECT_EQ(model::to_checkpoint(a.params), model::to_checkpoint(c.params));
  EXPECT_EQ(loss_curve_csv(a.curve), loss_curve_csv(c.curve));
}

TEST(Training, CastLossDropsByHalf) {
  const auto init = model::init_cast_params(16, 8, 3, 5);
  const auto r = train_predictor(init, small_world().data, quick(150, 4));
  ASSERT_EQ(r.curve.size(), 150u);
  EXPECT_LT(r.curve.back().total, 0.5 * r.curve.front().total);
}

TEST(Training, EarlyFusionAndLateFusionLossDecrease) {
  const auto ef = train_predictor(model::init_early_fusion_params(16, 32, true, 5), small_world().data,
                                  quick(60, 4));
  EXPECT_LT(ef.curve.back().total, ef.curve.front().total);
  const auto lf = train_late_fusion(model::init_late_fusion_params(8, 5), small_world().data, quick(60, 4));
  EXPECT_LT(lf.curve.back().total, lf.curve.front().total);
}

TEST(Training, RejectsBadOptions) {
  const auto init = model::init_cast_params(16, 8, 3, 5);
  TrainOptions o = quick(1);
  o.batch_size = 0;
  EXPECT_THROW(train_predictor(init, small_world().data, o), Error);
  EXPECT_THROW(train_predictor(init, {}, quick(1)), Error);
}

TEST(Training, LossCurveCsvHeader) {
  const std::string csv = loss_curve_csv({EpochStats{0, 1.0, 0.5, 0.1, 0.0}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,mean_loss,batch_loss,state_loss,ident_loss");
}

}  // namespace
}  // namespace cvr::train
