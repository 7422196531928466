#include <gtest/gtest.h>

#include "cvr/error.hpp"
#include "cvr/kernels.hpp"
#include "support.hpp"

namespace cvr {
namespace {

using kernels::Isa;
using testing::random_vector;

// AVX2 kernels reassociate sums, so they agree with scalar up to round-off.
constexpr double kTol = 1e-12;

void expect_close(const std::vector<double>& a, const std::vector<double>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], kTol * std::max(1.0, std::abs(a[i]))) << "index " << i;
  }
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (!kernels::isa_supported(Isa::Avx2)) GTEST_SKIP() << "AVX2 not available";
  }
  const kernels::KernelTable& s = kernels::scalar_table();
  const kernels::KernelTable& v = *kernels::avx2_table();
};

TEST_P(KernelEquivalence, DotAxpyScale) {
  const std::size_t n = GetParam();
  Rng rng = make_rng(n);
  const auto a = random_vector(n, rng);
  const auto b = random_vector(n, rng);
  EXPECT_NEAR(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n), kTol * (1.0 + n));

  auto y1 = b;
  auto y2 = b;
  s.axpy(0.37, a.data(), y1.data(), n);
  v.axpy(0.37, a.data(), y2.data(), n);
  expect_close(y1, y2);

  s.scale(-1.5, y1.data(), n);
  v.scale(-1.5, y2.data(), n);
  expect_close(y1, y2);
}

TEST_P(KernelEquivalence, MatrixKernels) {
  const std::size_t cols = GetParam();
  const std::size_t rows = cols / 2 + 3;
  Rng rng = make_rng(100 + cols);
  const auto w = random_vector(rows * cols, rng);
  const auto x = random_vector(cols, rng);
  const auto g = random_vector(rows, rng);

  std::vector<double> y1(rows), y2(rows);
  s.gemv(w.data(), x.data(), y1.data(), rows, cols);
  v.gemv(w.data(), x.data(), y2.data(), rows, cols);
  expect_close(y1, y2);

  auto o1 = random_vector(cols, rng);
  auto o2 = o1;
  s.gemv_t_acc(w.data(), g.data(), o1.data(), rows, cols);
  v.gemv_t_acc(w.data(), g.data(), o2.data(), rows, cols);
  expect_close(o1, o2);

  auto w1 = w;
  auto w2 = w;
  s.ger_acc(g.data(), x.data(), w1.data(), rows, cols);
  v.ger_acc(g.data(), x.data(), w2.data(), rows, cols);
  expect_close(w1, w2);
}

TEST_P(KernelEquivalence, AdamW) {
  const std::size_t n = GetParam();
  Rng rng = make_rng(200 + n);
  auto t1 = random_vector(n, rng);
  auto t2 = t1;
  const auto grad = random_vector(n, rng);
  std::vector<double> m1(n, 0.1), m2(n, 0.1), v1(n, 0.2), v2(n, 0.2);
  for (int step = 1; step <= 3; ++step) {
    const double b1 = 1.0 - std::pow(0.9, step);
    const double b2 = 1.0 - std::pow(0.999, step);
    s.adamw(t1.data(), grad.data(), m1.data(), v1.data(), n, 1e-3, 1 - 1e-6, 0.9, 0.999, b1, b2, 1e-8);
    v.adamw(t2.data(), grad.data(), m2.data(), v2.data(), n, 1e-3, 1 - 1e-6, 0.9, 0.999, b1, b2, 1e-8);
  }
  expect_close(t1, t2);
  expect_close(m1, m2);
  expect_close(v1, v2);
}

// Sizes straddle the 4-wide and 8-wide unrolled loops and their tails.
INSTANTIATE_TEST_SUITE_P(Sizes, KernelEquivalence,
                         ::testing::Values(1, 3, 4, 5, 7, 8, 9, 15, 16, 17, 64, 129));

TEST(KernelDispatch, ScalarAlwaysAvailable) {
  EXPECT_TRUE(kernels::isa_supported(Isa::Scalar));
  const Isa before = kernels::active_isa();
  kernels::set_active_isa(Isa::Scalar);
  EXPECT_EQ(kernels::active().isa, Isa::Scalar);
  kernels::set_active_isa(before);
}

TEST(KernelDispatch, ParseNames) {
  EXPECT_EQ(kernels::parse_isa("scalar"), Isa::Scalar);
  EXPECT_EQ(kernels::parse_isa("auto"), kernels::best_isa());
  EXPECT_EQ(kernels::isa_name(Isa::Avx2), "avx2");
  try {
    kernels::parse_isa("neon");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UsageError);
  }
}

TEST(KernelDispatch, SpanWrappersFollowActiveTable) {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{4, 5, 6};
  EXPECT_DOUBLE_EQ(kernels::dot(a, b), 32.0);
}

}  // namespace
}  // namespace cvr
