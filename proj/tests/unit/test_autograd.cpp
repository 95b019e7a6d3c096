#include <omp.h>

#include <cmath>

#include "doctest.h"
#include "../support/primitive_cases.hpp"
#include "timedrl/error.hpp"
#include "timedrl/kernels.hpp"

using namespace timedrl;
using testutil::randn;

TEST_CASE("every primitive matches central differences") {
  for (const auto& c : testutil::primitive_cases()) {
    CAPTURE(c.name);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) CHECK(testutil::primitive_max_error(c, seed) < 1e-6);
  }
}

TEST_CASE("reused leaf accumulates gradient from both uses") {
  Tensor<double> x({3}, {1.0, -2.0, 0.5}, true);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(sum(mul(x, x)));
  }
  const auto g = x.grad();
  CHECK(g[0] == 2.0);
  CHECK(g[1] == -4.0);
  CHECK(g[2] == 1.0);
}

TEST_CASE("tape rejects non-scalar loss, double backward and backward after clear") {
  Tensor<double> x({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  Tensor<double> y = scale(x, 2.0);
  try {
    tape.backward(y);
    FAIL("non-scalar loss should throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonScalarLoss);
  }

  Tensor<double> loss = sum(y);
  tape.backward(loss);
  try {
    tape.backward(loss);
    FAIL("second backward should throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StaleTape);
  }

  tape.clear();
  try {
    tape.backward(loss);
    FAIL("backward after clear should throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StaleTape);
  }
}

TEST_CASE("no-grad scope records nothing") {
  Tensor<double> x({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  {
    NoGradScope<double> off;
    Tensor<double> y = sum(mul(x, x));
    (void)y;
  }
  CHECK(tape.size() == 0);
  Tensor<double> z = sum(x);
  (void)z;
  CHECK(tape.size() == 1);
}

TEST_CASE("zero grad into an input reached only through detach") {
  Tensor<double> x({3}, {0.3, -0.1, 2.0}, true);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(sum(mul(detach(x), detach(x))));
  }
  CHECK_FALSE(x.has_grad());
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("shape errors are reported") {
  Tensor<double> a = Tensor<double>::zeros({2, 3});
  Tensor<double> b = Tensor<double>::zeros({3, 2});
  try {
    add(a, b);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("softmax and layer norm stay finite on extreme inputs") {
  Tensor<double> x({1, 4}, {1000.0, -1000.0, 999.0, 0.0});
  for (double v : softmax(x, 1).values()) CHECK(std::isfinite(v));
  Tensor<double> c = Tensor<double>::full({2, 5}, 3.0);
  const auto y = layer_norm(c, Tensor<double>::full({5}, 1.0), Tensor<double>::zeros({5}));
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("dropout: identity at p=0 or eval, invalid p rejected") {
  RngStream rng(3);
  Tensor<double> x = Tensor<double>::full({4, 4}, 1.0);
  CHECK(dropout(x, 0.0, true, rng).id() == x.id());
  CHECK(dropout(x, 0.5, false, rng).id() == x.id());
  CHECK(rng.counter() == 0);
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), Error);
  CHECK_THROWS_AS(dropout(x, -0.1, true, rng), Error);
}

TEST_CASE("batch norm: degenerate batch and running statistics") {
  Tensor<double> g = Tensor<double>::full({2}, 1.0), b = Tensor<double>::zeros({2});
  auto stats = BatchNormStats::identity(2);
  try {
    batch_norm_1d(Tensor<double>::zeros({1, 2}), g, b, stats, true);
    FAIL("expected DegenerateBatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateBatch);
  }
  Tensor<double> x({2, 2}, {0.0, 1.0, 2.0, 5.0});
  batch_norm_1d(x, g, b, stats, true);
  // batch means (1, 3), unbiased variances (2, 8)
  CHECK(stats.running_mean[0] == doctest::Approx(0.1));
  CHECK(stats.running_mean[1] == doctest::Approx(0.3));
  CHECK(stats.running_var[0] == doctest::Approx(0.9 + 0.2));
  CHECK(stats.running_var[1] == doctest::Approx(0.9 + 0.8));
}

TEST_CASE("OpenMP kernels agree bitwise with the serial reference") {
  omp_set_num_threads(4);
  RngStream rng(11);
  const std::size_t batch = 3, m = 70, k = 33, n = 90;
  auto buf = [&](std::size_t len) {
    std::vector<double> v(len);
    for (double& x : v) x = rng.normal();
    return v;
  };
  const auto a = buf(batch * m * k), b = buf(batch * k * n), bt = buf(batch * n * k), at = buf(batch * k * m);
  std::vector<double> c1(batch * m * n), c2(batch * m * n);
  kernels::serial::gemm_nn(batch, m, k, n, a.data(), m * k, b.data(), k * n, c1.data(), m * n, false);
  kernels::parallel::gemm_nn(batch, m, k, n, a.data(), m * k, b.data(), k * n, c2.data(), m * n, false);
  CHECK(c1 == c2);
  kernels::serial::gemm_nt(batch, m, k, n, a.data(), m * k, bt.data(), n * k, c1.data(), m * n, true);
  kernels::parallel::gemm_nt(batch, m, k, n, a.data(), m * k, bt.data(), n * k, c2.data(), m * n, true);
  CHECK(c1 == c2);
  kernels::serial::gemm_tn(batch, m, k, n, at.data(), k * m, b.data(), 0, c1.data(), m * n, false);
  kernels::parallel::gemm_tn(batch, m, k, n, at.data(), k * m, b.data(), 0, c2.data(), m * n, false);
  CHECK(c1 == c2);

  const std::size_t rows = 5000, width = 24;
  const auto x = buf(rows * width), gamma = buf(width), beta = buf(width);
  std::vector<double> y1(rows * width), y2(rows * width), m1(rows), m2(rows), r1(rows), r2(rows);
  kernels::serial::softmax_rows(rows, width, x.data(), y1.data());
  kernels::parallel::softmax_rows(rows, width, x.data(), y2.data());
  CHECK(y1 == y2);
  kernels::serial::layer_norm_rows(rows, width, x.data(), gamma.data(), beta.data(), 1e-5, y1.data(), m1.data(),
                                   r1.data());
  kernels::parallel::layer_norm_rows(rows, width, x.data(), gamma.data(), beta.data(), 1e-5, y2.data(), m2.data(),
                                     r2.data());
  CHECK(y1 == y2);
  CHECK(r1 == r2);
}

TEST_CASE("float precision gradients track double within float tolerance") {
  Tensor<float> x({2, 3}, {0.5f, -1.0f, 2.0f, 0.1f, 0.3f, -0.7f}, true);
  Tape<float> tape;
  {
    TapeScope<float> scope(tape);
    tape.backward(sum(gelu(x)));
  }
  const auto g = x.grad();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = x.data()[i];
    const double exact = 0.5 * (1 + std::erf(v / std::sqrt(2.0))) + v * std::exp(-v * v / 2) / std::sqrt(2 * M_PI);
    CHECK(std::abs(g[i] - exact) < 1e-5);
  }
}
