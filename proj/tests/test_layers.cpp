#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mvr/layers.hpp"
#include "testutil.hpp"

using namespace mvr;
using testutil::finite_diff;
using testutil::grad_rel_err;
using testutil::random_matrix;
using testutil::weighted_sum;

// ---------------------------------------------------------------------------
// fully connected
// ---------------------------------------------------------------------------

TEST_CASE("fc_forward identity weights is the identity map") {
  auto x = DenseMatrix::from_rows({{1.5, -2.0}, {0.0, 3.25}});
  DenseMatrix b(1, 2);
  auto r = fc_forward(x, DenseMatrix::identity(2), b, Activation::linear);
  for (std::size_t i = 0; i < x.values.size(); ++i) CHECK(r.y.values[i] == x.values[i]);
}

TEST_CASE("fc_forward relu clips the biased negative unit") {
  auto x = DenseMatrix::from_rows({{1.0, -2.0}});
  auto b = DenseMatrix::from_rows({{0.0, 1.0}});
  auto r = fc_forward(x, DenseMatrix::identity(2), b, Activation::relu);
  CHECK(r.y.at(0, 0) == 1.0);
  CHECK(r.y.at(0, 1) == 0.0);  // -2 + 1 = -1, clipped
}

TEST_CASE("fc_forward rejects shape mismatches") {
  DenseMatrix x(2, 3), w(4, 5), b(1, 5);
  CHECK_THROWS_AS(fc_forward(x, w, b, Activation::linear), std::invalid_argument);
  DenseMatrix w2(3, 5), bad_b(1, 4);
  CHECK_THROWS_AS(fc_forward(x, w2, bad_b, Activation::linear), std::invalid_argument);
}

TEST_CASE("fc_backward zero upstream gives zero gradients") {
  RngStream rng(1);
  auto x = random_matrix(3, 4, rng);
  auto w = random_matrix(4, 2, rng);
  auto b = random_matrix(1, 2, rng);
  auto r = fc_forward(x, w, b, Activation::relu);
  DenseMatrix dy(3, 2);
  auto g = fc_backward(dy, r.cache);
  for (double v : g.dx.values) CHECK(v == 0.0);
  for (double v : g.dw.values) CHECK(v == 0.0);
  for (double v : g.db.values) CHECK(v == 0.0);
}

TEST_CASE("fc_backward scalar layer hand case") {
  // y = w*x + b with x=2, w=5, b=1, dY=1 (linear)
  auto x = DenseMatrix::from_rows({{2.0}});
  auto w = DenseMatrix::from_rows({{5.0}});
  auto b = DenseMatrix::from_rows({{1.0}});
  auto r = fc_forward(x, w, b, Activation::linear);
  REQUIRE(r.y.at(0, 0) == 11.0);
  auto dy = DenseMatrix::from_rows({{1.0}});
  auto g = fc_backward(dy, r.cache);
  CHECK(g.dw.at(0, 0) == 2.0);
  CHECK(g.db.at(0, 0) == 1.0);
  CHECK(g.dx.at(0, 0) == 5.0);
}

namespace {

// Random fc case whose preactivations stay away from the ReLU kink so the
// finite-difference probe never crosses it.
struct FcCase {
  DenseMatrix x, w, b, up;
};

FcCase away_from_kink(int batch, int din, int dout, RngStream& rng) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    FcCase c{random_matrix(batch, din, rng), random_matrix(din, dout, rng),
             random_matrix(1, dout, rng), random_matrix(batch, dout, rng)};
    auto pre = fc_forward(c.x, c.w, c.b, Activation::linear).y;
    bool ok = true;
    for (double v : pre.values)
      if (std::abs(v) < 1e-2) ok = false;
    if (ok) return c;
  }
  throw std::runtime_error("could not sample a kink-free fc case");
}

}  // namespace

TEST_CASE("fc_backward matches finite differences on a random 4x3 case") {
  RngStream rng(77);
  for (Activation act : {Activation::linear, Activation::relu}) {
    FcCase c = away_from_kink(4, 3, 2, rng);
    auto loss = [&]() { return weighted_sum(fc_forward(c.x, c.w, c.b, act).y, c.up); };
    auto r = fc_forward(c.x, c.w, c.b, act);
    auto g = fc_backward(c.up, r.cache);
    CHECK(grad_rel_err(g.dx, finite_diff(loss, c.x)) < 1e-6);
    CHECK(grad_rel_err(g.dw, finite_diff(loss, c.w)) < 1e-6);
    CHECK(grad_rel_err(g.db, finite_diff(loss, c.b)) < 1e-6);
  }
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

TEST_CASE("batchnorm train mode normalizes each column") {
  RngStream rng(2);
  auto x = random_matrix(16, 5, rng, 3.0);
  DenseMatrix gamma(1, 5, 1.0), beta(1, 5, 0.0);
  DenseMatrix rm(1, 5, 0.0), rv(1, 5, 1.0);
  auto r = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.9, 1e-12);
  for (int j = 0; j < 5; ++j) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 16; ++i) mean += r.y.at(i, j);
    mean /= 16;
    for (int i = 0; i < 16; ++i) var += (r.y.at(i, j) - mean) * (r.y.at(i, j) - mean);
    var /= 16;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("batchnorm column [1,3] maps to [-1,1]") {
  auto x = DenseMatrix::from_rows({{1.0}, {3.0}});
  DenseMatrix gamma(1, 1, 1.0), beta(1, 1, 0.0), rm(1, 1, 0.0), rv(1, 1, 1.0);
  auto r = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.9, 1e-15);
  CHECK(r.y.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(r.y.at(1, 0) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("batchnorm infer with neutral running stats is the identity") {
  RngStream rng(3);
  auto x = random_matrix(4, 3, rng);
  DenseMatrix gamma(1, 3, 1.0), beta(1, 3, 0.0), rm(1, 3, 0.0), rv(1, 3, 1.0);
  auto r = batchnorm_forward(x, gamma, beta, rm, rv, Mode::infer, 0.9, 0.0);
  for (std::size_t i = 0; i < x.values.size(); ++i)
    CHECK(r.y.values[i] == doctest::Approx(x.values[i]).epsilon(1e-12));
}

TEST_CASE("batchnorm train rejects batches smaller than 2") {
  DenseMatrix x(1, 3, 1.0);
  DenseMatrix gamma(1, 3, 1.0), beta(1, 3), rm(1, 3), rv(1, 3, 1.0);
  CHECK_THROWS_AS(batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.9, 1e-5),
                  std::invalid_argument);
  CHECK_NOTHROW(batchnorm_forward(x, gamma, beta, rm, rv, Mode::infer, 0.9, 1e-5));
}

TEST_CASE("batchnorm running stats move by exponential average") {
  // column [1,3]: batch mean 2, population variance 1
  auto x = DenseMatrix::from_rows({{1.0}, {3.0}});
  DenseMatrix gamma(1, 1, 1.0), beta(1, 1), rm(1, 1, 0.0), rv(1, 1, 4.0);
  auto r = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.9, 1e-5);
  CHECK(r.cache.new_running_mean.at(0, 0) == doctest::Approx(0.9 * 0.0 + 0.1 * 2.0));
  CHECK(r.cache.new_running_var.at(0, 0) == doctest::Approx(0.9 * 4.0 + 0.1 * 1.0));
  // inputs are not mutated
  CHECK(rm.at(0, 0) == 0.0);
  CHECK(rv.at(0, 0) == 4.0);
}

TEST_CASE("batchnorm backward matches finite differences (train and infer)") {
  RngStream rng(41);
  for (Mode mode : {Mode::train, Mode::infer}) {
    auto x = random_matrix(6, 4, rng, 2.0);
    auto gamma = random_matrix(1, 4, rng);
    auto beta = random_matrix(1, 4, rng);
    DenseMatrix rm = random_matrix(1, 4, rng);
    DenseMatrix rv(1, 4);
    for (double& v : rv.values) v = 0.5 + rng.next_double();  // keep variance positive
    auto up = random_matrix(6, 4, rng);

    auto loss = [&]() {
      return weighted_sum(
          batchnorm_forward(x, gamma, beta, rm, rv, mode, 0.9, 1e-5).y, up);
    };
    auto r = batchnorm_forward(x, gamma, beta, rm, rv, mode, 0.9, 1e-5);
    auto g = batchnorm_backward(up, r.cache);
    CHECK(grad_rel_err(g.dx, finite_diff(loss, x)) < 1e-5);
    CHECK(grad_rel_err(g.dgamma, finite_diff(loss, gamma)) < 1e-5);
    CHECK(grad_rel_err(g.dbeta, finite_diff(loss, beta)) < 1e-5);
  }
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

TEST_CASE("dropout p=0 and infer mode are identities") {
  RngStream rng(4);
  auto x = random_matrix(3, 3, rng);
  auto r0 = dropout_forward(x, 0.0, Mode::train, rng);
  for (std::size_t i = 0; i < x.values.size(); ++i) CHECK(r0.y.values[i] == x.values[i]);
  auto ri = dropout_forward(x, 0.9, Mode::infer, rng);
  for (std::size_t i = 0; i < x.values.size(); ++i) CHECK(ri.y.values[i] == x.values[i]);
}

TEST_CASE("dropout rejects p outside [0,1)") {
  RngStream rng(5);
  DenseMatrix x(2, 2, 1.0);
  CHECK_THROWS_AS(dropout_forward(x, 1.0, Mode::train, rng), std::invalid_argument);
  CHECK_THROWS_AS(dropout_forward(x, -0.1, Mode::train, rng), std::invalid_argument);
}

TEST_CASE("dropout mask entries are 0 or 1/(1-p) and backward applies them") {
  RngStream rng(6);
  DenseMatrix x(8, 8, 1.0);
  auto r = dropout_forward(x, 0.25, Mode::train, rng);
  int kept = 0;
  for (double m : r.mask.values) {
    bool valid = m == 0.0 || m == doctest::Approx(1.0 / 0.75).epsilon(1e-12);
    CHECK(valid);
    if (m != 0.0) ++kept;
  }
  CHECK(kept > 20);  // p=0.25 over 64 entries: zero kept is impossible in practice
  auto dy = testutil::random_matrix(8, 8, rng);
  auto dx = dropout_backward(dy, r.mask);
  for (std::size_t i = 0; i < dy.values.size(); ++i)
    CHECK(dx.values[i] == dy.values[i] * r.mask.values[i]);
}

TEST_CASE("dropout preserves the mean over repeated draws") {
  RngStream rng(8);
  DenseMatrix x(1, 1, 2.0);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += dropout_forward(x, 0.5, Mode::train, rng).y.at(0, 0);
  // each draw is 0 or 4 with p=1/2: mean 2, sd 2
  const double se = 2.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum / n - 2.0) < 3.0 * se);
}
