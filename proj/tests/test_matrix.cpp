#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mvr/dense_matrix.hpp"
#include "mvr/rng.hpp"
#include "testutil.hpp"

using namespace mvr;

TEST_CASE("matmul identity leaves the operand unchanged") {
  auto a = DenseMatrix::from_rows({{1.5, -2.0, 3.0}, {0.0, 4.0, 5.5}});
  auto out = matmul(DenseMatrix::identity(2), a);
  REQUIRE(out.same_shape(a));
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(out.values[i] == a.values[i]);
}

TEST_CASE("matmul 2x2 by 2x1") {
  auto a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  auto b = DenseMatrix::from_rows({{5}, {6}});
  auto out = matmul(a, b);
  REQUIRE(out.rows == 2);
  REQUIRE(out.cols == 1);
  CHECK(out.at(0, 0) == 17.0);
  CHECK(out.at(1, 0) == 39.0);
}

TEST_CASE("matmul zero annihilates") {
  DenseMatrix z(3, 2);
  auto a = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  auto out = matmul(z, a);
  for (double v : out.values) CHECK(v == 0.0);
}

TEST_CASE("matmul rejects mismatched inner dims, naming both shapes") {
  DenseMatrix a(2, 3), b(4, 2);
  try {
    matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("transpose round-trips") {
  RngStream rng(11);
  auto a = testutil::random_matrix(4, 7, rng);
  auto t = transpose(a);
  REQUIRE(t.rows == 7);
  REQUIRE(t.cols == 4);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) CHECK(t.at(j, i) == a.at(i, j));
  auto tt = transpose(t);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(tt.values[i] == a.values[i]);
}

TEST_CASE("pairwise_sq_dist zero diagonal for identical row sets") {
  RngStream rng(3);
  auto e = testutil::random_matrix(6, 5, rng, 2.0);
  auto d = pairwise_sq_dist(e, e);
  for (int i = 0; i < 6; ++i) CHECK(d.at(i, i) == 0.0);  // exactly, not approximately
}

TEST_CASE("pairwise_sq_dist 3-4-5 triangle") {
  auto u = DenseMatrix::from_rows({{0, 0}});
  auto v = DenseMatrix::from_rows({{3, 4}});
  CHECK(pairwise_sq_dist(u, v).at(0, 0) == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("pairwise_sq_dist symmetric under argument swap + transpose") {
  RngStream rng(7);
  auto a = testutil::random_matrix(4, 3, rng);
  auto b = testutil::random_matrix(5, 3, rng);
  auto d1 = pairwise_sq_dist(a, b);
  auto d2 = transpose(pairwise_sq_dist(b, a));
  REQUIRE(d1.same_shape(d2));
  for (std::size_t i = 0; i < d1.values.size(); ++i)
    CHECK(d1.values[i] == doctest::Approx(d2.values[i]).epsilon(1e-12));
}

TEST_CASE("pairwise_sq_dist never negative and matches direct loop") {
  RngStream rng(19);
  auto a = testutil::random_matrix(8, 6, rng, 3.0);
  auto b = testutil::random_matrix(7, 6, rng, 3.0);
  auto d = pairwise_sq_dist(a, b);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.rows; ++j) {
      CHECK(d.at(i, j) >= 0.0);
      CHECK(d.at(i, j) == doctest::Approx(sq_dist(a.row(i), b.row(j), 6)).epsilon(1e-10));
    }
}

TEST_CASE("pairwise_sq_dist rejects dim mismatch") {
  DenseMatrix a(2, 3), b(2, 4);
  CHECK_THROWS_AS(pairwise_sq_dist(a, b), std::invalid_argument);
}

TEST_CASE("elementwise helpers") {
  auto a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  auto b = DenseMatrix::from_rows({{10, 20}, {30, 40}});

  auto sum = a;
  add_inplace(sum, b);
  CHECK(sum.at(1, 1) == 44.0);

  auto ax = a;
  axpy_inplace(ax, 0.5, b);
  CHECK(ax.at(0, 1) == 12.0);

  auto sc = a;
  scale_inplace(sc, -2.0);
  CHECK(sc.at(1, 0) == -6.0);

  auto h = hadamard(a, b);
  CHECK(h.at(0, 0) == 10.0);
  CHECK(h.at(1, 1) == 160.0);

  DenseMatrix wrong(2, 3);
  CHECK_THROWS_AS(add_inplace(sum, wrong), std::invalid_argument);
  CHECK_THROWS_AS(hadamard(a, wrong), std::invalid_argument);
}

TEST_CASE("finiteness checks") {
  auto a = DenseMatrix::from_rows({{1, 2}});
  CHECK(all_finite(a));
  a.at(0, 1) = std::nan("");
  CHECK_FALSE(all_finite(a));
  try {
    check_finite(a, "loss gradient");
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("loss gradient") != std::string::npos);
  }
}

TEST_CASE("constructors and accessors") {
  DenseMatrix filled(2, 3, 7.5);
  CHECK(filled.size() == 6);
  for (double v : filled.values) CHECK(v == 7.5);
  CHECK(filled.shape_str() == "2x3");

  auto eye = DenseMatrix::identity(3);
  CHECK(eye.at(1, 1) == 1.0);
  CHECK(eye.at(0, 2) == 0.0);
}

TEST_CASE("gather_rows copies, repeats, and bounds-checks") {
  auto a = DenseMatrix::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
  auto g = gather_rows(a, {2, 0, 2});
  CHECK(g.rows == 3);
  CHECK(g.at(0, 0) == 5.0);
  CHECK(g.at(1, 1) == 2.0);
  CHECK(g.at(2, 0) == 5.0);
  CHECK(gather_rows(a, {}).rows == 0);
  CHECK_THROWS_AS(gather_rows(a, {3}), std::out_of_range);
  CHECK_THROWS_AS(gather_rows(a, {-1}), std::out_of_range);
}
