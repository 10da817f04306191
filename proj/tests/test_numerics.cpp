#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plateprice/numerics.hpp"

using namespace plateprice;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-2.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("matmul identity and hand-computed products") {
  SeededRng rng(7);
  const Matrix m = random_matrix(3, 5, rng);
  const Matrix im = matmul(Matrix::identity(3), m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(im.data[i] == doctest::Approx(m.data[i]).epsilon(1e-15));
  }

  const Matrix a = from_rows({{1, 2}, {3, 4}});
  const Matrix b = from_rows({{5}, {6}});
  const Matrix c = matmul(a, b);
  CHECK(c.rows == 2);
  CHECK(c.cols == 1);
  CHECK(c(0, 0) == doctest::Approx(17.0));
  CHECK(c(1, 0) == doctest::Approx(39.0));

  const Matrix z = matmul(Matrix(2, 3), random_matrix(3, 4, rng));
  CHECK(z.rows == 2);
  CHECK(z.cols == 4);
  for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
  const Matrix a(2, 3), b(4, 2);
  try {
    matmul(a, b);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random triples") {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(4, 6, rng);
    const Matrix b = random_matrix(6, 3, rng);
    const Matrix c = random_matrix(3, 5, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double scale = std::max({std::fabs(left.data[i]), std::fabs(right.data[i]), 1.0});
      CHECK(std::fabs(left.data[i] - right.data[i]) / scale <= 1e-9);
    }
  }
}

TEST_CASE("relu") {
  const Matrix x = from_rows({{-1, 0, 2}});
  const Matrix y = relu(x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == 2.0);

  const Matrix neg = from_rows({{-5, -0.1, -1e9}});
  for (double v : relu(neg).data) CHECK(v == 0.0);

  const Matrix pos = from_rows({{5, 0.1, 1e9}});
  const Matrix same = relu(pos);
  for (std::size_t i = 0; i < pos.size(); ++i) CHECK(same.data[i] == pos.data[i]);
}

TEST_CASE("clip_global_norm below threshold is identity") {
  Matrix g = from_rows({{6, 8}});  // norm 10
  const double scale = clip_global_norm({&g}, 15.0);
  CHECK(scale == 1.0);
  CHECK(g(0, 0) == 6.0);
  CHECK(g(0, 1) == 8.0);
}

TEST_CASE("clip_global_norm scales to the threshold exactly") {
  Matrix g = from_rows({{30, 40}});  // norm 50
  const double scale = clip_global_norm({&g}, 15.0);
  CHECK(scale == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(g(0, 0) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(g(0, 1) == doctest::Approx(12.0).epsilon(1e-14));
  CHECK(global_norm({&g}) == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("clip_global_norm leaves zero gradients alone") {
  Matrix g(3, 3);
  CHECK(clip_global_norm({&g}, 1e-3) == 1.0);
  for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("clip_global_norm is idempotent") {
  SeededRng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = random_matrix(4, 4, rng);
    Matrix b = random_matrix(2, 7, rng);
    emap(a) *= 10.0;
    clip_global_norm({&a, &b}, 5.0);
    const Matrix a1 = a, b1 = b;
    const double again = clip_global_norm({&a, &b}, 5.0);
    CHECK(again == 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == a1.data[i]);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.data[i] == b1.data[i]);
  }
}

TEST_CASE("clip_global_norm names the non-finite block") {
  Matrix ok(2, 2);
  Matrix bad = from_rows({{1.0, std::nan("")}});
  try {
    clip_global_norm({&ok, &bad}, 15.0, {"out.w", "rec1.u_fw"});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("rec1.u_fw") != std::string::npos);
  }
}

TEST_CASE("finite_diff_gradient matches analytic derivatives") {
  auto square = [](const std::vector<double>& x) { return x[0] * x[0]; };
  const auto g = finite_diff_gradient(square, {3.0}, 1e-5);
  CHECK(std::fabs(g[0] - 6.0) <= 1e-8);

  auto constant = [](const std::vector<double>&) { return 4.2; };
  for (double v : finite_diff_gradient(constant, {1, 2, 3}, 1e-5)) {
    CHECK(v == 0.0);
  }

  auto total = [](const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return s;
  };
  for (double v : finite_diff_gradient(total, {0.3, -2.0, 5.0}, 1e-5)) {
    CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("finite_diff_gradient reports the bad coordinate") {
  auto f = [](const std::vector<double>& x) { return std::log(x[1]); };
  try {
    finite_diff_gradient(f, {1.0, -1.0}, 1e-5);  // log of a negative -> nan
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("coordinate") != std::string::npos);
  }
}

TEST_CASE("equal seeds give equal draw sequences") {
  SeededRng a(123456789), b(123456789);
  for (int i = 0; i < 10000; ++i) REQUIRE(a.next() == b.next());

  SeededRng c(1), d(2);
  int differing = 0;
  for (int i = 0; i < 100; ++i) differing += c.next() != d.next();
  CHECK(differing > 90);
}

TEST_CASE("uniform and below stay in range") {
  SeededRng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const std::uint64_t k = rng.below(7);
    CHECK(k < 7);
  }
}

TEST_CASE("normal draws have roughly standard moments") {
  SeededRng rng(2024);
  double sum = 0, sq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.02);
  CHECK(std::fabs(sq / n - 1.0) < 0.02);
}

TEST_CASE("shuffle is deterministic per seed") {
  std::vector<int> v1(50), v2(50);
  for (int i = 0; i < 50; ++i) v1[i] = v2[i] = i;
  SeededRng a(5), b(5);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  CHECK(v1 != std::vector<int>(v1.size(), 0));
}
