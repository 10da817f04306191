#include "plateprice/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace plateprice {

bool Matrix::all_finite() const {
  return std::all_of(data.begin(), data.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw DataError("matmul: dimension mismatch, lhs is " +
                    std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                    ", rhs is " + std::to_string(b.rows) + "x" +
                    std::to_string(b.cols));
  }
  Matrix c(a.rows, b.cols);
  emap(c).noalias() = emap(a) * emap(b);
  return c;
}

Matrix relu(const Matrix& x) {
  Matrix y(x.rows, x.cols);
  emap(y) = emap(x).cwiseMax(0.0);
  return y;
}

double global_norm(const std::vector<const Matrix*>& grads) {
  double sq = 0.0;
  for (const Matrix* g : grads) sq += emap(*g).squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(const std::vector<Matrix*>& grads, double threshold,
                        const std::vector<std::string>& names) {
  double sq = 0.0;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const double block = emap(*grads[k]).squaredNorm();
    if (!std::isfinite(block)) {
      const std::string label =
          k < names.size() ? names[k] : "block " + std::to_string(k);
      throw NumericError("clip_global_norm: non-finite gradient in " + label);
    }
    sq += block;
  }
  const double norm = std::sqrt(sq);
  // the tiny slack keeps re-clipping an already clipped set an exact no-op
  if (norm <= threshold * (1.0 + 1e-12) || norm == 0.0) return 1.0;
  const double scale = threshold / norm;
  for (Matrix* g : grads) emap(*g) *= scale;
  return scale;
}

std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h) {
  std::vector<double> grad(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_gradient: non-finite value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t SeededRng::next() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double SeededRng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double SeededRng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller on (0,1] uniforms so log() never sees zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
  // Lemire's multiply-and-reject, bias-free.
  std::uint64_t x = next();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < bound) {
    const std::uint64_t floor = (0 - bound) % bound;
    while (lo < floor) {
      x = next();
      m = static_cast<unsigned __int128>(x) * bound;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace plateprice
