#include "psdmap/numcore.hpp"

#include <cmath>
#include <numbers>

namespace psdmap {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t SeededRng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) noexcept {
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double SeededRng::gaussian() noexcept {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform_open_closed();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = parent;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t p : path) {
    state = h ^ (p * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
    h = splitmix64(state);
  }
  return h;
}

Matrix circulant_from_vector(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw Error("circulant_from_vector: empty vector");
  Matrix c(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i) c(i, k) = v((i - k + n) % n);
  return c;
}

Vector circular_convolve(const Vector& x, const Vector& h) {
  if (x.size() != h.size())
    throw Error("circular_convolve: length mismatch (" + std::to_string(x.size()) + " vs " +
                std::to_string(h.size()) + ")");
  const Eigen::Index n = x.size();
  Vector out = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) acc += x(k) * h((i - k + n) % n);
    out(i) = acc;
  }
  return out;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  if (rows == 0 || cols == 0) throw Error("gaussian_matrix: zero dimension");
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = scale * rng.gaussian();
  return m;
}

Vector solve_least_squares(const Matrix& a, const Vector& b, double ridge) {
  if (a.rows() != b.size())
    throw Error("solve_least_squares: matrix has " + std::to_string(a.rows()) +
                " rows but right-hand side has " + std::to_string(b.size()));
  if (!(ridge >= 0.0)) throw Error("solve_least_squares: ridge must be non-negative");
  const Eigen::Index n = a.cols();
  if (ridge > 0.0) {
    Matrix aug(a.rows() + n, n);
    aug.topRows(a.rows()) = a;
    aug.bottomRows(n) = std::sqrt(ridge) * Matrix::Identity(n, n);
    Vector rhs = Vector::Zero(a.rows() + n);
    rhs.head(a.rows()) = b;
    return aug.colPivHouseholderQr().solve(rhs);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  if (qr.rank() < n)
    throw RankDeficientError("solve_least_squares: rank deficient system (rank " +
                             std::to_string(qr.rank()) + " < " + std::to_string(n) +
                             " unknowns); use a positive ridge");
  return qr.solve(b);
}

double spectral_norm_sq_bound(const Matrix& m) {
  const double frob_sq = m.squaredNorm();
  if (frob_sq == 0.0) return 0.0;
  Vector v = Vector::Ones(m.cols()) / std::sqrt(static_cast<double>(m.cols()));
  // Deterministic perturbation so v is not orthogonal to the top singular vector
  // for structured matrices.
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 1e-3 * std::sin(1.0 + static_cast<double>(i));
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vector w = m.transpose() * (m * v);
    const double next = w.norm();
    if (next == 0.0) break;
    v = w / next;
    const bool settled = std::abs(next - estimate) <= 1e-10 * next;
    estimate = next;
    if (settled) break;
  }
  return std::min(frob_sq, 1.01 * estimate + 1e-300);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace psdmap
