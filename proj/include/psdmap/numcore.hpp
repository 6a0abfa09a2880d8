#pragma once

// Dense linear algebra, circulant helpers and the seeded random source shared
// by every other module. All scalars are double precision.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace psdmap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base error for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration. Carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Least-squares system whose normal equations are singular.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Deterministic pseudo-random source.
///
/// Bits come from xoshiro256** seeded through splitmix64. Uniforms take the
/// top 53 bits; Gaussians use the Box-Muller transform with the sine branch
/// cached. No standard-library distribution is involved, so a seed yields the
/// same draws on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Uniform on (0, 1].
  double uniform_open_closed() noexcept { return 1.0 - uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal.
  double gaussian() noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Child seed for an independent stream. The path identifies the stream
/// (e.g. {tag, snapshot, sensor}); the mapping is splitmix64 folded over the
/// path, so parallel workers obtain the same seeds regardless of scheduling.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path);

/// Entry (i, k) = v[(i - k) mod n]: column 0 is v, each next column is the
/// previous one cyclically shifted down by one.
Matrix circulant_from_vector(const Vector& v);

/// out[i] = sum_k x[k] * h[(i - k) mod n], by direct summation.
Vector circular_convolve(const Vector& x, const Vector& h);

/// i.i.d. N(0, 1/rows) entries drawn in row-major order.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, SeededRng& rng);

/// argmin ||A x - b||^2 + ridge ||x||^2. With ridge == 0 a rank-deficient A
/// raises RankDeficientError.
Vector solve_least_squares(const Matrix& a, const Vector& b, double ridge);

/// Upper bound on the squared spectral norm of m (power iteration on m^T m
/// with a safety margin). Returns 0 for a zero matrix.
double spectral_norm_sq_bound(const Matrix& m);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace psdmap
