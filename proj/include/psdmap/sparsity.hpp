#pragma once

// Edge-domain representation of piecewise-constant PSDs and the stacked
// joint-sparsity system matrices built from it.

#include "psdmap/numcore.hpp"

#include <span>
#include <vector>

namespace psdmap {

/// Cumulative-sum matrix G: lower triangular with ones.
Matrix cumsum_matrix(std::size_t n);

/// First-difference operator, the exact inverse of G (z[0] = s[0]).
Matrix diff_operator(std::size_t n);

/// z = diff_operator * s, computed directly.
Vector edge_vector(const Vector& psd);

/// s = cumsum_matrix * z, computed directly.
Vector psd_from_edges(const Vector& edges);

/// Stacked measurement system of one group of J sensors.
///
/// The unknown is [z_c; z_inn_1; ...; z_inn_J]. Row block j holds Phi_j D in
/// the common column block and in innovation column block j.
struct StackedSystem {
  std::size_t signal_length = 0;  // N
  std::size_t sensors = 0;        // J
  std::vector<std::size_t> rows_per_sensor;
  std::vector<std::size_t> row_offsets;
  std::vector<Matrix> sensor_blocks;  // Phi_j D
  Matrix psi;

  std::size_t total_rows() const noexcept { return static_cast<std::size_t>(psi.rows()); }
  /// First N columns of psi.
  Matrix common_block() const;
  /// Remaining NJ columns of psi.
  Matrix innovation_block() const;
};

StackedSystem assemble_stacked(std::span<const Matrix> phis, const Matrix& dictionary);

/// NJ x N(J+1) matrix with the stacked layout and G in every block.
Matrix assemble_gbar(std::size_t sensors, std::size_t n);

/// Concatenates vectors in order.
Vector stack_vectors(std::span<const Vector> parts);

/// Splits a stacked [z_c; z_inn_1; ...] vector into its N-length blocks.
std::vector<Vector> split_blocks(const Vector& stacked, std::size_t n);

/// Block-diagonal matrix from square or rectangular blocks.
Matrix block_diagonal(std::span<const Matrix> blocks);

}  // namespace psdmap
