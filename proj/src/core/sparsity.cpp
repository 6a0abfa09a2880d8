#include "psdmap/sparsity.hpp"

namespace psdmap {

Matrix cumsum_matrix(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  Matrix g = Matrix::Zero(size, size);
  for (Eigen::Index i = 0; i < size; ++i)
    for (Eigen::Index k = 0; k <= i; ++k) g(i, k) = 1.0;
  return g;
}

Matrix diff_operator(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  Matrix d = Matrix::Zero(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    d(i, i) = 1.0;
    if (i > 0) d(i, i - 1) = -1.0;
  }
  return d;
}

Vector edge_vector(const Vector& psd) {
  Vector z(psd.size());
  for (Eigen::Index i = 0; i < psd.size(); ++i) z(i) = i == 0 ? psd(0) : psd(i) - psd(i - 1);
  return z;
}

Vector psd_from_edges(const Vector& edges) {
  Vector s(edges.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < edges.size(); ++i) {
    acc += edges(i);
    s(i) = acc;
  }
  return s;
}

Matrix StackedSystem::common_block() const {
  return psi.leftCols(static_cast<Eigen::Index>(signal_length));
}

Matrix StackedSystem::innovation_block() const {
  return psi.rightCols(static_cast<Eigen::Index>(signal_length * sensors));
}

StackedSystem assemble_stacked(std::span<const Matrix> phis, const Matrix& dictionary) {
  if (phis.empty()) throw Error("assemble_stacked: no measurement matrices");
  if (dictionary.rows() != dictionary.cols())
    throw Error("assemble_stacked: dictionary must be square");
  const Eigen::Index n = dictionary.rows();
  StackedSystem sys;
  sys.signal_length = static_cast<std::size_t>(n);
  sys.sensors = phis.size();
  std::size_t total = 0;
  for (std::size_t j = 0; j < phis.size(); ++j) {
    if (phis[j].cols() != n)
      throw Error("assemble_stacked: measurement matrix " + std::to_string(j) + " has " +
                  std::to_string(phis[j].cols()) + " columns, expected " + std::to_string(n));
    sys.row_offsets.push_back(total);
    sys.rows_per_sensor.push_back(static_cast<std::size_t>(phis[j].rows()));
    total += static_cast<std::size_t>(phis[j].rows());
    sys.sensor_blocks.push_back(phis[j] * dictionary);
  }
  const auto j_count = static_cast<Eigen::Index>(phis.size());
  sys.psi = Matrix::Zero(static_cast<Eigen::Index>(total), n * (j_count + 1));
  for (Eigen::Index j = 0; j < j_count; ++j) {
    const auto row = static_cast<Eigen::Index>(sys.row_offsets[j]);
    const Matrix& block = sys.sensor_blocks[j];
    sys.psi.block(row, 0, block.rows(), n) = block;
    sys.psi.block(row, n * (j + 1), block.rows(), n) = block;
  }
  return sys;
}

Matrix assemble_gbar(std::size_t sensors, std::size_t n) {
  if (sensors == 0) throw Error("assemble_gbar: need at least one sensor");
  const Matrix g = cumsum_matrix(n);
  const auto size = static_cast<Eigen::Index>(n);
  const auto j_count = static_cast<Eigen::Index>(sensors);
  Matrix gbar = Matrix::Zero(size * j_count, size * (j_count + 1));
  for (Eigen::Index j = 0; j < j_count; ++j) {
    gbar.block(j * size, 0, size, size) = g;
    gbar.block(j * size, size * (j + 1), size, size) = g;
  }
  return gbar;
}

Vector stack_vectors(std::span<const Vector> parts) {
  Eigen::Index total = 0;
  for (const Vector& p : parts) total += p.size();
  Vector out(total);
  Eigen::Index at = 0;
  for (const Vector& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

std::vector<Vector> split_blocks(const Vector& stacked, std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  if (size == 0 || stacked.size() % size != 0)
    throw Error("split_blocks: length " + std::to_string(stacked.size()) + " is not a multiple of " +
                std::to_string(n));
  std::vector<Vector> out;
  for (Eigen::Index at = 0; at < stacked.size(); at += size) out.emplace_back(stacked.segment(at, size));
  return out;
}

Matrix block_diagonal(std::span<const Matrix> blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const Matrix& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const Matrix& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

}  // namespace psdmap
