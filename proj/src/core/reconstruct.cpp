#include "psdmap/reconstruct.hpp"

namespace psdmap {

std::vector<std::size_t> GroupMeasurements::lengths() const {
  std::vector<std::size_t> out;
  for (const Vector& r : received) out.push_back(static_cast<std::size_t>(r.size()));
  return out;
}

Vector GroupMeasurements::stacked() const { return stack_vectors(received); }

void GroupMeasurements::validate() const {
  if (received.empty()) throw Error("group measurements: no sensors");
  if (phis.size() != received.size()) throw Error("group measurements: one measurement matrix per sensor required");
  for (std::size_t j = 0; j < received.size(); ++j)
    if (phis[j].rows() != received[j].size())
      throw Error("group measurements: sensor " + std::to_string(j) + " has " + std::to_string(received[j].size()) +
                  " samples but its matrix has " + std::to_string(phis[j].rows()) + " rows");
  if (!pilots.empty()) {
    if (pilots.size() != received.size()) throw Error("group measurements: one pilot per sensor required");
    for (std::size_t j = 0; j < pilots.size(); ++j)
      if (pilots[j].size() != received[j].size())
        throw Error("group measurements: pilot length mismatch for sensor " + std::to_string(j));
  }
}

namespace {

std::vector<Vector> psds_from_split(const Vector& common, const std::vector<Vector>& innovations) {
  std::vector<Vector> out;
  for (const Vector& inn : innovations) out.push_back(psd_from_edges(common + inn));
  return out;
}

void check_common(const CommonKnowledge& ck, const Matrix& dictionary) {
  if (ck.common_edges.size() != dictionary.cols())
    throw Error("common knowledge: edge vector length " + std::to_string(ck.common_edges.size()) +
                " does not match dictionary size " + std::to_string(dictionary.cols()));
}

// Shared path of the known-common engines: remove the common contribution,
// solve for the stacked innovations, then add the common part back.
GroupReconstruction solve_innovations(const Matrix& common_block, const Matrix& innovation_block,
                                      const Vector& r, const Vector& common_edges, std::size_t n,
                                      const BpdnOptions& opts) {
  const Vector r_inn = r - common_block * common_edges;
  GroupReconstruction out;
  out.report = bpdn(innovation_block, r_inn, opts);
  out.psds = psds_from_split(common_edges, split_blocks(out.report.solution, n));
  return out;
}

}  // namespace

GroupReconstruction reconstruct_individual(const Vector& received, const Matrix& phi, const Matrix& dictionary,
                                           const BpdnOptions& opts) {
  if (phi.rows() != received.size()) throw Error("reconstruct_individual: measurement length mismatch");
  GroupReconstruction out;
  out.report = bpdn(phi * dictionary, received, opts);
  out.psds.push_back(psd_from_edges(out.report.solution));
  return out;
}

GroupReconstruction reconstruct_jsm(const GroupMeasurements& gm, const Matrix& dictionary,
                                    const BpdnOptions& opts) {
  gm.validate();
  const StackedSystem sys = assemble_stacked(gm.phis, dictionary);
  GroupReconstruction out;
  out.report = bpdn(sys.psi, gm.stacked(), opts);
  auto blocks = split_blocks(out.report.solution, sys.signal_length);
  const Vector common = blocks.front();
  blocks.erase(blocks.begin());
  out.psds = psds_from_split(common, blocks);
  return out;
}

OptimalCommon optimal_common(std::span<const Vector> psds, CommonMode mode, const L1EqualityOptions& opts) {
  if (psds.empty()) throw Error("optimal_common: empty group");
  const auto n = static_cast<std::size_t>(psds.front().size());
  for (const Vector& s : psds)
    if (static_cast<std::size_t>(s.size()) != n) throw Error("optimal_common: PSD length mismatch");
  const Matrix gbar = assemble_gbar(psds.size(), n);
  const Vector s_all = stack_vectors(psds);
  Vector weights = Vector::Ones(gbar.cols());
  if (mode == CommonMode::innovation_only) weights.head(static_cast<Eigen::Index>(n)).setZero();

  // Same feasible set with every block row multiplied by the difference
  // operator: the system becomes 0/1 valued and far better conditioned.
  const Matrix gamma = diff_operator(n);
  std::vector<Matrix> gammas(psds.size(), gamma);
  const Matrix rows = block_diagonal(gammas);

  OptimalCommon out;
  out.report = min_l1_equality(rows * gbar, rows * s_all, weights, opts);
  out.report.feasibility_residual = (gbar * out.report.solution - s_all).norm();
  if (out.report.feasibility_residual > opts.feas_tol * (1.0 + s_all.norm()))
    throw Error("optimal_common: equality system not satisfied to tolerance (residual " +
                std::to_string(out.report.feasibility_residual) + ")");
  auto blocks = split_blocks(out.report.solution, n);
  out.common_edges = blocks.front();
  out.innovation_edges.assign(blocks.begin() + 1, blocks.end());
  return out;
}

GroupReconstruction reconstruct_known_common(const GroupMeasurements& gm, const CommonKnowledge& ck,
                                             const Matrix& dictionary, const BpdnOptions& opts) {
  gm.validate();
  check_common(ck, dictionary);
  const StackedSystem sys = assemble_stacked(gm.phis, dictionary);
  return solve_innovations(sys.common_block(), sys.innovation_block(), gm.stacked(), ck.common_edges,
                           sys.signal_length, opts);
}

CompensationSet compensation_from_filters(std::vector<Vector> filters) {
  CompensationSet comp;
  std::vector<Matrix> blocks;
  for (const Vector& f : filters) blocks.push_back(circulant_from_vector(f));
  comp.block_diagonal = block_diagonal(blocks);
  comp.filters = std::move(filters);
  return comp;
}

CompensationSet estimate_filters(const GroupMeasurements& gm, const CommonKnowledge& ck, const Matrix& dictionary,
                                 double ridge, std::span<const std::size_t> support) {
  gm.validate();
  check_common(ck, dictionary);
  if (gm.pilots.empty()) throw Error("estimate_filters: no pilots received");
  std::vector<Vector> filters;
  for (std::size_t j = 0; j < gm.sensors(); ++j) {
    // The FC knows z_c and Phi_j, so it can rebuild the pilot that was sent.
    const Vector sent = gm.phis[j] * (dictionary * ck.common_edges);
    const Matrix pilot_circulant = circulant_from_vector(sent);
    filters.push_back(support.empty() ? fit_filter(pilot_circulant, gm.pilots[j], ridge)
                                      : fit_filter_on_support(pilot_circulant, gm.pilots[j], support, ridge));
  }
  return compensation_from_filters(std::move(filters));
}

GroupReconstruction reconstruct_compensated(const GroupMeasurements& gm, const CommonKnowledge& ck,
                                            const CompensationSet& comp, const Matrix& dictionary,
                                            const BpdnOptions& opts, CompensatedForm form) {
  gm.validate();
  check_common(ck, dictionary);
  const StackedSystem sys = assemble_stacked(gm.phis, dictionary);
  const auto w = static_cast<Eigen::Index>(sys.total_rows());
  if (comp.block_diagonal.rows() != w || comp.block_diagonal.cols() != w)
    throw Error("reconstruct_compensated: compensation matrix is " + std::to_string(comp.block_diagonal.rows()) +
                "x" + std::to_string(comp.block_diagonal.cols()) + ", expected " + std::to_string(w) + "x" +
                std::to_string(w));
  if (form == CompensatedForm::full_jsm) {
    GroupReconstruction out;
    out.report = bpdn(comp.block_diagonal * sys.psi, gm.stacked(), opts);
    auto blocks = split_blocks(out.report.solution, sys.signal_length);
    const Vector common = blocks.front();
    blocks.erase(blocks.begin());
    out.psds = psds_from_split(common, blocks);
    return out;
  }
  return solve_innovations(comp.block_diagonal * sys.common_block(), comp.block_diagonal * sys.innovation_block(),
                           gm.stacked(), ck.common_edges, sys.signal_length, opts);
}

}  // namespace psdmap
