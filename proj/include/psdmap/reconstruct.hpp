#pragma once

// Reconstruction engines run at the fusion center for one group of sensors:
// per-sensor BPDN, joint (common + innovation) recovery, innovation-only
// recovery with a known common part, and the same with destructive-filter
// compensation. Also the optimal common-part extraction.

#include "psdmap/numcore.hpp"
#include "psdmap/solvers.hpp"
#include "psdmap/sparsity.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace psdmap {

/// What the fusion center holds for one group and one snapshot.
struct GroupMeasurements {
  std::vector<Vector> received;  // r_j
  std::vector<Matrix> phis;      // Phi_j
  std::vector<Vector> pilots;    // r_cj; empty when no pilots were sent

  std::size_t sensors() const noexcept { return received.size(); }
  std::vector<std::size_t> lengths() const;
  /// r = [r_1; ...; r_J]
  Vector stacked() const;
  void validate() const;
};

/// Edge vector of the common part shared by the FC and the group's sensors
/// over a holding period of snapshots [valid_from, valid_until).
struct CommonKnowledge {
  Vector common_edges;
  std::size_t valid_from = 0;
  std::size_t valid_until = std::numeric_limits<std::size_t>::max();

  bool valid_for(std::size_t snapshot) const noexcept {
    return snapshot >= valid_from && snapshot < valid_until;
  }
};

struct CompensationSet {
  std::vector<Vector> filters;  // estimated beta_j
  Matrix block_diagonal;        // circulant(beta_j) on the diagonal
};

struct GroupReconstruction {
  std::vector<Vector> psds;
  SolveReport report;
};

enum class CommonMode {
  jsm,              // all coordinates penalized
  innovation_only,  // only the innovation blocks penalized
};

struct OptimalCommon {
  Vector common_edges;
  std::vector<Vector> innovation_edges;
  SolveReport report;
};

enum class CompensatedForm {
  known_common,  // B * H on the innovations, common part removed
  full_jsm,      // B * Psi on the whole stacked unknown
};

GroupReconstruction reconstruct_individual(const Vector& received, const Matrix& phi, const Matrix& dictionary,
                                           const BpdnOptions& opts);

GroupReconstruction reconstruct_jsm(const GroupMeasurements& gm, const Matrix& dictionary,
                                    const BpdnOptions& opts);

OptimalCommon optimal_common(std::span<const Vector> psds, CommonMode mode,
                             const L1EqualityOptions& opts = {});

GroupReconstruction reconstruct_known_common(const GroupMeasurements& gm, const CommonKnowledge& ck,
                                             const Matrix& dictionary, const BpdnOptions& opts);

/// Pilot-based estimate of every sensor's filter. support, when non-empty,
/// restricts the fit to those tap indices.
CompensationSet estimate_filters(const GroupMeasurements& gm, const CommonKnowledge& ck, const Matrix& dictionary,
                                 double ridge, std::span<const std::size_t> support = {});

/// Compensation set from known filters (used for oracle runs and tests).
CompensationSet compensation_from_filters(std::vector<Vector> filters);

GroupReconstruction reconstruct_compensated(const GroupMeasurements& gm, const CommonKnowledge& ck,
                                            const CompensationSet& comp, const Matrix& dictionary,
                                            const BpdnOptions& opts,
                                            CompensatedForm form = CompensatedForm::known_common);

}  // namespace psdmap
