#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mousse/subset_model.hpp"

namespace mousse {

// Basis update rules. GROUSE rotates U along the Grassmannian gradient;
// PETRELS runs a per-row recursive least-squares fit and then restores
// orthonormality either by Gram-Schmidt (GS) or by the polar factor (FO).
struct Grouse {
  double eta0 = 0.5;
};
struct PetrelsGs {
  double alpha = 0.9;
};
struct PetrelsFo {
  double alpha = 0.9;
};
using TrackerKind = std::variant<Grouse, PetrelsGs, PetrelsFo>;

inline constexpr double kPetrelsInitialGain = 1e3;

/// Per-row inverse correlation matrices (R_m)^# for one tree node.
struct PetrelsState {
  std::vector<Eigen::MatrixXd> r_inv;  // D entries, each d x d
  NodeId node{};

  static PetrelsState fresh(Eigen::Index ambient_dim, Eigen::Index intrinsic_dim, NodeId node,
                            double gain = kPetrelsInitialGain);
};

// One GROUSE step on `basis` (in place). `pr` must be the projection of `obs`
// onto (basis, center). Returns false when the step is skipped (zero beta,
// zero residual, or zero step size).
bool grouse_step(Eigen::MatrixXd& basis, const Observation& obs, const ProjectionResult& pr,
                 double eta0);

// One PETRELS step (in place) without orthonormalization. Rows outside Omega
// keep their value; every (R_m)^# is discounted by 1/alpha and rows in Omega
// also receive the rank-one correction.
void petrels_step(Eigen::MatrixXd& basis, PetrelsState& state, const Observation& obs,
                  const ProjectionResult& pr, double alpha);

// Modified Gram-Schmidt, columns in input order. Throws RankDeficient if a
// column norm collapses below 1e-12.
Eigen::MatrixXd orthonormalize_gs(const Eigen::MatrixXd& basis);

// U (U'U)^{-1/2}: the orthonormal matrix nearest to U in Frobenius norm.
// Throws RankDeficient if U'U is numerically singular.
Eigen::MatrixXd orthonormalize_fo(const Eigen::MatrixXd& basis);

// Dispatches to the configured rule and leaves node.basis orthonormal.
// `step_weight` in (0,1] scales the step (1 for update-nearest).
void update_basis(SubsetNode& node, PetrelsState* state, const Observation& obs,
                  const ProjectionResult& pr, const TrackerKind& kind, double step_weight = 1.0);

bool uses_petrels(const TrackerKind& kind);

}  // namespace mousse
