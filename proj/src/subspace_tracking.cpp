#include "mousse/subspace_tracking.hpp"

#include <cmath>

#include "mousse/errors.hpp"

namespace mousse {

namespace {

constexpr double kColumnCollapse = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

PetrelsState PetrelsState::fresh(Eigen::Index ambient_dim, Eigen::Index intrinsic_dim, NodeId node,
                                 double gain) {
  PetrelsState state;
  state.node = node;
  state.r_inv.assign(static_cast<std::size_t>(ambient_dim),
                     gain * Eigen::MatrixXd::Identity(intrinsic_dim, intrinsic_dim));
  return state;
}

bool grouse_step(Eigen::MatrixXd& basis, const Observation& obs, const ProjectionResult& pr,
                 double eta0) {
  const double beta_norm = pr.beta.norm();
  const double r_norm = pr.x_perp.norm();
  const double x_norm = obs.values.norm();
  if (!(beta_norm > 0.0) || !(r_norm > 0.0) || !(x_norm > 0.0) || !(eta0 > 0.0)) return false;

  const Eigen::VectorXd projected = basis * pr.beta;
  const double eta = eta0 / x_norm;
  const double xi = r_norm * projected.norm();
  const double angle = xi * eta;

  Eigen::VectorXd r = Eigen::VectorXd::Zero(basis.rows());
  for (Eigen::Index i = 0; i < obs.size(); ++i) r(obs.omega[static_cast<std::size_t>(i)]) = pr.x_perp(i);

  basis += ((std::cos(angle) - 1.0) / (beta_norm * beta_norm)) * projected * pr.beta.transpose() +
           (std::sin(angle) / (r_norm * beta_norm)) * r * pr.beta.transpose();
  return true;
}

void petrels_step(Eigen::MatrixXd& basis, PetrelsState& state, const Observation& obs,
                  const ProjectionResult& pr, double alpha) {
  const Eigen::VectorXd& a = pr.beta;
  const double discount = 1.0 / alpha;
  std::size_t next_obs = 0;
  for (Eigen::Index m = 0; m < basis.rows(); ++m) {
    Eigen::MatrixXd& p = state.r_inv[static_cast<std::size_t>(m)];
    p *= discount;
    if (next_obs >= obs.omega.size() || obs.omega[next_obs] != m) continue;

    // Sherman-Morrison for R <- alpha R + a a'.
    const Eigen::VectorXd pa = p * a;
    const double denom = 1.0 + a.dot(pa);
    p.noalias() -= (pa * pa.transpose()) / denom;
    p = 0.5 * (p + p.transpose());

    // x_perp(i) = x_m - c_m - a' U_m, the a-priori error of row m.
    const double err = pr.x_perp(static_cast<Eigen::Index>(next_obs));
    basis.row(m).noalias() += err * (p * a).transpose();
    ++next_obs;
  }
}

Eigen::MatrixXd orthonormalize_gs(const Eigen::MatrixXd& basis) {
  Eigen::MatrixXd q = basis;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    const double norm = q.col(j).norm();
    if (norm < kColumnCollapse) throw RankDeficient("Gram-Schmidt: column collapsed");
    q.col(j) /= norm;
  }
  return q;
}

Eigen::MatrixXd orthonormalize_fo(const Eigen::MatrixXd& basis) {
  if (basis.cols() == 1) {
    const double norm = basis.norm();
    if (norm < kColumnCollapse) throw RankDeficient("polar orthonormalization: zero column");
    return basis / norm;
  }
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > kColumnCollapse * kColumnCollapse))
    throw RankDeficient("polar orthonormalization: singular Gram matrix");
  const Eigen::MatrixXd inv_sqrt =
      eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return basis * inv_sqrt;
}

bool uses_petrels(const TrackerKind& kind) { return !std::holds_alternative<Grouse>(kind); }

void update_basis(SubsetNode& node, PetrelsState* state, const Observation& obs,
                  const ProjectionResult& pr, const TrackerKind& kind, double step_weight) {
  std::visit(
      Overloaded{
          [&](const Grouse& g) { grouse_step(node.basis, obs, pr, g.eta0 * step_weight); },
          [&](const PetrelsGs& p) {
            if (state == nullptr) throw Error("PETRELS update without tracker state");
            Eigen::MatrixXd u = node.basis;
            petrels_step(u, *state, obs, pr, 1.0 - (1.0 - p.alpha) * step_weight);
            try {
              node.basis = orthonormalize_gs(u);
            } catch (const RankDeficient&) {
              // keep the previous basis
            }
          },
          [&](const PetrelsFo& p) {
            if (state == nullptr) throw Error("PETRELS update without tracker state");
            Eigen::MatrixXd u = node.basis;
            petrels_step(u, *state, obs, pr, 1.0 - (1.0 - p.alpha) * step_weight);
            try {
              node.basis = orthonormalize_fo(u);
            } catch (const RankDeficient&) {
              // keep the previous basis
            }
          },
      },
      kind);
}

}  // namespace mousse
