#include "mousse/subset_model.hpp"

#include <algorithm>
#include <cmath>

#include "mousse/errors.hpp"

namespace mousse {

std::string NodeId::str() const {
  return "(" + std::to_string(level) + "," + std::to_string(index) + ")";
}

Observation Observation::complete(std::size_t t, const Eigen::VectorXd& x) {
  Observation obs;
  obs.t = t;
  obs.values = x;
  obs.omega.resize(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) obs.omega[static_cast<std::size_t>(i)] = i;
  return obs;
}

Observation Observation::partial(std::size_t t, Eigen::VectorXd values,
                                 std::vector<Eigen::Index> omega, Eigen::Index ambient_dim) {
  if (omega.empty()) throw DataError("observation has no observed entries");
  if (static_cast<Eigen::Index>(omega.size()) != values.size())
    throw DataError("observation values and index set differ in length");
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (omega[i] < 0 || omega[i] >= ambient_dim)
      throw DataError("observed index out of range: " + std::to_string(omega[i]));
    if (i > 0 && omega[i] <= omega[i - 1])
      throw DataError("observed indices must be strictly increasing");
  }
  Observation obs;
  obs.t = t;
  obs.values = std::move(values);
  obs.omega = std::move(omega);
  return obs;
}

Eigen::Index SubsetNode::dominant_direction() const {
  Eigen::Index best = 0;
  lambdas.maxCoeff(&best);
  return best;
}

ProjectionResult project_partial(const Observation& obs, const SubsetNode& node) {
  const Eigen::Index d = node.intrinsic_dim();
  const Eigen::Index n = obs.size();
  if (n < d) throw RankDeficient("fewer observed entries than intrinsic dimension");

  Eigen::MatrixXd u_obs(n, d);
  Eigen::VectorXd centered(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index m = obs.omega[static_cast<std::size_t>(i)];
    u_obs.row(i) = node.basis.row(m);
    centered(i) = obs.values(i) - node.center(m);
  }

  Eigen::MatrixXd gram = u_obs.transpose() * u_obs;
  gram.diagonal().array() += kGramRidge;

  ProjectionResult pr;
  pr.omega_size = n;
  if (d == 1) {
    const double g = gram(0, 0);
    if (!(g > kMinGramEigenvalue)) throw RankDeficient("restricted Gram matrix is singular");
    pr.beta = (u_obs.transpose() * centered) / g;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (!(eig.eigenvalues().minCoeff() > kMinGramEigenvalue))
      throw RankDeficient("restricted Gram matrix is singular");
    pr.beta = gram.ldlt().solve(u_obs.transpose() * centered);
  }
  pr.x_perp = centered - u_obs * pr.beta;
  return pr;
}

double scaled_distance(const ProjectionResult& pr, const SubsetNode& node) {
  const double in_plane = (pr.beta.array().square() / node.lambdas.array()).sum();
  return node.delta * in_plane + pr.x_perp.squaredNorm();
}

double unscaled_distance(const ProjectionResult& pr, const SubsetNode& node) {
  const double in_plane = (pr.beta.array().square() / node.lambdas.array()).sum();
  return in_plane + pr.x_perp.squaredNorm() / node.delta;
}

double residual(const ProjectionResult& pr, const SubsetNode& node) {
  return std::sqrt(scaled_distance(pr, node));
}

void apply_floors(SubsetNode& node) {
  node.lambdas = node.lambdas.cwiseMax(kLambdaFloor);
  node.delta = std::max(node.delta, kDeltaFloor);
}

void update_scalar_params(SubsetNode& node, const Observation& obs, const ProjectionResult& pr,
                          double alpha) {
  const double gain = 1.0 - alpha;
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    const Eigen::Index m = obs.omega[static_cast<std::size_t>(i)];
    node.center(m) = alpha * node.center(m) + gain * obs.values(i);
  }
  node.lambdas = alpha * node.lambdas + gain * pr.beta.cwiseAbs2();
  const double off_plane_dims = static_cast<double>(node.ambient_dim() - node.intrinsic_dim());
  node.delta = alpha * node.delta + gain * pr.x_perp.squaredNorm() / off_plane_dims;
  apply_floors(node);
}

Eigen::VectorXd residual_map(const Observation& obs, const SubsetNode& node) {
  const ProjectionResult pr = project_partial(obs, node);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(node.ambient_dim());
  for (Eigen::Index i = 0; i < obs.size(); ++i) out(obs.omega[static_cast<std::size_t>(i)]) = pr.x_perp(i);
  return out;
}

double orthonormality_error(const Eigen::MatrixXd& basis) {
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace mousse
