#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mousse {

/// Position of a subset in the binary tree: level j (root is level 1) and
/// index k within the level.
struct NodeId {
  int level = 1;
  std::uint64_t index = 0;

  auto operator<=>(const NodeId&) const = default;

  NodeId parent() const { return {level - 1, index / 2}; }
  NodeId child(int which) const { return {level + 1, 2 * index + static_cast<std::uint64_t>(which)}; }
  NodeId sibling() const { return {level, index ^ 1U}; }
  bool is_root() const { return level == 1; }
  std::string str() const;
};

inline constexpr NodeId kRootId{1, 0};

/// One time step of partially observed data: the entries of x_t at the sorted
/// coordinate set omega.
struct Observation {
  std::size_t t = 0;
  Eigen::VectorXd values;
  std::vector<Eigen::Index> omega;

  Eigen::Index size() const { return static_cast<Eigen::Index>(omega.size()); }
  bool is_complete(Eigen::Index ambient_dim) const { return size() == ambient_dim; }

  static Observation complete(std::size_t t, const Eigen::VectorXd& x);
  // Validates: non-empty, strictly increasing indices in [0, ambient_dim),
  // values.size() == omega.size(). Throws DataError otherwise.
  static Observation partial(std::size_t t, Eigen::VectorXd values, std::vector<Eigen::Index> omega,
                             Eigen::Index ambient_dim);
};

/// An ellipsoidal subset on a d-dimensional affine plane:
/// { U z + c : z' diag(lambdas)^-1 z <= 1 }, plus the residual energy per
/// ambient dimension delta.
struct SubsetNode {
  Eigen::MatrixXd basis;    // D x d, orthonormal columns
  Eigen::VectorXd center;   // D
  Eigen::VectorXd lambdas;  // d, stored per basis column (not sorted)
  double delta = 0.0;
  NodeId id{};
  bool is_virtual = false;

  Eigen::Index ambient_dim() const { return basis.rows(); }
  Eigen::Index intrinsic_dim() const { return basis.cols(); }
  Eigen::Index dominant_direction() const;
};

struct ProjectionResult {
  Eigen::VectorXd beta;    // d
  Eigen::VectorXd x_perp;  // |Omega|, residual on the observed coordinates
  Eigen::Index omega_size = 0;
};

inline constexpr double kGramRidge = 1e-12;
inline constexpr double kMinGramEigenvalue = 1e-10;
inline constexpr double kLambdaFloor = 1e-12;
inline constexpr double kDeltaFloor = 1e-12;

// Least-squares coefficients of (x_Omega - c_Omega) on the rows of U indexed
// by Omega, and the part left over. Throws RankDeficient if |Omega| < d or
// the ridged Gram matrix has an eigenvalue below kMinGramEigenvalue.
ProjectionResult project_partial(const Observation& obs, const SubsetNode& node);

// delta * beta' Lambda^-1 beta + ||x_perp||^2
double scaled_distance(const ProjectionResult& pr, const SubsetNode& node);
// beta' Lambda^-1 beta + ||x_perp||^2 / delta
double unscaled_distance(const ProjectionResult& pr, const SubsetNode& node);
// Square root of the scaled distance.
double residual(const ProjectionResult& pr, const SubsetNode& node);

// Exponential-forgetting update of c (observed coordinates only), lambdas and
// delta, followed by the floors. `pr` must be computed against `node`.
void update_scalar_params(SubsetNode& node, const Observation& obs, const ProjectionResult& pr,
                          double alpha);

// D-vector holding the projection residual on Omega and zeros elsewhere.
Eigen::VectorXd residual_map(const Observation& obs, const SubsetNode& node);

void apply_floors(SubsetNode& node);

// max |U'U - I|
double orthonormality_error(const Eigen::MatrixXd& basis);

}  // namespace mousse
