#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mousse/subset_model.hpp"
#include "mousse/subspace_tracking.hpp"

namespace mousse {

enum class UpdatePolicy { Nearest, All };

// How the average residual eps_t accumulates e_t^2.
//   Sum:     eps_{t+1} = alpha eps_t + e_{t+1}^2
//   Average: eps_{t+1} = alpha eps_t + (1 - alpha) e_{t+1}^2
// Sum is the exponentially forgotten sum; Average rescales it to the level
// of e_t^2, which makes the tolerance an absolute bound on mean e_t^2.
enum class ResidualAverage { Sum, Average };

struct MousseConfig {
  int intrinsic_dim = 1;
  double tolerance = 0.1;          // eps
  double alpha = 0.9;              // forgetting factor
  double complexity_weight = 0.1;  // mu
  TrackerKind tracker = PetrelsFo{0.9};
  int max_depth = 12;              // deepest leaf level; virtual children may sit one below
  UpdatePolicy update_policy = UpdatePolicy::Nearest;
  ResidualAverage residual_average = ResidualAverage::Sum;
  bool fixed_structure = false;    // single-subspace baseline: no split/merge
  double petrels_initial_gain = kPetrelsInitialGain;
  std::uint64_t seed = 1;          // k-means tie breaking at initialization

  // Throws ConfigError.
  void validate(Eigen::Index ambient_dim) const;
};

enum class NodeRole { Internal, Leaf, Virtual };

struct TreeNode {
  SubsetNode subset;
  std::optional<PetrelsState> petrels;
  NodeRole role = NodeRole::Leaf;
};

/// What happened inside one call to MousseTree::step, for replay and audit.
struct StepTrace {
  NodeId nearest{};
  std::optional<NodeId> virtual_child;
  std::optional<NodeId> parent;
  std::vector<NodeId> updated;       // every node whose parameters were touched
  double leaf_distance = 0.0;        // scaled distances before the update
  double virtual_distance = 0.0;     // if a virtual child exists
  double parent_distance = 0.0;      // if the leaf has a parent
  std::size_t leaves_before = 0;
  bool split_tested = false;
  bool merge_tested = false;
  bool split = false;
  bool merged = false;
  std::string declined;              // reason a structural change was declined
};

struct StepResult {
  std::size_t t = 0;
  double e = 0.0;
  double eps = 0.0;
  std::size_t k = 0;
  bool skipped = false;
  StepTrace trace;
};

struct NearestResult {
  NodeId id{};
  ProjectionResult projection;
  double distance = 0.0;
};

/// Multiscale union-of-subsets model: a binary tree of subsets whose leaves
/// approximate the manifold, with two virtual children under every leaf.
class MousseTree {
 public:
  MousseTree() = default;

  // Nested 2-means partition of complete samples; each cell gets a PCA
  // subset, cells split until delta < tolerance, then one more level of
  // virtual children. Requires at least 4(d+1) samples.
  static MousseTree from_batch(const std::vector<Eigen::VectorXd>& samples, const MousseConfig& cfg);

  // Nearest leaf by scaled distance, ties to the smaller id. Throws
  // RankDeficient only if every leaf fails to project.
  NearestResult nearest_subset(const Observation& obs) const;

  StepResult step(const Observation& obs);

  // Algorithm-level structure edits. split_node throws DepthLimit when the
  // leaf is already at max_depth; merge_node throws SiblingNotLeaf if the
  // sibling is internal and Error for the root.
  void split_node(NodeId id);
  void merge_node(NodeId id);

  const MousseConfig& config() const { return config_; }
  Eigen::Index ambient_dim() const { return ambient_dim_; }
  double eps() const { return eps_; }
  double last_residual() const { return last_e_; }
  std::size_t num_leaves() const { return leaves_.size(); }
  const std::vector<NodeId>& leaves() const { return leaves_; }
  std::vector<NodeId> tree_nodes() const;  // all non-virtual nodes
  int depth() const;
  const std::map<NodeId, TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(NodeId id) const;
  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  const std::vector<std::string>& init_log() const { return init_log_; }

  // Structural invariants; returns one message per violation (empty if fine).
  std::vector<std::string> check_invariants() const;

  // Versioned JSON checkpoint with exact floating-point round trip.
  std::string save_checkpoint() const;
  static MousseTree load_checkpoint(std::string_view text);

 private:
  friend class TreeCheckpoint;

  TreeNode make_node(SubsetNode subset, NodeRole role) const;
  void update_node(NodeId id, const Observation& obs, const ProjectionResult& pr, double weight = 1.0);
  std::optional<ProjectionResult> try_project(const Observation& obs, NodeId id) const;
  void make_virtual_children_from_split_rule(NodeId leaf);
  void refresh_leaves();
  void step_update_all(const Observation& obs, StepTrace& trace);

  MousseConfig config_{};
  Eigen::Index ambient_dim_ = 0;
  std::map<NodeId, TreeNode> nodes_;
  std::vector<NodeId> leaves_;  // sorted
  double eps_ = 0.0;
  double last_e_ = 0.0;
  std::vector<std::string> init_log_;
};

// 2-means with farthest-pair seeding; returns a 0/1 label per sample.
std::vector<int> two_means(const std::vector<Eigen::VectorXd>& samples, std::uint64_t seed,
                           int max_iterations = 50);

// PCA subset of a sample set: top-d eigenpairs of the unbiased sample
// covariance, delta = mean of the remaining eigenvalues.
SubsetNode fit_subset(const std::vector<Eigen::VectorXd>& samples, int intrinsic_dim, NodeId id);

}  // namespace mousse
