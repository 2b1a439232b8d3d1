#include "mousse/mousse_tree.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "mousse/errors.hpp"

namespace mousse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t mix_seed(std::uint64_t seed, NodeId id) {
  std::uint64_t h = seed ^ (static_cast<std::uint64_t>(id.level) << 56U) ^ id.index;
  h ^= h >> 33U;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33U;
  return h;
}

struct Split {
  std::vector<Eigen::VectorXd> first;
  std::vector<Eigen::VectorXd> second;
};

Split partition(const std::vector<Eigen::VectorXd>& samples, std::uint64_t seed) {
  const std::vector<int> labels = two_means(samples, seed);
  Split out;
  for (std::size_t i = 0; i < samples.size(); ++i) (labels[i] == 0 ? out.first : out.second).push_back(samples[i]);
  return out;
}

}  // namespace

void MousseConfig::validate(Eigen::Index ambient_dim) const {
  if (intrinsic_dim < 1) throw ConfigError("intrinsic dimension d must be >= 1");
  if (ambient_dim > 0 && intrinsic_dim >= ambient_dim)
    throw ConfigError("intrinsic dimension d must be smaller than the ambient dimension");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance eps must be positive");
  if (!(complexity_weight > 0.0)) throw ConfigError("complexity weight mu must be positive");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (max_depth > 60) throw ConfigError("max_depth must be <= 60");
  if (const auto* g = std::get_if<Grouse>(&tracker); g != nullptr && !(g->eta0 > 0.0))
    throw ConfigError("GROUSE eta0 must be positive");
  if (const auto* p = std::get_if<PetrelsGs>(&tracker); p != nullptr && !(p->alpha > 0.0 && p->alpha <= 1.0))
    throw ConfigError("PETRELS alpha must lie in (0, 1]");
  if (const auto* p = std::get_if<PetrelsFo>(&tracker); p != nullptr && !(p->alpha > 0.0 && p->alpha <= 1.0))
    throw ConfigError("PETRELS alpha must lie in (0, 1]");
}

std::vector<int> two_means(const std::vector<Eigen::VectorXd>& samples, std::uint64_t seed,
                           int max_iterations) {
  const std::size_t n = samples.size();
  std::vector<int> labels(n, 0);
  if (n < 2) return labels;

  std::size_t a = 0;
  std::size_t b = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = (samples[i] - samples[j]).squaredNorm();
      if (dist > best) {
        best = dist;
        a = i;
        b = j;
      }
    }
  }
  std::array<Eigen::VectorXd, 2> means{samples[a], samples[b]};
  std::mt19937_64 rng(seed);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = iter == 0;
    std::array<std::size_t, 2> counts{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int label = (samples[i] - means[1]).squaredNorm() < (samples[i] - means[0]).squaredNorm() ? 1 : 0;
      if (label != labels[i]) changed = true;
      labels[i] = label;
      ++counts[static_cast<std::size_t>(label)];
    }
    for (int c = 0; c < 2; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        // Empty cluster: reseed with a random sample and go around again.
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const std::size_t s = pick(rng);
        labels[s] = c;
        means[static_cast<std::size_t>(c)] = samples[s];
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(samples[0].size());
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == c) {
          sum += samples[i];
          ++count;
        }
      }
      if (count > 0) means[static_cast<std::size_t>(c)] = sum / static_cast<double>(count);
    }
  }
  return labels;
}

SubsetNode fit_subset(const std::vector<Eigen::VectorXd>& samples, int intrinsic_dim, NodeId id) {
  if (samples.size() < 2) throw InsufficientData("need at least two samples to fit a subset");
  const Eigen::Index dim = samples[0].size();
  const Eigen::Index d = intrinsic_dim;
  const double n = static_cast<double>(samples.size());

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& x : samples) mean += x;
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& x : samples) {
    const Eigen::VectorXd diff = x - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(diff);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= (n - 1.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending

  SubsetNode node;
  node.id = id;
  node.center = mean;
  node.basis.resize(dim, d);
  node.lambdas.resize(d);
  for (Eigen::Index m = 0; m < d; ++m) {
    node.basis.col(m) = eig.eigenvectors().col(dim - 1 - m);
    node.lambdas(m) = ev(dim - 1 - m);
  }
  node.delta = ev.head(dim - d).cwiseMax(0.0).mean();
  apply_floors(node);
  return node;
}

TreeNode MousseTree::make_node(SubsetNode subset, NodeRole role) const {
  TreeNode node;
  subset.is_virtual = role == NodeRole::Virtual;
  node.role = role;
  if (uses_petrels(config_.tracker)) {
    if (config_.petrels_initial_gain > 0.0) {
      node.petrels = PetrelsState::fresh(subset.ambient_dim(), subset.intrinsic_dim(), subset.id,
                                         config_.petrels_initial_gain);
    } else {
      // Warm start: treat the current lambdas as an exponentially weighted
      // history, R ~ diag(lambda) / (1 - alpha).
      PetrelsState state;
      state.node = subset.id;
      const double memory = config_.alpha < 1.0 ? 1.0 - config_.alpha : 1e-3;
      const Eigen::MatrixXd r_inv = (memory * subset.lambdas.cwiseInverse()).asDiagonal();
      state.r_inv.assign(static_cast<std::size_t>(subset.ambient_dim()), r_inv);
      node.petrels = std::move(state);
    }
  }
  node.subset = std::move(subset);
  return node;
}

void MousseTree::make_virtual_children_from_split_rule(NodeId leaf) {
  const SubsetNode& parent = nodes_.at(leaf).subset;
  const Eigen::Index m = parent.dominant_direction();
  const Eigen::VectorXd offset = std::sqrt(parent.lambdas(m)) * parent.basis.col(m) / 2.0;
  for (int which = 0; which < 2; ++which) {
    SubsetNode child = parent;
    child.id = leaf.child(which);
    child.center = which == 0 ? Eigen::VectorXd(parent.center + offset) : Eigen::VectorXd(parent.center - offset);
    child.lambdas(m) = parent.lambdas(m) / 2.0;
    apply_floors(child);
    nodes_[child.id] = make_node(std::move(child), NodeRole::Virtual);
  }
}

void MousseTree::refresh_leaves() {
  leaves_.clear();
  for (const auto& [id, node] : nodes_)
    if (node.role == NodeRole::Leaf) leaves_.push_back(id);
}

MousseTree MousseTree::from_batch(const std::vector<Eigen::VectorXd>& samples, const MousseConfig& cfg) {
  if (samples.empty()) throw InsufficientData("empty initialization batch");
  const Eigen::Index dim = samples.front().size();
  cfg.validate(dim);
  const std::size_t d = static_cast<std::size_t>(cfg.intrinsic_dim);
  if (samples.size() < 4 * (d + 1))
    throw InsufficientData("initialization needs at least 4(d+1) samples, got " + std::to_string(samples.size()));
  for (const auto& x : samples) {
    if (x.size() != dim) throw DataError("initialization samples differ in dimension");
    if (!x.allFinite()) throw DataError("initialization samples must be complete and finite");
  }

  MousseTree tree;
  tree.config_ = cfg;
  tree.ambient_dim_ = dim;

  // Depth-first construction; each entry is a cell still to be placed.
  struct Cell {
    NodeId id;
    std::vector<Eigen::VectorXd> data;
  };
  std::vector<Cell> pending;
  pending.push_back({kRootId, samples});
  const std::size_t min_cell = d + 1;

  while (!pending.empty()) {
    Cell cell = std::move(pending.back());
    pending.pop_back();
    SubsetNode subset = fit_subset(cell.data, cfg.intrinsic_dim, cell.id);

    const bool refine = !cfg.fixed_structure && subset.delta >= cfg.tolerance && cell.id.level < cfg.max_depth;
    if (refine) {
      Split parts = partition(cell.data, mix_seed(cfg.seed, cell.id));
      if (parts.first.size() >= min_cell && parts.second.size() >= min_cell) {
        tree.nodes_[cell.id] = tree.make_node(std::move(subset), NodeRole::Internal);
        pending.push_back({cell.id.child(1), std::move(parts.second)});
        pending.push_back({cell.id.child(0), std::move(parts.first)});
        continue;
      }
      tree.init_log_.push_back("InsufficientData: cell " + cell.id.str() + " with " +
                               std::to_string(cell.data.size()) + " samples kept as leaf");
    }

    tree.nodes_[cell.id] = tree.make_node(std::move(subset), NodeRole::Leaf);
    bool built = false;
    if (cell.data.size() >= 2 * min_cell) {
      Split parts = partition(cell.data, mix_seed(cfg.seed, cell.id.child(0)));
      if (parts.first.size() >= min_cell && parts.second.size() >= min_cell) {
        tree.nodes_[cell.id.child(0)] =
            tree.make_node(fit_subset(parts.first, cfg.intrinsic_dim, cell.id.child(0)), NodeRole::Virtual);
        tree.nodes_[cell.id.child(1)] =
            tree.make_node(fit_subset(parts.second, cfg.intrinsic_dim, cell.id.child(1)), NodeRole::Virtual);
        built = true;
      }
    }
    if (!built) tree.make_virtual_children_from_split_rule(cell.id);
  }
  tree.refresh_leaves();
  return tree;
}

const TreeNode& MousseTree::node(NodeId id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error("no node " + id.str());
  return it->second;
}

std::vector<NodeId> MousseTree::tree_nodes() const {
  std::vector<NodeId> out;
  for (const auto& [id, node] : nodes_)
    if (node.role != NodeRole::Virtual) out.push_back(id);
  return out;
}

int MousseTree::depth() const {
  int depth = 0;
  for (const auto& [id, node] : nodes_)
    if (node.role != NodeRole::Virtual) depth = std::max(depth, id.level);
  return depth;
}

std::optional<ProjectionResult> MousseTree::try_project(const Observation& obs, NodeId id) const {
  try {
    return project_partial(obs, nodes_.at(id).subset);
  } catch (const RankDeficient&) {
    return std::nullopt;
  }
}

NearestResult MousseTree::nearest_subset(const Observation& obs) const {
  std::optional<NearestResult> best;
  for (const NodeId id : leaves_) {
    auto pr = try_project(obs, id);
    if (!pr) continue;
    const double dist = scaled_distance(*pr, nodes_.at(id).subset);
    if (!best || dist < best->distance) best = NearestResult{id, std::move(*pr), dist};
  }
  if (!best) throw RankDeficient("sample cannot be projected onto any leaf");
  return *best;
}

void MousseTree::update_node(NodeId id, const Observation& obs, const ProjectionResult& pr, double weight) {
  TreeNode& node = nodes_.at(id);
  const double alpha = 1.0 - (1.0 - config_.alpha) * weight;
  update_scalar_params(node.subset, obs, pr, alpha);
  update_basis(node.subset, node.petrels ? &*node.petrels : nullptr, obs, pr, config_.tracker, weight);
}

void MousseTree::step_update_all(const Observation& obs, StepTrace& trace) {
  std::vector<std::pair<NodeId, ProjectionResult>> projections;
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& [id, node] : nodes_) {
    auto pr = try_project(obs, id);
    if (!pr) continue;
    const double w = 1.0 / std::max(scaled_distance(*pr, node.subset), 1e-12);
    projections.emplace_back(id, std::move(*pr));
    weights.push_back(w);
    total += w;
  }
  for (std::size_t i = 0; i < projections.size(); ++i) {
    update_node(projections[i].first, obs, projections[i].second, weights[i] / total);
    trace.updated.push_back(projections[i].first);
  }
}

StepResult MousseTree::step(const Observation& obs) {
  StepResult res;
  res.t = obs.t;
  StepTrace& trace = res.trace;
  trace.leaves_before = leaves_.size();

  NearestResult near;
  try {
    near = nearest_subset(obs);
  } catch (const RankDeficient&) {
    res.skipped = true;
    res.e = last_e_;
    res.eps = eps_;
    res.k = leaves_.size();
    return res;
  }
  const NodeId leaf = near.id;
  trace.nearest = leaf;
  const double e = std::sqrt(near.distance);

  // Closest virtual child, judged before any update.
  std::optional<NodeId> vchild;
  double vbest = kInf;
  for (int which = 0; which < 2; ++which) {
    const NodeId c = leaf.child(which);
    if (!contains(c)) continue;
    auto pr = try_project(obs, c);
    if (!pr) continue;
    const double dist = scaled_distance(*pr, nodes_.at(c).subset);
    if (dist < vbest) {
      vbest = dist;
      vchild = c;
    }
  }
  trace.virtual_child = vchild;
  trace.leaf_distance = near.distance;
  trace.virtual_distance = vbest;
  // Structural tests compare distances to the subsets as they were when the
  // sample arrived, so they are taken before any parameter update.
  if (!leaf.is_root()) {
    trace.parent = leaf.parent();
    auto pr = try_project(obs, *trace.parent);
    trace.parent_distance = pr ? scaled_distance(*pr, nodes_.at(*trace.parent).subset) : kInf;
  }

  if (config_.update_policy == UpdatePolicy::All) {
    step_update_all(obs, trace);
  } else {
    update_node(leaf, obs, near.projection);
    trace.updated.push_back(leaf);
    for (NodeId a = leaf; !a.is_root();) {
      a = a.parent();
      if (auto pr = try_project(obs, a)) {
        update_node(a, obs, *pr);
        trace.updated.push_back(a);
      }
    }
    if (vchild) {
      if (auto pr = try_project(obs, *vchild)) {
        update_node(*vchild, obs, *pr);
        trace.updated.push_back(*vchild);
      }
    }
  }

  const double e2 = e * e;
  eps_ = config_.residual_average == ResidualAverage::Sum ? config_.alpha * eps_ + e2
                                                          : config_.alpha * eps_ + (1.0 - config_.alpha) * e2;
  last_e_ = e;

  if (!config_.fixed_structure) {
    const double k = static_cast<double>(leaves_.size());
    const double mu = config_.complexity_weight;
    if (eps_ > config_.tolerance && vchild) {
      trace.split_tested = true;
      if (trace.virtual_distance + mu * (k + 1.0) < trace.leaf_distance + mu * k) {
        try {
          split_node(leaf);
          trace.split = true;
        } catch (const DepthLimit& err) {
          trace.declined = err.what();
        }
      }
    }
    if (!trace.split && eps_ < config_.tolerance && trace.parent) {
      trace.merge_tested = true;
      if (trace.parent_distance + mu * (k - 1.0) < trace.leaf_distance + mu * k) {
        try {
          merge_node(leaf);
          trace.merged = true;
        } catch (const SiblingNotLeaf& err) {
          trace.declined = err.what();
        }
      }
    }
  }

  res.e = e;
  res.eps = eps_;
  res.k = leaves_.size();
  return res;
}

void MousseTree::split_node(NodeId id) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end() || it->second.role != NodeRole::Leaf) throw Error("split target " + id.str() + " is not a leaf");
  if (id.level + 1 > config_.max_depth) throw DepthLimit("split of " + id.str() + " exceeds max_depth");
  it->second.role = NodeRole::Internal;
  for (int which = 0; which < 2; ++which) {
    TreeNode& child = nodes_.at(id.child(which));
    child.role = NodeRole::Leaf;
    child.subset.is_virtual = false;
  }
  for (int which = 0; which < 2; ++which) make_virtual_children_from_split_rule(id.child(which));
  refresh_leaves();
}

void MousseTree::merge_node(NodeId id) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end() || it->second.role != NodeRole::Leaf) throw Error("merge target " + id.str() + " is not a leaf");
  if (id.is_root()) throw Error("the root cannot be merged");
  const NodeId sibling = id.sibling();
  if (nodes_.at(sibling).role != NodeRole::Leaf) throw SiblingNotLeaf("sibling of " + id.str() + " is not a leaf");

  nodes_.at(id.parent()).role = NodeRole::Leaf;
  for (const NodeId n : {id, sibling}) {
    TreeNode& node = nodes_.at(n);
    node.role = NodeRole::Virtual;
    node.subset.is_virtual = true;
    nodes_.erase(n.child(0));
    nodes_.erase(n.child(1));
  }
  refresh_leaves();
}

std::vector<std::string> MousseTree::check_invariants() const {
  std::vector<std::string> bad;
  auto role_of = [&](NodeId id) -> std::optional<NodeRole> {
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) return std::nullopt;
    return it->second.role;
  };

  if (leaves_.empty()) bad.push_back("no leaves");
  const auto root = role_of(kRootId);
  if (!root || *root == NodeRole::Virtual) bad.push_back("root missing or virtual");

  std::vector<NodeId> expected_leaves;
  for (const auto& [id, node] : nodes_) {
    const std::string where = "node " + id.str() + ": ";
    if (node.subset.id != id) bad.push_back(where + "stored id mismatch");
    if (node.subset.is_virtual != (node.role == NodeRole::Virtual)) bad.push_back(where + "virtual flag mismatch");
    if (node.subset.ambient_dim() != ambient_dim_ || node.subset.intrinsic_dim() != config_.intrinsic_dim ||
        node.subset.center.size() != ambient_dim_ || node.subset.lambdas.size() != config_.intrinsic_dim)
      bad.push_back(where + "dimension mismatch");
    else if (orthonormality_error(node.subset.basis) > 1e-8)
      bad.push_back(where + "basis not orthonormal");
    if ((node.subset.lambdas.array() < kLambdaFloor).any() || node.subset.delta < kDeltaFloor)
      bad.push_back(where + "lambda or delta below floor");

    if (node.role == NodeRole::Leaf) {
      expected_leaves.push_back(id);
      if (id.level > config_.max_depth) bad.push_back(where + "leaf deeper than max_depth");
      for (int which = 0; which < 2; ++which)
        if (role_of(id.child(which)) != NodeRole::Virtual) bad.push_back(where + "leaf lacks a virtual child");
    } else if (node.role == NodeRole::Internal) {
      for (int which = 0; which < 2; ++which) {
        const auto c = role_of(id.child(which));
        if (!c || *c == NodeRole::Virtual) bad.push_back(where + "internal node lacks a tree child");
      }
    } else {
      if (id.is_root() || role_of(id.parent()) != NodeRole::Leaf) bad.push_back(where + "virtual node not under a leaf");
      if (role_of(id.child(0)) || role_of(id.child(1))) bad.push_back(where + "virtual node has children");
    }
    if (node.role != NodeRole::Virtual && !id.is_root() && role_of(id.parent()) != NodeRole::Internal)
      bad.push_back(where + "tree node whose parent is not internal");
  }
  if (expected_leaves != leaves_) bad.push_back("cached leaf set out of date");
  if (!(eps_ >= 0.0)) bad.push_back("negative average residual");
  return bad;
}

}  // namespace mousse
