#include <string>

#include <json.hpp>

#include "mousse/errors.hpp"
#include "mousse/mousse_tree.hpp"

namespace mousse {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Row-major nested arrays.
json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = j.at(r).get<std::vector<double>>();
    if (row.size() != cols) throw DataError("checkpoint matrix rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

const char* role_name(NodeRole role) {
  switch (role) {
    case NodeRole::Internal: return "internal";
    case NodeRole::Leaf: return "leaf";
    case NodeRole::Virtual: return "virtual";
  }
  return "leaf";
}

NodeRole role_from(const std::string& s) {
  if (s == "internal") return NodeRole::Internal;
  if (s == "leaf") return NodeRole::Leaf;
  if (s == "virtual") return NodeRole::Virtual;
  throw DataError("unknown node role in checkpoint: " + s);
}

json tracker_to_json(const TrackerKind& kind) {
  if (const auto* g = std::get_if<Grouse>(&kind)) return {{"kind", "grouse"}, {"eta0", g->eta0}};
  if (const auto* p = std::get_if<PetrelsGs>(&kind)) return {{"kind", "petrels-gs"}, {"alpha", p->alpha}};
  const auto& p = std::get<PetrelsFo>(kind);
  return {{"kind", "petrels-fo"}, {"alpha", p.alpha}};
}

TrackerKind tracker_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "grouse") return Grouse{j.at("eta0").get<double>()};
  if (kind == "petrels-gs") return PetrelsGs{j.at("alpha").get<double>()};
  if (kind == "petrels-fo") return PetrelsFo{j.at("alpha").get<double>()};
  throw DataError("unknown tracker in checkpoint: " + kind);
}

}  // namespace

class TreeCheckpoint {
 public:
  static std::string save(const MousseTree& tree) {
    const MousseConfig& c = tree.config_;
    json doc;
    doc["format"] = "mousse-tree";
    doc["version"] = kCheckpointVersion;
    doc["ambient_dim"] = tree.ambient_dim_;
    doc["eps"] = tree.eps_;
    doc["last_e"] = tree.last_e_;
    doc["config"] = {
        {"intrinsic_dim", c.intrinsic_dim},
        {"tolerance", c.tolerance},
        {"alpha", c.alpha},
        {"complexity_weight", c.complexity_weight},
        {"tracker", tracker_to_json(c.tracker)},
        {"max_depth", c.max_depth},
        {"update_policy", c.update_policy == UpdatePolicy::All ? "all" : "nearest"},
        {"residual_average", c.residual_average == ResidualAverage::Sum ? "sum" : "average"},
        {"fixed_structure", c.fixed_structure},
        {"petrels_initial_gain", c.petrels_initial_gain},
        {"seed", c.seed},
    };
    json nodes = json::array();
    for (const auto& [id, node] : tree.nodes_) {
      json n;
      n["level"] = id.level;
      n["index"] = id.index;
      n["role"] = role_name(node.role);
      n["basis"] = matrix_to_json(node.subset.basis);
      n["center"] = vector_to_json(node.subset.center);
      n["lambdas"] = vector_to_json(node.subset.lambdas);
      n["delta"] = node.subset.delta;
      if (node.petrels) {
        json r = json::array();
        for (const auto& m : node.petrels->r_inv) r.push_back(matrix_to_json(m));
        n["petrels"] = std::move(r);
      }
      nodes.push_back(std::move(n));
    }
    doc["nodes"] = std::move(nodes);
    return doc.dump();
  }

  static MousseTree load(std::string_view text) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
      if (doc.at("format") != "mousse-tree") throw DataError("not a tree checkpoint");
      if (doc.at("version").get<int>() != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + doc.at("version").dump());

      MousseTree tree;
      const json& c = doc.at("config");
      MousseConfig& cfg = tree.config_;
      cfg.intrinsic_dim = c.at("intrinsic_dim").get<int>();
      cfg.tolerance = c.at("tolerance").get<double>();
      cfg.alpha = c.at("alpha").get<double>();
      cfg.complexity_weight = c.at("complexity_weight").get<double>();
      cfg.tracker = tracker_from_json(c.at("tracker"));
      cfg.max_depth = c.at("max_depth").get<int>();
      cfg.update_policy = c.at("update_policy") == "all" ? UpdatePolicy::All : UpdatePolicy::Nearest;
      cfg.residual_average = c.at("residual_average") == "sum" ? ResidualAverage::Sum : ResidualAverage::Average;
      cfg.fixed_structure = c.at("fixed_structure").get<bool>();
      cfg.petrels_initial_gain = c.at("petrels_initial_gain").get<double>();
      cfg.seed = c.at("seed").get<std::uint64_t>();
      tree.ambient_dim_ = doc.at("ambient_dim").get<Eigen::Index>();
      cfg.validate(tree.ambient_dim_);
      tree.eps_ = doc.at("eps").get<double>();
      tree.last_e_ = doc.at("last_e").get<double>();

      for (const json& n : doc.at("nodes")) {
        TreeNode node;
        const NodeId id{n.at("level").get<int>(), n.at("index").get<std::uint64_t>()};
        node.role = role_from(n.at("role").get<std::string>());
        node.subset.id = id;
        node.subset.is_virtual = node.role == NodeRole::Virtual;
        node.subset.basis = matrix_from_json(n.at("basis"));
        node.subset.center = vector_from_json(n.at("center"));
        node.subset.lambdas = vector_from_json(n.at("lambdas"));
        node.subset.delta = n.at("delta").get<double>();
        if (n.contains("petrels")) {
          PetrelsState state;
          state.node = id;
          for (const json& m : n.at("petrels")) state.r_inv.push_back(matrix_from_json(m));
          node.petrels = std::move(state);
        }
        tree.nodes_[id] = std::move(node);
      }
      tree.refresh_leaves();
      if (auto bad = tree.check_invariants(); !bad.empty()) throw DataError("checkpoint violates tree invariants: " + bad.front());
      return tree;
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
  }
};

std::string MousseTree::save_checkpoint() const { return TreeCheckpoint::save(*this); }

MousseTree MousseTree::load_checkpoint(std::string_view text) { return TreeCheckpoint::load(text); }

}  // namespace mousse
