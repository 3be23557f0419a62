#include "sgcinf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace sgcinf {

AttributedGraph::AttributedGraph(NodeId num_nodes, std::vector<Edge> edges,
                                 Eigen::MatrixXd features)
    : num_nodes_(num_nodes) {
  if (num_nodes <= 0) throw ValidationError("graph needs at least one node");
  if (features.rows() != num_nodes)
    throw ValidationError("feature matrix must have one row per node");
  if (features.cols() <= 0) throw ValidationError("feature dimension must be positive");

  for (const Edge& e : edges) {
    if (e.a == e.b)
      throw ValidationError("self-loop (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                            ") not allowed");
    if (e.a < 0 || e.b >= num_nodes)
      throw ValidationError("edge endpoint out of range: (" + std::to_string(e.a) + "," +
                            std::to_string(e.b) + ")");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  adj_.resize(static_cast<size_t>(num_nodes));
  for (const Edge& e : edges_) {
    adj_[static_cast<size_t>(e.a)].push_back(e.b);
    adj_[static_cast<size_t>(e.b)].push_back(e.a);
  }
  for (auto& nbrs : adj_) std::sort(nbrs.begin(), nbrs.end());

  features_ = std::make_shared<const Eigen::MatrixXd>(std::move(features));
}

void AttributedGraph::check_node(NodeId v) const {
  if (v < 0 || v >= num_nodes_)
    throw OutOfRange("node id " + std::to_string(v) + " out of range [0," +
                     std::to_string(num_nodes_) + ")");
}

const std::vector<NodeId>& AttributedGraph::neighbors(NodeId v) const {
  check_node(v);
  return adj_[static_cast<size_t>(v)];
}

bool AttributedGraph::has_edge(Edge e) const {
  if (e.a < 0 || e.b >= num_nodes_ || e.a == e.b) return false;
  const auto& nbrs = adj_[static_cast<size_t>(e.a)];
  return std::binary_search(nbrs.begin(), nbrs.end(), e.b);
}

AttributedGraph AttributedGraph::remove_edge(Edge e) const {
  if (!has_edge(e))
    throw MissingEdge("edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                      ") not in graph");
  AttributedGraph out;
  out.num_nodes_ = num_nodes_;
  out.features_ = features_;
  out.edges_.reserve(edges_.size() - 1);
  for (const Edge& x : edges_)
    if (!(x == e)) out.edges_.push_back(x);
  out.adj_ = adj_;
  auto drop = [](std::vector<NodeId>& nbrs, NodeId v) {
    nbrs.erase(std::lower_bound(nbrs.begin(), nbrs.end(), v));
  };
  drop(out.adj_[static_cast<size_t>(e.a)], e.b);
  drop(out.adj_[static_cast<size_t>(e.b)], e.a);
  return out;
}

AttributedGraph AttributedGraph::remove_node(NodeId v) const {
  check_node(v);
  AttributedGraph out;
  out.num_nodes_ = num_nodes_;
  out.features_ = features_;
  out.edges_.reserve(edges_.size());
  for (const Edge& x : edges_)
    if (x.a != v && x.b != v) out.edges_.push_back(x);
  out.adj_.resize(adj_.size());
  for (NodeId u = 0; u < num_nodes_; ++u) {
    if (u == v) continue;  // leave adj_[v] empty
    const auto& nbrs = adj_[static_cast<size_t>(u)];
    auto& dst = out.adj_[static_cast<size_t>(u)];
    dst.reserve(nbrs.size());
    for (NodeId w : nbrs)
      if (w != v) dst.push_back(w);
  }
  return out;
}

AttributedGraph AttributedGraph::with_row_normalized_features() const {
  Eigen::MatrixXd X = *features_;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double s = X.row(i).cwiseAbs().sum();
    if (s > 0.0) X.row(i) /= s;
  }
  return AttributedGraph(num_nodes_, edges_, std::move(X));
}

NormalizedOperator build_normalized_operator(const AttributedGraph& graph) {
  const NodeId n = graph.num_nodes();
  std::vector<double> inv_sqrt(static_cast<size_t>(n));
  for (NodeId v = 0; v < n; ++v)
    inv_sqrt[static_cast<size_t>(v)] = 1.0 / std::sqrt(static_cast<double>(graph.degree(v) + 1));

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(n) + 2 * graph.edges().size());
  for (NodeId v = 0; v < n; ++v) {
    const double sv = inv_sqrt[static_cast<size_t>(v)];
    trips.emplace_back(v, v, sv * sv);
    for (NodeId u : graph.neighbors(v)) trips.emplace_back(v, u, sv * inv_sqrt[static_cast<size_t>(u)]);
  }
  NormalizedOperator op;
  op.S.resize(n, n);
  op.S.setFromTriplets(trips.begin(), trips.end());
  op.S.makeCompressed();
  return op;
}

EmbeddingMatrix propagate(const AttributedGraph& graph, int k) {
  if (k < 0) throw ValidationError("hop count must be non-negative");
  EmbeddingMatrix out;
  out.k = k;
  out.Z = graph.features();
  if (k == 0) return out;
  const NormalizedOperator op = build_normalized_operator(graph);
  for (int step = 0; step < k; ++step) out.Z = op.S * out.Z;
  return out;
}

LabeledSplit::LabeledSplit(std::vector<int> labels, std::vector<NodeId> train,
                           std::vector<NodeId> val, std::vector<NodeId> test, int num_classes)
    : labels_(std::move(labels)),
      train_(std::move(train)),
      val_(std::move(val)),
      test_(std::move(test)),
      num_classes_(num_classes) {
  if (num_classes_ <= 0) throw ValidationError("num_classes must be positive");
  role_.assign(labels_.size(), 0);
  auto mark = [&](const std::vector<NodeId>& ids, std::uint8_t role, const char* name) {
    for (NodeId v : ids) {
      if (v < 0 || static_cast<size_t>(v) >= labels_.size())
        throw ValidationError(std::string(name) + " id " + std::to_string(v) + " out of range");
      if (role_[static_cast<size_t>(v)] != 0)
        throw ValidationError("node " + std::to_string(v) + " appears in two splits");
      int y = labels_[static_cast<size_t>(v)];
      if (y < 0 || y >= num_classes_)
        throw ValidationError("node " + std::to_string(v) + " in split '" + name +
                              "' has no valid label");
      role_[static_cast<size_t>(v)] = role;
    }
  };
  mark(train_, 1, "train");
  mark(val_, 2, "val");
  mark(test_, 3, "test");
  for (int y : labels_) {
    if (y >= num_classes_)
      throw ValidationError("label " + std::to_string(y) + " outside [0," +
                            std::to_string(num_classes_) + ")");
  }
}

}  // namespace sgcinf
