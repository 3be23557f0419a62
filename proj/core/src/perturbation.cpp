#include "sgcinf/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace sgcinf {

int PerturbationDelta::index_of(NodeId v) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  if (it == nodes.end() || *it != v) return -1;
  return static_cast<int>(it - nodes.begin());
}

namespace {

// One removal expressed as an overlay on the original adjacency, so the
// localized path never copies the graph.
struct RemovalView {
  const AttributedGraph* graph = nullptr;
  TargetKind kind = TargetKind::EdgeRemoval;
  Edge edge;
  NodeId node = -1;

  bool edge_removed(NodeId u, NodeId w) const {
    if (kind == TargetKind::EdgeRemoval) return Edge(u, w) == edge;
    return u == node || w == node;
  }
  int degree(NodeId v) const {
    int d = graph->degree(v);
    if (kind == TargetKind::EdgeRemoval) {
      if (v == edge.a || v == edge.b) return d - 1;
      return d;
    }
    if (v == node) return 0;
    const auto& nbrs = graph->neighbors(node);
    if (std::binary_search(nbrs.begin(), nbrs.end(), v)) return d - 1;
    return d;
  }
};

// Nodes within `hops` of the seeds, by BFS on the original graph. Removals
// only delete edges, so original-graph balls cover the modified graph too.
std::vector<NodeId> ball(const AttributedGraph& g, const std::vector<NodeId>& seeds, int hops) {
  std::vector<int> dist(static_cast<size_t>(g.num_nodes()), -1);
  std::queue<NodeId> q;
  std::vector<NodeId> out;
  for (NodeId s : seeds) {
    if (dist[static_cast<size_t>(s)] == -1) {
      dist[static_cast<size_t>(s)] = 0;
      q.push(s);
      out.push_back(s);
    }
  }
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    int dv = dist[static_cast<size_t>(v)];
    if (dv == hops) continue;
    for (NodeId u : g.neighbors(v)) {
      if (dist[static_cast<size_t>(u)] == -1) {
        dist[static_cast<size_t>(u)] = dv + 1;
        q.push(u);
        out.push_back(u);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Propagation restricted to `region`, either on the original operator or on
// the overlay. Rows at distance d from the region boundary are exact after d
// steps; callers only read rows whose full k-hop in-neighborhood lies inside.
Eigen::MatrixXd propagate_region(const AttributedGraph& g, const std::vector<NodeId>& region,
                                 int k, const RemovalView* removal) {
  const int dim = g.feature_dim();
  const int m = static_cast<int>(region.size());
  std::vector<int> local(static_cast<size_t>(g.num_nodes()), -1);
  for (int i = 0; i < m; ++i) local[static_cast<size_t>(region[i])] = i;

  std::vector<double> inv_sqrt(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    int d = removal ? removal->degree(region[i]) : g.degree(region[i]);
    inv_sqrt[static_cast<size_t>(i)] = 1.0 / std::sqrt(static_cast<double>(d + 1));
  }

  Eigen::MatrixXd cur(m, dim);
  for (int i = 0; i < m; ++i) cur.row(i) = g.features().row(region[i]);

  Eigen::MatrixXd next(m, dim);
  for (int step = 0; step < k; ++step) {
    for (int i = 0; i < m; ++i) {
      const NodeId v = region[static_cast<size_t>(i)];
      const double sv = inv_sqrt[static_cast<size_t>(i)];
      next.row(i) = (sv * sv) * cur.row(i);
      for (NodeId u : g.neighbors(v)) {
        if (removal && removal->edge_removed(v, u)) continue;
        int j = local[static_cast<size_t>(u)];
        if (j < 0) continue;  // outside region; only hurts rows we never read
        next.row(i) += (sv * inv_sqrt[static_cast<size_t>(j)]) * cur.row(j);
      }
    }
    cur.swap(next);
  }
  return cur;
}

PerturbationDelta collect_rows(Target target, int k, const std::vector<NodeId>& candidates,
                               const Eigen::MatrixXd& modified, const Eigen::MatrixXd& original,
                               const std::vector<int>& row_index) {
  PerturbationDelta delta;
  delta.target = target;
  delta.k = k;
  std::vector<Eigen::Index> kept;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const int r = row_index[i];
    const double mx = (modified.row(r) - original.row(r)).cwiseAbs().maxCoeff();
    if (mx >= kDeltaZeroThreshold) {
      delta.nodes.push_back(candidates[i]);
      kept.push_back(r);
    }
  }
  delta.rows.resize(static_cast<Eigen::Index>(kept.size()), original.cols());
  for (size_t i = 0; i < kept.size(); ++i)
    delta.rows.row(static_cast<Eigen::Index>(i)) = modified.row(kept[i]) - original.row(kept[i]);
  return delta;
}

PerturbationDelta delta_localized(const AttributedGraph& g, int k, const RemovalView& removal,
                                  Target target, const std::vector<NodeId>& seeds) {
  PerturbationDelta empty;
  empty.target = target;
  empty.k = k;
  empty.rows.resize(0, g.feature_dim());
  if (k == 0) return empty;  // Z = X regardless of edges

  const std::vector<NodeId> support = ball(g, seeds, k);
  const std::vector<NodeId> region = ball(g, seeds, 2 * k);

  Eigen::MatrixXd modified = propagate_region(g, region, k, &removal);
  Eigen::MatrixXd original = propagate_region(g, region, k, nullptr);

  std::vector<int> local(static_cast<size_t>(g.num_nodes()), -1);
  for (size_t i = 0; i < region.size(); ++i) local[static_cast<size_t>(region[i])] = static_cast<int>(i);
  std::vector<int> row_index(support.size());
  for (size_t i = 0; i < support.size(); ++i) row_index[i] = local[static_cast<size_t>(support[i])];

  return collect_rows(target, k, support, modified, original, row_index);
}

PerturbationDelta delta_full(const AttributedGraph& g, int k, const AttributedGraph& modified,
                             Target target) {
  const Eigen::MatrixXd z0 = propagate(g, k).Z;
  const Eigen::MatrixXd z1 = propagate(modified, k).Z;
  std::vector<NodeId> all(static_cast<size_t>(g.num_nodes()));
  std::vector<int> rows(all.size());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    all[static_cast<size_t>(v)] = v;
    rows[static_cast<size_t>(v)] = v;
  }
  return collect_rows(target, k, all, z1, z0, rows);
}

}  // namespace

PerturbationDelta delta_edge_removal(const AttributedGraph& graph, int k, Edge e,
                                     DeltaMethod method) {
  if (!graph.has_edge(e))
    throw MissingEdge("edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                      ") not in graph");
  const Target target = Target::edge(e);
  if (method == DeltaMethod::FullRecompute)
    return delta_full(graph, k, graph.remove_edge(e), target);
  RemovalView view{&graph, TargetKind::EdgeRemoval, e, -1};
  return delta_localized(graph, k, view, target, {e.a, e.b});
}

PerturbationDelta delta_node_removal(const AttributedGraph& graph, int k, NodeId v,
                                     DeltaMethod method) {
  graph.check_node(v);
  const Target target = Target::node(v);
  if (method == DeltaMethod::FullRecompute)
    return delta_full(graph, k, graph.remove_node(v), target);
  RemovalView view{&graph, TargetKind::NodeRemoval, Edge{}, v};
  std::vector<NodeId> seeds = graph.neighbors(v);
  seeds.push_back(v);
  return delta_localized(graph, k, view, target, seeds);
}

std::vector<NodeId> affected_training_nodes(const PerturbationDelta& delta,
                                            const LabeledSplit& split) {
  std::vector<NodeId> out;
  for (NodeId v : delta.nodes)
    if (split.in_train(v)) out.push_back(v);
  return out;
}

}  // namespace sgcinf
