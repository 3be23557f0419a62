#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sgcinf/graph.hpp"
#include "sgcinf/types.hpp"

namespace sgcinf {

/// Rows with absolute maximum below this are structural-zero noise and dropped.
inline constexpr double kDeltaZeroThreshold = 1e-14;

/// Exact change of the propagated representations Z caused by one removal.
/// Only non-zero rows are stored; support is confined to the k-hop closed
/// neighborhood of the removed element's endpoints.
struct PerturbationDelta {
  Target target;
  int k = 0;
  std::vector<NodeId> nodes;  // sorted support
  Eigen::MatrixXd rows;       // |nodes| x D, row r belongs to nodes[r]

  bool empty() const { return nodes.empty(); }
  int size() const { return static_cast<int>(nodes.size()); }

  /// Index into `rows` for node v, or -1 when v is unaffected.
  int index_of(NodeId v) const;
};

enum class DeltaMethod {
  Localized,      // propagation restricted to the 2k-hop region around the edit
  FullRecompute,  // slow oracle: full propagation on the modified graph
};

PerturbationDelta delta_edge_removal(const AttributedGraph& graph, int k, Edge e,
                                     DeltaMethod method = DeltaMethod::Localized);

PerturbationDelta delta_node_removal(const AttributedGraph& graph, int k, NodeId v,
                                     DeltaMethod method = DeltaMethod::Localized);

/// {v in train : delta_v != 0} — the set the estimators and bounds sum over.
std::vector<NodeId> affected_training_nodes(const PerturbationDelta& delta,
                                            const LabeledSplit& split);

}  // namespace sgcinf
