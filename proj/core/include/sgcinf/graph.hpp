#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "sgcinf/types.hpp"

namespace sgcinf {

/// Undirected attributed graph. Immutable after construction; edits return
/// new values. Feature storage is shared between copies.
class AttributedGraph {
 public:
  /// Edges are canonicalized to (min,max) and deduplicated. Self-loops are a
  /// hard error: the normalization adds the identity separately.
  AttributedGraph(NodeId num_nodes, std::vector<Edge> edges, Eigen::MatrixXd features);

  NodeId num_nodes() const { return num_nodes_; }
  int feature_dim() const { return static_cast<int>(features_->cols()); }
  const Eigen::MatrixXd& features() const { return *features_; }

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<NodeId>& neighbors(NodeId v) const;
  int degree(NodeId v) const { return static_cast<int>(neighbors(v).size()); }
  bool has_edge(Edge e) const;

  /// Same graph with `e` deleted. Throws MissingEdge if absent.
  AttributedGraph remove_edge(Edge e) const;

  /// Deletes all edges incident to `v`; the node itself stays (dimensions
  /// are preserved) and keeps its implicit self-loop.
  AttributedGraph remove_node(NodeId v) const;

  /// Copy with every feature row scaled to unit L1 norm (zero rows kept).
  AttributedGraph with_row_normalized_features() const;

  void check_node(NodeId v) const;

 private:
  AttributedGraph() = default;

  NodeId num_nodes_ = 0;
  std::shared_ptr<const Eigen::MatrixXd> features_;
  std::vector<std::vector<NodeId>> adj_;  // sorted neighbor lists
  std::vector<Edge> edges_;               // sorted canonical pairs
};

/// S = D̃^{-1/2} (A + I) D̃^{-1/2} with D̃ the degree matrix of A + I.
struct NormalizedOperator {
  Eigen::SparseMatrix<double, Eigen::RowMajor> S;
};

NormalizedOperator build_normalized_operator(const AttributedGraph& graph);

/// Z = S^k X, computed as k sparse-times-dense products.
struct EmbeddingMatrix {
  Eigen::MatrixXd Z;
  int k = 0;
};

EmbeddingMatrix propagate(const AttributedGraph& graph, int k);

/// Node labels plus disjoint train/val/test id sets.
class LabeledSplit {
 public:
  /// `labels[v]` is the class of node v, or -1 if unlabeled. Every node in a
  /// split must be labeled with a class in [0, num_classes).
  LabeledSplit(std::vector<int> labels, std::vector<NodeId> train, std::vector<NodeId> val,
               std::vector<NodeId> test, int num_classes);

  int label(NodeId v) const { return labels_[static_cast<size_t>(v)]; }
  int num_classes() const { return num_classes_; }
  NodeId num_nodes() const { return static_cast<NodeId>(labels_.size()); }

  const std::vector<NodeId>& train() const { return train_; }
  const std::vector<NodeId>& val() const { return val_; }
  const std::vector<NodeId>& test() const { return test_; }
  const std::vector<int>& labels() const { return labels_; }

  bool in_train(NodeId v) const { return role_[static_cast<size_t>(v)] == 1; }
  bool in_val(NodeId v) const { return role_[static_cast<size_t>(v)] == 2; }
  bool in_test(NodeId v) const { return role_[static_cast<size_t>(v)] == 3; }

 private:
  std::vector<int> labels_;
  std::vector<NodeId> train_, val_, test_;
  std::vector<std::uint8_t> role_;  // 0 none, 1 train, 2 val, 3 test
  int num_classes_ = 0;
};

}  // namespace sgcinf
