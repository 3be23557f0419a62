#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sgcinf/graph.hpp"
#include "sgcinf/types.hpp"

namespace sgcinf {

struct IngestOptions {
  bool row_normalize_features = false;
};

struct DatasetBundle {
  AttributedGraph graph;
  LabeledSplit split;
};

/// Reads a bundle directory: edges.tsv, features.csv, labels.tsv,
/// splits.json. Node ids are 0-based and dense; the feature file fixes the
/// node count.
DatasetBundle ingest_dataset(const std::filesystem::path& dir, const IngestOptions& opts = {});

/// Writes the four bundle files with round-trip-exact decimal formatting.
void emit_dataset(const std::filesystem::path& dir, const AttributedGraph& graph,
                  const LabeledSplit& split);

struct SyntheticConfig {
  std::uint64_t seed = 1;
  int blocks = 2;
  int nodes_per_block = 100;
  double p_in = 0.05;
  double p_out = 0.005;
  double noise_rate = 0.1;  // planted inter-class edges, as a fraction of |E|
  int feature_dim = 8;
};

struct SyntheticDataset {
  AttributedGraph graph;
  LabeledSplit split;
  std::vector<Edge> planted_edges;  // the extra inter-class noise edges
  std::vector<int> block_of;
};

/// Stochastic-block-model graph with class-correlated Gaussian features and
/// planted inter-class noise edges. Fully deterministic given the seed.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

/// Bundle plus the ground_truth.json sidecar listing the planted edges.
void emit_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data);

}  // namespace sgcinf
