#include "sgcinf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sgcinf/io.hpp"
#include "sgcinf/rng.hpp"

namespace sgcinf {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing bundle file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

DatasetBundle ingest_dataset(const std::filesystem::path& dir, const IngestOptions& opts) {
  const std::string features_file = (dir / "features.csv").string();
  const std::string edges_file = (dir / "edges.tsv").string();
  const std::string labels_file = (dir / "labels.tsv").string();
  const std::string splits_file = (dir / "splits.json").string();

  // features.csv sets the node count.
  const std::vector<std::string> feature_lines = read_lines(features_file);
  if (feature_lines.empty()) throw ValidationError("features.csv is empty");
  const NodeId n = static_cast<NodeId>(feature_lines.size());
  std::vector<std::string_view> first = split_on(feature_lines[0], ',');
  const int dim = static_cast<int>(first.size());
  Eigen::MatrixXd features(n, dim);
  for (NodeId v = 0; v < n; ++v) {
    const auto cells = split_on(feature_lines[static_cast<size_t>(v)], ',');
    if (static_cast<int>(cells.size()) != dim)
      throw ParseError(features_file, v + 1,
                       "expected " + std::to_string(dim) + " columns, got " +
                           std::to_string(cells.size()));
    for (int j = 0; j < dim; ++j)
      features(v, j) = parse_double(cells[static_cast<size_t>(j)], features_file, v + 1);
  }

  std::vector<Edge> edges;
  {
    const std::vector<std::string> lines = read_lines(edges_file);
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto cells = split_on(lines[i], '\t');
      if (cells.size() != 2)
        throw ParseError(edges_file, static_cast<long>(i + 1), "expected two tab-separated ids");
      const long long a = parse_int(cells[0], edges_file, static_cast<long>(i + 1));
      const long long b = parse_int(cells[1], edges_file, static_cast<long>(i + 1));
      if (a < 0 || b < 0 || a >= n || b >= n)
        throw ValidationError(edges_file + ":" + std::to_string(i + 1) + ": node id out of range");
      edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
    }
  }

  std::vector<int> labels(static_cast<size_t>(n), -1);
  int num_classes = 0;
  {
    const std::vector<std::string> lines = read_lines(labels_file);
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto cells = split_on(lines[i], '\t');
      if (cells.size() != 2)
        throw ParseError(labels_file, static_cast<long>(i + 1),
                         "expected node-id TAB class-id");
      const long long v = parse_int(cells[0], labels_file, static_cast<long>(i + 1));
      const long long y = parse_int(cells[1], labels_file, static_cast<long>(i + 1));
      if (v < 0 || v >= n)
        throw ValidationError(labels_file + ":" + std::to_string(i + 1) + ": node id out of range");
      if (y < 0)
        throw ValidationError(labels_file + ":" + std::to_string(i + 1) + ": negative class id");
      labels[static_cast<size_t>(v)] = static_cast<int>(y);
      num_classes = std::max(num_classes, static_cast<int>(y) + 1);
    }
  }
  if (num_classes == 0) throw ValidationError("labels.tsv assigns no labels");

  std::vector<NodeId> train, val, test;
  {
    std::ifstream in(splits_file);
    if (!in) throw ValidationError("missing bundle file: " + splits_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(splits_file, 0, e.what());
    }
    auto read_ids = [&](const char* key) {
      std::vector<NodeId> ids;
      if (!j.contains(key)) throw ValidationError(splits_file + ": missing array '" + key + "'");
      for (const auto& x : j.at(key)) {
        if (!x.is_number_integer()) throw ValidationError(splits_file + ": non-integer id");
        const long long v = x.get<long long>();
        if (v < 0 || v >= n)
          throw ValidationError(splits_file + ": node id " + std::to_string(v) + " out of range");
        ids.push_back(static_cast<NodeId>(v));
      }
      return ids;
    };
    train = read_ids("train");
    val = read_ids("val");
    test = read_ids("test");
  }

  AttributedGraph graph(n, std::move(edges), std::move(features));
  if (opts.row_normalize_features) graph = graph.with_row_normalized_features();
  LabeledSplit split(std::move(labels), std::move(train), std::move(val), std::move(test),
                     num_classes);
  return DatasetBundle{std::move(graph), std::move(split)};
}

void emit_dataset(const std::filesystem::path& dir, const AttributedGraph& graph,
                  const LabeledSplit& split) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "edges.tsv");
    for (const Edge& e : graph.edges()) out << e.a << '\t' << e.b << "\n";
  }
  {
    std::ofstream out(dir / "features.csv");
    const Eigen::MatrixXd& x = graph.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j) out << ',';
        out << format_double(x(i, j));
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "labels.tsv");
    for (NodeId v = 0; v < split.num_nodes(); ++v)
      if (split.label(v) >= 0) out << v << '\t' << split.label(v) << "\n";
  }
  {
    nlohmann::json j;
    j["train"] = split.train();
    j["val"] = split.val();
    j["test"] = split.test();
    std::ofstream out(dir / "splits.json");
    out << j.dump(2) << "\n";
  }
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.blocks < 2) throw ValidationError("need at least two blocks");
  if (config.nodes_per_block < 4) throw ValidationError("need at least four nodes per block");
  if (!(config.p_in > config.p_out)) throw ValidationError("p_in must exceed p_out");
  if (config.p_in > 1.0 || config.p_out < 0.0) throw ValidationError("probabilities out of range");
  if (config.noise_rate < 0.0) throw ValidationError("noise_rate must be non-negative");
  if (config.feature_dim < 1) throw ValidationError("feature_dim must be positive");

  const NodeId n = static_cast<NodeId>(config.blocks * config.nodes_per_block);
  Rng rng(config.seed);

  std::vector<int> block_of(static_cast<size_t>(n));
  for (NodeId v = 0; v < n; ++v) block_of[static_cast<size_t>(v)] = v / config.nodes_per_block;

  std::set<Edge> edge_set;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      const double p =
          block_of[static_cast<size_t>(i)] == block_of[static_cast<size_t>(j)] ? config.p_in
                                                                               : config.p_out;
      if (rng.uniform() < p) edge_set.insert(Edge(i, j));
    }
  }

  // Planted inter-class noise on top of the SBM draw.
  const auto planted_count =
      static_cast<std::size_t>(std::llround(config.noise_rate * static_cast<double>(edge_set.size())));
  std::vector<Edge> planted;
  std::size_t attempts = 0;
  while (planted.size() < planted_count && attempts < 1000 * (planted_count + 1)) {
    ++attempts;
    const NodeId i = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
    const NodeId j = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
    if (i == j) continue;
    if (block_of[static_cast<size_t>(i)] == block_of[static_cast<size_t>(j)]) continue;
    const Edge e(i, j);
    if (edge_set.count(e)) continue;
    edge_set.insert(e);
    planted.push_back(e);
  }
  std::sort(planted.begin(), planted.end());

  // Class-correlated features: unit-variance Gaussians around axis-aligned
  // class means.
  constexpr double kFeatureMean = 1.5;
  Eigen::MatrixXd features(n, config.feature_dim);
  for (NodeId v = 0; v < n; ++v) {
    for (int j = 0; j < config.feature_dim; ++j) features(v, j) = rng.normal();
    features(v, block_of[static_cast<size_t>(v)] % config.feature_dim) += kFeatureMean;
  }

  // Stratified 25/25/50 split, shuffled per class.
  std::vector<NodeId> train, val, test;
  for (int c = 0; c < config.blocks; ++c) {
    std::vector<NodeId> members;
    for (NodeId v = 0; v < n; ++v)
      if (block_of[static_cast<size_t>(v)] == c) members.push_back(v);
    rng.shuffle(members);
    const size_t n_train = std::max<size_t>(1, members.size() / 4);
    const size_t n_val = std::max<size_t>(1, members.size() / 4);
    for (size_t i = 0; i < members.size(); ++i) {
      if (i < n_train)
        train.push_back(members[i]);
      else if (i < n_train + n_val)
        val.push_back(members[i]);
      else
        test.push_back(members[i]);
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  std::sort(test.begin(), test.end());

  std::vector<Edge> edges(edge_set.begin(), edge_set.end());
  AttributedGraph graph(n, std::move(edges), std::move(features));
  LabeledSplit split(std::vector<int>(block_of.begin(), block_of.end()), std::move(train),
                     std::move(val), std::move(test), config.blocks);
  return SyntheticDataset{std::move(graph), std::move(split), std::move(planted),
                          std::move(block_of)};
}

void emit_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data) {
  emit_dataset(dir, data.graph, data.split);
  nlohmann::json j;
  auto& planted = j["planted_inter_class_edges"];
  planted = nlohmann::json::array();
  for (const Edge& e : data.planted_edges) planted.push_back({e.a, e.b});
  j["blocks"] = data.block_of;
  std::ofstream out(dir / "ground_truth.json");
  out << j.dump(2) << "\n";
}

}  // namespace sgcinf
