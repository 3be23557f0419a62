#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgcinf/dataset.hpp"
#include "sgcinf/model.hpp"
#include "sgcinf/rng.hpp"

using namespace sgcinf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("sgcinf_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

void write_minimal_bundle(const fs::path& dir) {
  write_file(dir / "edges.tsv", "0\t1\n1\t2\n");
  write_file(dir / "features.csv", "1.5,0.25\n-0.75,2\n0,1\n");
  write_file(dir / "labels.tsv", "0\t0\n1\t1\n2\t0\n");
  write_file(dir / "splits.json", R"({"train":[0,1],"val":[2],"test":[]})");
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("minimal bundle round-trips bit-identically through emit+ingest") {
  TempDir a("bundle_a"), b("bundle_b");
  write_minimal_bundle(a.path);
  const DatasetBundle bundle = ingest_dataset(a.path);
  CHECK(bundle.graph.num_nodes() == 3);
  CHECK(bundle.graph.edges().size() == 2);
  CHECK(bundle.split.num_classes() == 2);

  emit_dataset(b.path, bundle.graph, bundle.split);
  const DatasetBundle again = ingest_dataset(b.path);
  CHECK(again.graph.features() == bundle.graph.features());
  CHECK(again.graph.edges() == bundle.graph.edges());
  CHECK(again.split.train() == bundle.split.train());

  // a second emit of the re-ingested bundle is byte-identical
  TempDir c("bundle_c");
  emit_dataset(c.path, again.graph, again.split);
  for (const char* name : {"edges.tsv", "features.csv", "labels.tsv", "splits.json"})
    CHECK(slurp(b.path / name) == slurp(c.path / name));
}

TEST_CASE("overlapping splits are rejected") {
  TempDir dir("bundle_overlap");
  write_minimal_bundle(dir.path);
  write_file(dir.path / "splits.json", R"({"train":[0,1],"val":[1],"test":[2]})");
  CHECK_THROWS_AS(ingest_dataset(dir.path), ValidationError);
}

TEST_CASE("parse errors carry file and line") {
  TempDir dir("bundle_parse");
  write_minimal_bundle(dir.path);
  write_file(dir.path / "features.csv", "1.5,0.25\n-0.75,banana\n0,1\n");
  try {
    ingest_dataset(dir.path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("features.csv") != std::string::npos);
  }

  write_minimal_bundle(dir.path);
  write_file(dir.path / "edges.tsv", "0\t1\n1 2\n");
  CHECK_THROWS_AS(ingest_dataset(dir.path), ParseError);
}

TEST_CASE("validation failures: range and column mismatches") {
  TempDir dir("bundle_invalid");
  write_minimal_bundle(dir.path);
  write_file(dir.path / "edges.tsv", "0\t7\n");
  CHECK_THROWS_AS(ingest_dataset(dir.path), ValidationError);

  write_minimal_bundle(dir.path);
  write_file(dir.path / "labels.tsv", "0\t0\n9\t1\n");
  CHECK_THROWS_AS(ingest_dataset(dir.path), ValidationError);

  write_minimal_bundle(dir.path);
  write_file(dir.path / "features.csv", "1,2\n3\n4,5\n");
  CHECK_THROWS_AS(ingest_dataset(dir.path), ParseError);

  write_minimal_bundle(dir.path);
  write_file(dir.path / "splits.json", R"({"train":[0],"val":[2]})");
  CHECK_THROWS_AS(ingest_dataset(dir.path), ValidationError);
}

TEST_CASE("row normalization option") {
  TempDir dir("bundle_norm");
  write_minimal_bundle(dir.path);
  IngestOptions opts;
  opts.row_normalize_features = true;
  const DatasetBundle bundle = ingest_dataset(dir.path, opts);
  CHECK(bundle.graph.features()(0, 0) == doctest::Approx(1.5 / 1.75));
}

TEST_CASE("synthetic generation is deterministic") {
  SyntheticConfig cfg;
  cfg.seed = 42;
  cfg.nodes_per_block = 30;
  const SyntheticDataset a = generate_synthetic(cfg);
  const SyntheticDataset b = generate_synthetic(cfg);
  CHECK(a.graph.edges() == b.graph.edges());
  CHECK(a.graph.features() == b.graph.features());
  CHECK(a.planted_edges == b.planted_edges);
  CHECK(a.split.train() == b.split.train());

  TempDir d1("synth_1"), d2("synth_2");
  emit_synthetic(d1.path, a);
  emit_synthetic(d2.path, b);
  for (const char* name :
       {"edges.tsv", "features.csv", "labels.tsv", "splits.json", "ground_truth.json"})
    CHECK(slurp(d1.path / name) == slurp(d2.path / name));

  cfg.seed = 43;
  const SyntheticDataset c = generate_synthetic(cfg);
  CHECK(a.graph.edges() != c.graph.edges());
}

TEST_CASE("p_out = 0 with no noise leaves zero inter-class edges") {
  SyntheticConfig cfg;
  cfg.seed = 9;
  cfg.p_out = 0.0;
  cfg.noise_rate = 0.0;
  cfg.nodes_per_block = 40;
  const SyntheticDataset data = generate_synthetic(cfg);
  CHECK(data.planted_edges.empty());
  for (const Edge& e : data.graph.edges())
    CHECK(data.block_of[static_cast<size_t>(e.a)] == data.block_of[static_cast<size_t>(e.b)]);
}

TEST_CASE("planted noise edges are inter-class and recorded") {
  SyntheticConfig cfg;
  cfg.seed = 10;
  const SyntheticDataset data = generate_synthetic(cfg);
  CHECK(!data.planted_edges.empty());
  for (const Edge& e : data.planted_edges) {
    CHECK(data.block_of[static_cast<size_t>(e.a)] != data.block_of[static_cast<size_t>(e.b)]);
    CHECK(data.graph.has_edge(e));
  }
  TempDir dir("synth_gt");
  emit_synthetic(dir.path, data);
  const std::string gt = slurp(dir.path / "ground_truth.json");
  CHECK(gt.find("planted_inter_class_edges") != std::string::npos);
}

TEST_CASE("default synthetic instance supports an accurate SGC") {
  const SyntheticDataset data = generate_synthetic(SyntheticConfig{});
  const SgcModel model = train(propagate(data.graph, 2), data.split, {0.1, 1e-8, 300});
  const EvalMetrics m = evaluate(model.params, model.train_view.embeddings->Z, data.split);
  CHECK(m.test_accuracy >= 0.9);
}

TEST_CASE("generator rejects bad configurations") {
  SyntheticConfig cfg;
  cfg.p_in = 0.01;
  cfg.p_out = 0.05;
  CHECK_THROWS_AS(generate_synthetic(cfg), ValidationError);
  cfg = SyntheticConfig{};
  cfg.blocks = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), ValidationError);
}

TEST_SUITE_END();
