#include <doctest.h>

#include <chrono>
#include <cmath>

#include "sgcinf/dataset.hpp"
#include "sgcinf/influence.hpp"
#include "sgcinf/oracle.hpp"
#include "sgcinf/rng.hpp"
#include "support/test_oracles.hpp"

using namespace sgcinf;

namespace {

struct SmallInstance {
  AttributedGraph graph;
  LabeledSplit split;
  SgcModel model;
};

// Two feature-separated communities with a few cross links; big enough for
// non-trivial deltas, small enough for per-test retraining.
SmallInstance make_instance(std::uint64_t seed, int n, double lambda, int k = 2) {
  Rng rng(seed);
  std::vector<Edge> edges;
  const int half = n / 2;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) {
      const bool same = (i < half) == (j < half);
      if (rng.uniform() < (same ? 0.35 : 0.06)) edges.emplace_back(i, j);
    }
  Eigen::MatrixXd x(n, 2);
  for (NodeId v = 0; v < n; ++v) {
    x(v, 0) = rng.normal() + (v < half ? 1.0 : -1.0);
    x(v, 1) = rng.normal();
  }
  std::vector<int> labels(static_cast<size_t>(n));
  for (NodeId v = 0; v < n; ++v) labels[static_cast<size_t>(v)] = v < half ? 0 : 1;
  std::vector<NodeId> train_ids, val_ids;
  for (NodeId v = 0; v < n; ++v) (v % 2 == 0 ? train_ids : val_ids).push_back(v);

  AttributedGraph graph(n, std::move(edges), std::move(x));
  LabeledSplit split(std::move(labels), std::move(train_ids), std::move(val_ids), {}, 2);
  SgcModel model = train(propagate(graph, k), split, {lambda, 1e-10, 300});
  return SmallInstance{std::move(graph), std::move(split), std::move(model)};
}

}  // namespace

TEST_SUITE_BEGIN("influence");

TEST_CASE("saturated sample has zero influence") {
  SmallInstance inst = make_instance(3, 12, 0.1);
  // force exact saturation: a huge margin makes p equal e_y bit-exactly
  SgcModel rigged = inst.model;
  rigged.params.W.setZero();
  rigged.params.b << 800.0, 0.0;
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
  const InfluenceEstimate est = influence_remove_sample(rigged, inst.split, z, 0);
  CHECK(est.param_change.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("removal influence is the exact negation of addition") {
  SmallInstance inst = make_instance(5, 12, 0.1);
  InfluenceEngine engine(inst.model, inst.graph, inst.split);
  const NodeId v = inst.split.train()[1];
  const Eigen::VectorXd z = engine.embeddings().row(v);
  const Eigen::VectorXd g_remove = engine.sample_perturbation_gradient(z, inst.split.label(v));
  // adding the same sample contributes the opposite perturbation gradient
  const Eigen::VectorXd minus = -engine.solve(g_remove) / engine.norm_n();
  const Eigen::VectorXd plus = -engine.solve(-g_remove) / engine.norm_n();
  CHECK((minus + plus).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample influence direction matches epsilon-downweighted retraining") {
  SmallInstance inst = make_instance(7, 10, 0.1, 1);
  const NodeId v = inst.split.train()[2];
  const InfluenceEstimate est = influence_remove_sample(
      inst.model, inst.split, inst.model.train_view.embeddings->Z.row(v), inst.split.label(v));
  const Eigen::VectorXd probe = epsilon_downweight_probe(inst.model, inst.split, v, 1e-4);
  const double cosine =
      est.param_change.dot(probe) / (est.param_change.norm() * probe.norm());
  CHECK(cosine >= 0.999);
}

TEST_CASE("edge in a far component has zero influence") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(6, 6);
  AttributedGraph g(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}}, x);
  LabeledSplit split({0, 1, 0, 1, 0, 1}, {0, 1, 2}, {3}, {}, 2);
  const SgcModel model = train(propagate(g, 2), split, {0.5, 1e-10, 200});
  const PerturbationDelta delta = delta_edge_removal(g, 2, {3, 4});
  // support exists around nodes 3-5 but no training node is affected
  const InfluenceEstimate est = influence_edge_removal(model, split, delta);
  CHECK(est.param_change.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("per-node decomposition equals the direct summed form") {
  SmallInstance inst = make_instance(11, 14, 0.2);
  InfluenceEngine engine(inst.model, inst.graph, inst.split, CgOptions{1e-14, 0});
  for (const Edge& e : inst.graph.edges()) {
    const PerturbationDelta delta = delta_edge_removal(inst.graph, inst.model.k, e);
    const InfluenceEstimate direct = engine.estimate_from_delta(delta);

    // per-node decomposition: sum_k I(+(z_k + delta_k)) + I(-z_k)
    Eigen::VectorXd decomposed = Eigen::VectorXd::Zero(inst.model.params.dim());
    for (int i = 0; i < delta.size(); ++i) {
      const NodeId v = delta.nodes[static_cast<size_t>(i)];
      if (!inst.split.in_train(v)) continue;
      const Eigen::VectorXd z = engine.embeddings().row(v);
      const Eigen::VectorXd z_new = z + delta.rows.row(i).transpose();
      const int y = inst.split.label(v);
      decomposed += -engine.solve(sample_gradient(inst.model.params, z_new, y)) / engine.norm_n();
      decomposed += engine.solve(sample_gradient(inst.model.params, z, y)) / engine.norm_n();
    }
    const double scale = std::max({1.0, direct.param_change.norm(), decomposed.norm()});
    REQUIRE((direct.param_change - decomposed).norm() <= 1e-12 * scale);
  }
}

TEST_CASE("edge influence tracks the retraining oracle at lambda=0.1") {
  SmallInstance inst = make_instance(14, 12, 0.1);
  InfluenceEngine engine(inst.model, inst.graph, inst.split);
  int tight = 0, total = 0;
  for (const Edge& e : inst.graph.edges()) {
    const ActualInfluence actual = retrain_after_removal(inst.model, inst.graph, inst.split,
                                                         Target::edge(e), inst.split.val());
    if (actual.param_change.norm() < 1e-6) continue;
    const InfluenceEstimate est =
        engine.estimate_from_delta(delta_edge_removal(inst.graph, inst.model.k, e));
    const double rel =
        (actual.param_change - est.param_change).norm() / actual.param_change.norm();
    ++total;
    if (rel <= 0.1) ++tight;
    CHECK(rel <= 0.2);  // worst-case envelope on this frozen instance
  }
  REQUIRE(total >= 10);
  CHECK(4 * tight >= 3 * total);  // typical edge meets the 0.1 bar
}

TEST_CASE("isolated non-training node has zero influence") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(4, 4);
  AttributedGraph g(4, {{0, 1}, {1, 2}}, x);
  LabeledSplit split({0, 1, 0, 1}, {0, 1}, {2}, {}, 2);
  const SgcModel model = train(propagate(g, 1), split, {0.5, 1e-10, 200});
  const PerturbationDelta delta = delta_node_removal(g, 1, 3);
  const InfluenceEstimate est = influence_node_removal(model, split, delta, 3);
  CHECK(est.param_change.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("degree-1 non-training node equals its edge removal") {
  // pendant node 6 hangs off node 0 and sits in the validation split
  Rng rng(17);
  std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}, {0, 2}, {3, 4}, {4, 5}, {0, 6}};
  Eigen::MatrixXd x(7, 2);
  for (int i = 0; i < 7; ++i) {
    x(i, 0) = rng.normal() + (i < 3 ? 1.0 : -1.0);
    x(i, 1) = rng.normal();
  }
  AttributedGraph g(7, std::move(edges), std::move(x));
  LabeledSplit split({0, 0, 0, 1, 1, 1, 0}, {0, 1, 3, 4}, {2, 5, 6}, {}, 2);
  const SgcModel model = train(propagate(g, 2), split, {0.2, 1e-10, 200});
  InfluenceEngine engine(model, g, split, CgOptions{1e-14, 0});

  const InfluenceEstimate by_node = engine.estimate_from_delta(delta_node_removal(g, 2, 6));
  const InfluenceEstimate by_edge = engine.estimate_from_delta(delta_edge_removal(g, 2, {0, 6}));
  const double scale = std::max(1.0, by_edge.param_change.norm());
  CHECK((by_node.param_change - by_edge.param_change).norm() <= 1e-12 * scale);
}

TEST_CASE("training-node removal tracks the retraining oracle at lambda=0.1") {
  // Removing a training node is a 1/N-sized perturbation, so the relative
  // error varies with the node's weight; on this frozen instance the oracle
  // puts nodes 4 and 8 near 0.10 while every direction stays aligned.
  SmallInstance inst = make_instance(20, 12, 0.1);
  InfluenceEngine engine(inst.model, inst.graph, inst.split);
  for (NodeId v : inst.split.train()) {
    const ActualInfluence actual = retrain_after_removal(inst.model, inst.graph, inst.split,
                                                         Target::node(v), inst.split.val());
    if (actual.param_change.norm() < 1e-6) continue;
    const InfluenceEstimate est =
        engine.estimate_from_delta(delta_node_removal(inst.graph, inst.model.k, v));
    const double rel =
        (actual.param_change - est.param_change).norm() / actual.param_change.norm();
    const double cosine = actual.param_change.dot(est.param_change) /
                          (actual.param_change.norm() * est.param_change.norm());
    CHECK(cosine >= 0.95);
    CHECK(rel <= 0.35);
    if (v == 4 || v == 8) CHECK(rel <= 0.15);
  }
}

TEST_CASE("eval probe: zero gradient, lambda dominance, and trivial dots") {
  SmallInstance inst = make_instance(23, 10, 0.1);
  InfluenceEngine engine(inst.model, inst.graph, inst.split);

  // exact saturation makes the eval gradient exactly zero
  SgcModel rigged = inst.model;
  rigged.params.W.setZero();
  rigged.params.b.setZero();
  rigged.params.W(0, 0) = 800.0;
  rigged.params.W(0, 1) = -800.0;
  std::vector<NodeId> class0_val;
  for (NodeId v : inst.split.val())
    if (inst.split.label(v) == 0 && rigged.train_view.embeddings->Z(v, 0) > 0.1)
      class0_val.push_back(v);
  if (class0_val.size() >= 2) {
    const EvalProbe probe = make_eval_probe(rigged, inst.split, class0_val);
    CHECK(probe.s.cwiseAbs().maxCoeff() == 0.0);
  }

  // eval_influence trivia
  const EvalProbe probe = engine.make_probe(inst.split.val());
  CHECK(eval_influence(probe, Eigen::VectorXd::Zero(probe.s.size())) == 0.0);
  Eigen::VectorXd g(probe.s.size());
  Rng rng(5);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  CHECK(eval_influence(probe, 2.5 * g) == doctest::Approx(2.5 * eval_influence(probe, g)));

  // lambda huge: s ~ grad f / lambda
  SgcModel stiff = train(*inst.model.train_view.embeddings, inst.split, {1e6, 1e-10, 100});
  const EvalProbe stiff_probe = make_eval_probe(stiff, inst.split, inst.split.val());
  CHECK((stiff_probe.s - stiff_probe.eval_grad / 1e6).norm() <=
        1e-4 * (stiff_probe.eval_grad / 1e6).norm());
}

TEST_CASE("probe path equals the direct dot with the parameter change") {
  SmallInstance inst = make_instance(29, 14, 0.1);
  InfluenceEngine engine(inst.model, inst.graph, inst.split);
  const EvalProbe probe = engine.make_probe(inst.split.val());
  for (const Edge& e : inst.graph.edges()) {
    const PerturbationDelta delta = delta_edge_removal(inst.graph, inst.model.k, e);
    const Eigen::VectorXd g = engine.perturbation_gradient(delta);
    const InfluenceEstimate est = engine.estimate_from_delta(delta, &probe);
    // the probe-path parameter term equals <grad f, param_change>
    const double dot = probe.eval_grad.dot(est.param_change);
    REQUIRE(std::abs(engine.eval_influence_of(probe, g) - dot) <=
            1e-9 * std::max(1.0, std::abs(dot)));
    // and the reported estimate is the exact representational shift plus it
    const double want = engine.representation_shift(delta, probe.eval_set) +
                        engine.eval_influence_of(probe, g);
    REQUIRE(*est.eval_change == want);
  }
}

TEST_CASE("a planted noisy inter-class edge lowers validation loss when removed") {
  // One planted cross-block edge per seed, on an otherwise clean two-block
  // graph. The retraining oracle fixes the true loss direction; the estimate
  // must carry the same sign in at least 9 of 10 seeds.
  int negative = 0, sign_matches = 0;
  const int seeds = 10;
  for (int trial = 0; trial < seeds; ++trial) {
    SyntheticConfig cfg;
    cfg.seed = 500 + static_cast<std::uint64_t>(trial);
    cfg.blocks = 2;
    cfg.nodes_per_block = 50;
    cfg.p_in = 0.1;
    cfg.p_out = 0.002;
    cfg.noise_rate = 0.0;
    cfg.feature_dim = 4;
    const SyntheticDataset base = generate_synthetic(cfg);

    // plant one edge between the most block-typical (degree >= 2) node of
    // each side: clean cross-class contamination
    auto typical = [&](int block) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
      mean(block % 4) = 1.5;
      NodeId best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (NodeId v = static_cast<NodeId>(block * 50); v < (block + 1) * 50; ++v) {
        if (base.graph.degree(v) < 2) continue;
        const double dist = (base.graph.features().row(v).transpose() - mean).norm();
        if (dist < best_dist) {
          best_dist = dist;
          best = v;
        }
      }
      return best;
    };
    const Edge planted(typical(0), typical(1));
    if (base.graph.has_edge(planted)) continue;
    std::vector<Edge> edges = base.graph.edges();
    edges.push_back(planted);
    const AttributedGraph graph(base.graph.num_nodes(), std::move(edges),
                                base.graph.features());

    const SgcModel model = train(propagate(graph, 2), base.split, {0.1, 1e-9, 300});
    InfluenceEngine engine(model, graph, base.split);
    const EvalProbe probe = engine.make_probe(base.split.val());
    const InfluenceEstimate est =
        engine.estimate_from_delta(delta_edge_removal(graph, 2, planted), &probe);
    const ActualInfluence actual = retrain_after_removal(model, graph, base.split,
                                                         Target::edge(planted), base.split.val());
    if (*est.eval_change < 0) ++negative;
    if ((*est.eval_change < 0) == (actual.eval_change < 0)) ++sign_matches;
  }
  CHECK(negative >= 9);
  CHECK(sign_matches >= 9);
}

TEST_CASE("batch: empty, duplicates, failure aggregation") {
  SmallInstance inst = make_instance(31, 10, 0.1);
  InfluenceEngine engine(inst.model, inst.graph, inst.split);
  const EvalProbe probe = engine.make_probe(inst.split.val());

  CHECK(batch_influences(inst.model, inst.graph, inst.split, {}, probe).estimates.empty());

  const Edge e = inst.graph.edges()[0];
  const std::vector<Target> dup{Target::edge(e), Target::edge(e)};
  const BatchInfluences twice = batch_influences(inst.model, inst.graph, inst.split, dup, probe);
  REQUIRE(twice.estimates.size() == 2);
  CHECK(twice.estimates[0].param_change == twice.estimates[1].param_change);
  CHECK(*twice.estimates[0].eval_change == *twice.estimates[1].eval_change);

  // a missing edge fails its slot but not the batch
  const std::vector<Target> mixed{Target::edge(e), Target::edge(Edge(0, 9))};
  const BatchInfluences part = batch_influences(inst.model, inst.graph, inst.split, mixed, probe);
  REQUIRE(part.estimates.size() == 2);
  REQUIRE(part.failures.size() == 1);
  CHECK(part.failures[0].first == 1);
  CHECK(part.estimates[0].param_change.size() > 0);
}

TEST_CASE("all edges of a 50-node synthetic batch in under ten seconds") {
  SyntheticConfig cfg;
  cfg.seed = 99;
  cfg.nodes_per_block = 25;
  cfg.p_in = 0.2;
  cfg.p_out = 0.02;
  cfg.feature_dim = 4;
  const SyntheticDataset data = generate_synthetic(cfg);
  const SgcModel model = train(propagate(data.graph, 2), data.split, {0.1, 1e-9, 300});
  const EvalProbe probe = make_eval_probe(model, data.split, data.split.val());
  std::vector<Target> targets;
  for (const Edge& e : data.graph.edges()) targets.push_back(Target::edge(e));

  const auto start = std::chrono::steady_clock::now();
  const BatchInfluences batch = batch_influences(model, data.graph, data.split, targets, probe);
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  CHECK(batch.failures.empty());
  CHECK(batch.estimates.size() == targets.size());
  CHECK(elapsed.count() < 10.0);
}

TEST_SUITE_END();
