#include "sgcinf/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "sgcinf/influence.hpp"
#include "sgcinf/io.hpp"
#include "sgcinf/perturbation.hpp"
#include "sgcinf/rng.hpp"

namespace sgcinf {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::PruneNegative: return "prune-negative";
    case Strategy::AttackPositive: return "attack-positive";
    case Strategy::Random: return "random";
    case Strategy::Degree: return "degree";
  }
  return "unknown";
}

namespace {

// Probe-based eval influence for every candidate: one shared solve, then a
// gradient-difference dot per target. No per-target CG.
std::vector<PlanItem> rank_candidates(const AttributedGraph& graph, const LabeledSplit& split,
                                      const SgcModel& model, const std::vector<Target>& candidates,
                                      bool ascending) {
  InfluenceEngine engine(model, graph, split);
  const EvalProbe probe = engine.make_probe(split.val());
  std::vector<PlanItem> items;
  items.reserve(candidates.size());
  for (const Target& t : candidates) {
    const PerturbationDelta delta =
        t.kind == TargetKind::EdgeRemoval
            ? delta_edge_removal(graph, model.k, Edge(t.a, t.b))
            : delta_node_removal(graph, model.k, t.a);
    const double influence = engine.representation_shift(delta, probe.eval_set) +
                             engine.eval_influence_of(probe, engine.perturbation_gradient(delta));
    items.push_back({t, influence});
  }
  auto key = [](const PlanItem& it) { return std::tie(it.estimated_influence, it.target.a, it.target.b); };
  if (ascending)
    std::sort(items.begin(), items.end(), [&](const PlanItem& x, const PlanItem& y) {
      return key(x) < key(y);
    });
  else
    std::sort(items.begin(), items.end(), [&](const PlanItem& x, const PlanItem& y) {
      if (x.estimated_influence != y.estimated_influence)
        return x.estimated_influence > y.estimated_influence;
      return std::tie(x.target.a, x.target.b) < std::tie(y.target.a, y.target.b);
    });
  return items;
}

std::vector<Target> edge_targets(const AttributedGraph& graph) {
  std::vector<Target> out;
  out.reserve(graph.edges().size());
  for (const Edge& e : graph.edges()) out.push_back(Target::edge(e));
  return out;
}

std::vector<Target> training_node_targets(const LabeledSplit& split) {
  std::vector<Target> out;
  out.reserve(split.train().size());
  for (NodeId v : split.train()) out.push_back(Target::node(v));
  return out;
}

}  // namespace

EditPlan plan_prune_negative_edges(const AttributedGraph& graph, const LabeledSplit& split, int k,
                                   const TrainConfig& config, int budget) {
  if (budget < 0 || static_cast<size_t>(budget) > graph.edges().size())
    throw ValidationError("budget must lie in [0, |E|]");
  const SgcModel model = train(propagate(graph, k), split, config);
  std::vector<PlanItem> ranked =
      rank_candidates(graph, split, model, edge_targets(graph), /*ascending=*/true);

  EditPlan plan;
  plan.strategy = Strategy::PruneNegative;
  for (const PlanItem& item : ranked) {
    if (item.estimated_influence >= 0.0) break;  // stop early when none remain
    if (static_cast<int>(plan.items.size()) == budget) break;
    plan.items.push_back(item);
  }
  return plan;
}

EditPlan plan_attack(const AttributedGraph& graph, const LabeledSplit& split, int k,
                     const TrainConfig& config, const AttackOptions& opts) {
  if (!opts.count && !(opts.rate > 0.0 && opts.rate <= 1.0))
    throw ValidationError("rate must lie in (0, 1]");

  std::vector<Target> pool = opts.kind == AttackKind::Edges ? edge_targets(graph)
                                                            : training_node_targets(split);
  const size_t want =
      opts.count ? static_cast<size_t>(*opts.count)
                 : static_cast<size_t>(std::ceil(opts.rate * static_cast<double>(pool.size())));
  if (want > pool.size()) throw ValidationError("removal count exceeds the candidate pool");

  EditPlan plan;
  switch (opts.baseline) {
    case AttackBaseline::None: {
      const SgcModel model = train(propagate(graph, k), split, config);
      std::vector<PlanItem> ranked = rank_candidates(graph, split, model, pool,
                                                     /*ascending=*/false);
      ranked.resize(want);
      plan.strategy = Strategy::AttackPositive;
      plan.items = std::move(ranked);
      break;
    }
    case AttackBaseline::Random: {
      Rng rng(opts.seed);
      rng.shuffle(pool);
      pool.resize(want);
      plan.strategy = Strategy::Random;
      for (const Target& t : pool)
        plan.items.push_back({t, std::numeric_limits<double>::quiet_NaN()});
      break;
    }
    case AttackBaseline::Degree: {
      auto degree_of = [&](const Target& t) {
        return t.kind == TargetKind::EdgeRemoval ? graph.degree(t.a) + graph.degree(t.b)
                                                 : graph.degree(t.a);
      };
      std::stable_sort(pool.begin(), pool.end(), [&](const Target& x, const Target& y) {
        const int dx = degree_of(x), dy = degree_of(y);
        if (dx != dy) return dx > dy;
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
      });
      pool.resize(want);
      plan.strategy = Strategy::Degree;
      for (const Target& t : pool)
        plan.items.push_back({t, std::numeric_limits<double>::quiet_NaN()});
      break;
    }
  }
  return plan;
}

TrajectoryReport run_trajectory(const AttributedGraph& graph, const LabeledSplit& split, int k,
                                const TrainConfig& config, const EditPlan& plan) {
  for (const PlanItem& item : plan.items) {
    if (item.target.kind == TargetKind::NodeRemoval && !split.in_train(item.target.a))
      throw ValidationError("trajectory node removals must target training nodes");
    if (item.target.kind == TargetKind::SampleRemoval)
      throw ValidationError("trajectories operate on edges or nodes");
  }

  TrajectoryReport report;
  AttributedGraph current = graph;
  std::vector<NodeId> active_train = split.train();

  auto fit_and_measure = [&](int step, std::optional<Target> removed) {
    LabeledSplit cur_split(split.labels(), active_train, split.val(), split.test(),
                           split.num_classes());
    const SgcModel model = train(propagate(current, k), cur_split, config);
    const EvalMetrics metrics =
        evaluate(model.params, model.train_view.embeddings->Z, cur_split);
    report.steps.push_back(
        {step, removed, metrics.val_accuracy, metrics.test_accuracy, metrics.val_loss});
    return model;
  };

  try {
    fit_and_measure(0, std::nullopt);  // unedited baseline

    std::vector<PlanItem> queue = plan.items;
    int applied = 0;
    while (applied < static_cast<int>(plan.items.size())) {
      if (plan.recompute_every > 0 && applied > 0 && applied % plan.recompute_every == 0 &&
          (plan.strategy == Strategy::PruneNegative || plan.strategy == Strategy::AttackPositive)) {
        // Re-rank what is left against the current graph.
        LabeledSplit cur_split(split.labels(), active_train, split.val(), split.test(),
                               split.num_classes());
        const SgcModel model = train(propagate(current, k), cur_split, config);
        std::vector<Target> remaining;
        for (size_t i = static_cast<size_t>(applied); i < queue.size(); ++i)
          remaining.push_back(queue[i].target);
        std::vector<PlanItem> ranked =
            rank_candidates(current, cur_split, model, remaining,
                            plan.strategy == Strategy::PruneNegative);
        std::copy(ranked.begin(), ranked.end(), queue.begin() + applied);
      }

      const Target target = queue[static_cast<size_t>(applied)].target;
      if (target.kind == TargetKind::EdgeRemoval) {
        current = current.remove_edge(Edge(target.a, target.b));
      } else {
        current = current.remove_node(target.a);
        active_train.erase(
            std::find(active_train.begin(), active_train.end(), target.a));
      }
      ++applied;
      fit_and_measure(applied, target);
    }
  } catch (const NonConvergence& e) {
    report.aborted = true;
    report.abort_reason = e.what();
  }
  return report;
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryReport& report) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "step,target_type,target_a,target_b,val_accuracy,test_accuracy,val_loss\n";
  for (const TrajectoryStep& s : report.steps) {
    out << s.step << ',';
    if (s.removed)
      out << target_kind_name(s.removed->kind) << ',' << s.removed->a << ',' << s.removed->b;
    else
      out << "baseline,-1,-1";
    out << ',' << format_double(s.val_accuracy) << ',' << format_double(s.test_accuracy) << ','
        << format_double(s.val_loss) << "\n";
  }
}

}  // namespace sgcinf
