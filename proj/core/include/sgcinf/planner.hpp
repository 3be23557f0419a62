#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sgcinf/graph.hpp"
#include "sgcinf/model.hpp"
#include "sgcinf/types.hpp"

namespace sgcinf {

enum class Strategy { PruneNegative, AttackPositive, Random, Degree };

const char* strategy_name(Strategy s);

struct PlanItem {
  Target target;
  double estimated_influence = 0;  // NaN for baselines that never estimate
};

/// Ordered removal list. recompute_every = 0 keeps the planning-time ranking;
/// r > 0 re-ranks the remaining items every r applied removals.
struct EditPlan {
  Strategy strategy = Strategy::PruneNegative;
  std::vector<PlanItem> items;
  int recompute_every = 0;
};

/// Ranks all edges by estimated validation-loss influence ascending and keeps
/// at most `budget` strictly negative ones.
EditPlan plan_prune_negative_edges(const AttributedGraph& graph, const LabeledSplit& split, int k,
                                   const TrainConfig& config, int budget);

enum class AttackBaseline { None, Random, Degree };
enum class AttackKind { Edges, Nodes };

struct AttackOptions {
  AttackKind kind = AttackKind::Edges;
  double rate = 0.05;        // fraction of the candidate pool
  std::optional<int> count;  // overrides rate when set
  AttackBaseline baseline = AttackBaseline::None;
  std::uint64_t seed = 0;
};

/// Influence-guided attack (baseline None) or the Random/Degree comparators.
/// Edge attacks draw from all edges; node attacks from the training nodes.
EditPlan plan_attack(const AttributedGraph& graph, const LabeledSplit& split, int k,
                     const TrainConfig& config, const AttackOptions& opts);

struct TrajectoryStep {
  int step = 0;
  std::optional<Target> removed;  // absent for the step-0 baseline
  double val_accuracy = 0;
  double test_accuracy = 0;
  double val_loss = 0;
};

struct TrajectoryReport {
  std::vector<TrajectoryStep> steps;
  bool aborted = false;
  std::string abort_reason;
};

/// Applies removals cumulatively, retraining at every step. Node removals
/// must target training nodes; the test/val sets stay fixed throughout. A
/// NonConvergence aborts with the partial report.
TrajectoryReport run_trajectory(const AttributedGraph& graph, const LabeledSplit& split, int k,
                                const TrainConfig& config, const EditPlan& plan);

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryReport& report);

}  // namespace sgcinf
