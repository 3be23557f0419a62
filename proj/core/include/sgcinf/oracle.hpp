#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgcinf/influence.hpp"
#include "sgcinf/model.hpp"

namespace sgcinf {

/// Ground truth for one removal: the retrained parameter difference and the
/// change in total cross-entropy over the designated eval set.
struct ActualInfluence {
  Target target;
  Eigen::VectorXd param_change;  // theta(-target) - theta
  double eval_change = 0;
  int retrain_iters = 0;
};

struct OracleOptions {
  /// Warm-start the retrain from the base parameters. Same tolerance either
  /// way; convexity makes the answer identical, this is a speed flag.
  bool warm_start = false;
};

/// Re-fits after applying the removal and returns the actual influence. The
/// retrained objective keeps the original (1/N) normalization so parameter
/// differences are commensurable with the estimator's scaling; a removed
/// training node's loss term is dropped, and the node is excluded from the
/// eval total (on both sides) if present there.
ActualInfluence retrain_after_removal(const SgcModel& base, const AttributedGraph& graph,
                                      const LabeledSplit& split, Target target,
                                      const std::vector<NodeId>& eval_set,
                                      const OracleOptions& opts = {});

/// Convenience form that fits the base model itself.
ActualInfluence retrain_after_removal(const AttributedGraph& graph, const LabeledSplit& split,
                                      int k, const TrainConfig& config, Target target,
                                      const std::vector<NodeId>& eval_set,
                                      const OracleOptions& opts = {});

/// Re-optimizes the epsilon-downweighted objective for training sample i and
/// returns (theta(eps) - theta)/eps. Converges to H^{-1} grad l(z_i, y_i) as
/// eps -> 0; both fits run at `probe_tol`. Requires 0 < |eps| < 1/N; negative
/// eps upweights (central-difference checks).
Eigen::VectorXd epsilon_downweight_probe(const SgcModel& base, const LabeledSplit& split,
                                         NodeId sample, double epsilon,
                                         double probe_tol = 1e-12);

/// Spearman rank correlation with average ranks for ties. Throws
/// DegenerateInput when either list is constant or shorter than 2.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct ValidationReport {
  std::vector<Target> targets;     // successfully evaluated, input order
  std::vector<double> estimated;   // estimated eval-loss change
  std::vector<double> actual;      // retrained minus original eval loss
  std::optional<double> rho;       // absent when undefined
  std::string rho_error;           // reason when rho is absent
  int n_failed = 0;
};

/// Estimates and retrains every target, pairs the eval-loss changes, and
/// computes their Spearman correlation. Per-target failures are counted and
/// excluded.
ValidationReport validate_influence(const AttributedGraph& graph, const LabeledSplit& split, int k,
                                    const TrainConfig& config, const std::vector<Target>& targets,
                                    const std::vector<NodeId>& eval_set);

void write_validation_csv(const std::filesystem::path& path, const ValidationReport& report);
void write_validation_summary(const std::filesystem::path& path, const ValidationReport& report);

}  // namespace sgcinf
