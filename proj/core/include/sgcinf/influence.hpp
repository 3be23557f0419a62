#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgcinf/model.hpp"
#include "sgcinf/perturbation.hpp"

namespace sgcinf {

/// Estimated parameter change for one removal, directly comparable to the
/// retrained difference theta(-target) - theta. eval_change, when present,
/// is the full first-order prediction of the eval-loss change: the exact
/// representational shift of the eval nodes (delta is known without any
/// retraining) plus the parameter-mediated term <grad f, param_change>.
/// Positive means removing the element is expected to increase that loss.
struct InfluenceEstimate {
  Target target;
  Eigen::VectorXd param_change;
  std::optional<double> eval_change;
};

/// Shared H^{-1} application against the gradient of f = total cross-entropy
/// over a fixed evaluation node set.
struct EvalProbe {
  std::vector<NodeId> eval_set;
  Eigen::VectorXd eval_grad;  // grad_theta f at the fitted parameters
  Eigen::VectorXd s;          // H^{-1} eval_grad
  double norm_n = 0;
};

/// Influence estimators over one fitted model. Caches the Hessian operator
/// (per-sample probabilities) once; every estimate is a fresh CG solve.
/// Removal estimates are linear in the perturbation gradient, so the joint
/// effect of several removals is taken as the sum of their single-removal
/// estimates — an additivity assumption, not a claim about the retrained
/// ground truth.
class InfluenceEngine {
 public:
  InfluenceEngine(const SgcModel& model, const AttributedGraph& graph, const LabeledSplit& split,
                  CgOptions cg = {});
  /// Graph-free variant: only sample-removal estimates are available.
  InfluenceEngine(const SgcModel& model, const LabeledSplit& split, CgOptions cg = {});

  const SgcModel& model() const { return *model_; }
  double norm_n() const { return prob_.norm_n; }
  const Eigen::MatrixXd& embeddings() const { return *Z_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// Combined perturbation gradient g of a removal: the parameter-change
  /// estimate is -(1/N) H^{-1} g. For edges this is the summed gradient
  /// difference over affected training nodes; node removals additionally
  /// subtract the removed node's own gradient and skip its row in the sum.
  Eigen::VectorXd perturbation_gradient(const PerturbationDelta& delta) const;
  Eigen::VectorXd sample_perturbation_gradient(const Eigen::VectorXd& z, int y) const;

  EvalProbe make_probe(const std::vector<NodeId>& eval_set) const;
  /// Parameter-mediated part of the eval-loss change for a removal with
  /// combined gradient g: <grad f, param_change> = -(1/N) <s, g>.
  double eval_influence_of(const EvalProbe& probe, const Eigen::VectorXd& g) const;
  /// Exact eval-loss shift caused by the representation change alone,
  /// evaluated at the fitted parameters.
  double representation_shift(const PerturbationDelta& delta,
                              const std::vector<NodeId>& eval_set) const;

  InfluenceEstimate estimate(const Target& target, const EvalProbe* probe = nullptr) const;
  InfluenceEstimate estimate_from_delta(const PerturbationDelta& delta,
                                        const EvalProbe* probe = nullptr) const;

 private:
  const SgcModel* model_;
  const AttributedGraph* graph_ = nullptr;  // absent in the graph-free variant
  const LabeledSplit* split_;
  const Eigen::MatrixXd* Z_;
  ErmProblem prob_;
  std::unique_ptr<HessianOperator> hess_;
  CgOptions cg_;
};

// Spec-level single-target operations (each builds a throwaway engine; the
// engine interface is the batch-friendly path).

InfluenceEstimate influence_remove_sample(const SgcModel& model, const LabeledSplit& split,
                                          const Eigen::VectorXd& z_i, int y_i);

InfluenceEstimate influence_edge_removal(const SgcModel& model, const LabeledSplit& split,
                                         const PerturbationDelta& delta);

InfluenceEstimate influence_node_removal(const SgcModel& model, const LabeledSplit& split,
                                         const PerturbationDelta& delta, NodeId v_i);

EvalProbe make_eval_probe(const SgcModel& model, const LabeledSplit& split,
                          const std::vector<NodeId>& eval_set);

double eval_influence(const EvalProbe& probe, const Eigen::VectorXd& gradient_diff);

struct BatchInfluences {
  std::vector<InfluenceEstimate> estimates;  // input order; failed slots have empty param_change
  std::vector<std::pair<std::size_t, std::string>> failures;
};

BatchInfluences batch_influences(const SgcModel& model, const AttributedGraph& graph,
                                 const LabeledSplit& split, const std::vector<Target>& targets,
                                 const EvalProbe& probe);

void write_influence_csv(const std::filesystem::path& path,
                         const std::vector<InfluenceEstimate>& estimates);

}  // namespace sgcinf
