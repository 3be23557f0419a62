#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "sgcinf/graph.hpp"
#include "sgcinf/types.hpp"

namespace sgcinf {

/// Classifier parameters. The flattened view is class-major with the bias
/// last in each block: theta[c*(D+1)+d] = W(d,c), theta[c*(D+1)+D] = b(c).
struct ModelParams {
  Eigen::MatrixXd W;  // D x num_classes
  Eigen::VectorXd b;  // num_classes

  int feature_dim() const { return static_cast<int>(W.rows()); }
  int num_classes() const { return static_cast<int>(W.cols()); }
  int dim() const { return (feature_dim() + 1) * num_classes(); }

  Eigen::VectorXd flatten() const;
  static ModelParams unflatten(const Eigen::VectorXd& theta, int feature_dim, int num_classes);
  static ModelParams zeros(int feature_dim, int num_classes);
};

inline constexpr const char* kFlattenOrder = "class-major:w0..wD-1,b";

struct TrainConfig {
  double lambda = 0.1;   // L2 strength; must be > 0 for the influence engine
  double grad_tol = 1e-8;
  int max_iters = 200;
};

/// The training-set view the fitted parameters refer to: embeddings, sample
/// list, per-sample weights and the loss normalization N. Kept on the model
/// so influence queries evaluate the exact objective the fit used.
struct TrainView {
  std::shared_ptr<const EmbeddingMatrix> embeddings;
  std::vector<NodeId> nodes;
  std::vector<int> labels;
  double norm_n = 0;  // the N in (1/N) sum
};

struct SgcModel {
  int k = 0;
  TrainConfig config;
  ModelParams params;
  int num_classes = 0;
  TrainView train_view;
};

/// Fits the unique minimizer of (1/N) sum CE + (lambda/2)||theta||^2 by
/// Newton-CG from theta = 0. Throws NonConvergence if grad_tol is not met
/// within max_iters Newton steps.
SgcModel train(const EmbeddingMatrix& Z, const LabeledSplit& split, const TrainConfig& config);

Eigen::VectorXd class_probabilities(const ModelParams& params, const Eigen::VectorXd& z);
double sample_loss(const ModelParams& params, const Eigen::VectorXd& z, int y);

/// Exact softmax cross-entropy gradient (p - e_y) (x) [z;1] in flatten order.
Eigen::VectorXd sample_gradient(const ModelParams& params, const Eigen::VectorXd& z, int y);

struct CgOptions {
  double rel_tol = 1e-10;
  int max_iters = 0;  // 0 means 10 * dim
};

Eigen::VectorXd hessian_vector_product(const ModelParams& params, const Eigen::MatrixXd& Z,
                                       const LabeledSplit& split, double lambda,
                                       const Eigen::VectorXd& v);

/// Solves H x = g by conjugate gradients on hessian_vector_product, where
/// H = (1/N) sum per-sample Hessians + lambda I over the training split.
/// Throws SolverStall if the relative residual stays above rel_tol.
Eigen::VectorXd solve_hessian_system(const ModelParams& params, const Eigen::MatrixXd& Z,
                                     const LabeledSplit& split, double lambda,
                                     const Eigen::VectorXd& g, const CgOptions& opts = {});

/// Smallest eigenvalue over the per-sample Hessians (diag(p)-pp^T) (x) aa^T
/// with a = [z;1]. The rank-1 factor forces a zero eigenvalue whenever
/// D+1 > 1, so that case short-circuits to exactly 0.
double per_sample_hessian_sigma_min(const ModelParams& params, const Eigen::MatrixXd& Z,
                                    const LabeledSplit& split);

struct EvalMetrics {
  double val_accuracy = 0;
  double test_accuracy = 0;
  double val_loss = 0;  // total (un-averaged) cross-entropy over val
};

EvalMetrics evaluate(const ModelParams& params, const Eigen::MatrixXd& Z,
                     const LabeledSplit& split);

double total_cross_entropy(const ModelParams& params, const Eigen::MatrixXd& Z,
                           const std::vector<NodeId>& nodes, const LabeledSplit& split);

void save_checkpoint(const SgcModel& model, const std::filesystem::path& path);
/// Restores k, lambda and parameters; the train view must be re-attached by
/// retraining context (the CLI re-propagates the dataset at the stored k).
SgcModel load_checkpoint(const std::filesystem::path& path);

// ----- lower-level ERM machinery, shared with the retraining oracle -----

/// (1/norm_n) sum_i w_i * CE(z_i, y_i) + (lambda/2) ||theta||^2.
struct ErmProblem {
  const Eigen::MatrixXd* Z = nullptr;  // rows indexed by node id
  std::vector<NodeId> nodes;
  std::vector<int> labels;
  std::vector<double> weights;  // empty means all ones
  int num_classes = 0;
  double lambda = 0;
  double norm_n = 0;
};

ErmProblem make_erm_problem(const Eigen::MatrixXd& Z, const LabeledSplit& split, double lambda);

double erm_objective(const ErmProblem& prob, const ModelParams& params);
Eigen::VectorXd erm_gradient(const ErmProblem& prob, const ModelParams& params);

/// Hessian-vector products at fixed parameters via the factored per-sample
/// form; probabilities are cached on construction, H is never materialized.
class HessianOperator {
 public:
  HessianOperator(const ErmProblem& prob, const ModelParams& params);
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  int dim() const { return dim_; }

 private:
  ErmProblem prob_;
  Eigen::MatrixXd probs_;  // samples x classes
  int dim_ = 0;
};

/// Plain CG for SPD systems. If best_effort, returns the current iterate
/// instead of throwing SolverStall (used inside Newton where any Krylov
/// iterate is still a descent direction).
Eigen::VectorXd conjugate_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& H,
                                   const Eigen::VectorXd& rhs, const CgOptions& opts,
                                   bool best_effort = false);

struct FitResult {
  ModelParams params;
  int newton_iters = 0;
};

FitResult minimize_erm(const ErmProblem& prob, double grad_tol, int max_iters,
                       const ModelParams* warm_start = nullptr);

}  // namespace sgcinf
