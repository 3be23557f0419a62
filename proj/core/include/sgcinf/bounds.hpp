#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgcinf/model.hpp"
#include "sgcinf/types.hpp"

namespace sgcinf {

enum class CProvenance { UserSupplied, Estimated };

struct EdgeBoundInputs {
  int n = 0;         // training-set size N
  int affected = 0;  // |L|, affected training nodes
  double lambda = 0;
  double sigma_min = 0;
  std::optional<double> sigma_min_prime;  // absent: substitute sigma_min, flag a-priori
  double lipschitz_c = 0;
  CProvenance c_provenance = CProvenance::UserSupplied;
  double grad_diff_norm = 0;  // || sum_L (grad l(z') - grad l(z)) ||_2
  std::optional<double> observed_err;
};

struct NodeBoundInputs {
  int n = 0;
  int affected = 0;  // |S|
  double lambda = 0;
  double sigma_min = 0;
  std::optional<double> sigma_min_prime;
  double lipschitz_c = 0;
  CProvenance c_provenance = CProvenance::UserSupplied;
  double m = 0;                      // || sum_S [grad diff] - grad l(z_i) ||_2
  double removed_gradient_norm = 0;  // removed training node's own gradient norm (0 if not trained on)
  std::optional<double> observed_err;
};

struct ErrorBoundReport {
  TargetKind kind = TargetKind::EdgeRemoval;
  double lambda = 0;
  int n = 0;
  int affected_count = 0;
  double sigma_min = 0;
  double sigma_min_prime = 0;
  bool a_priori = false;  // sigma'_min was substituted by sigma_min
  double lipschitz_c = 0;
  CProvenance c_provenance = CProvenance::UserSupplied;
  double grad_diff_norm = 0;
  std::optional<double> m;
  std::optional<double> removed_gradient_norm;
  double term1 = 0;
  double term2 = 0;
  std::optional<double> term3;  // node bound only
  std::optional<double> term4;
  double bound = 0;
  std::optional<double> observed_err;
};

/// Two-term edge-removal bound, evaluated exactly as stated.
ErrorBoundReport edge_error_bound(const EdgeBoundInputs& in);

/// Four-term node-removal bound, evaluated exactly as stated (including its
/// (N-1)-lambda first denominator).
ErrorBoundReport node_error_bound(const NodeBoundInputs& in);

/// Closure producing a Hessian-vector-product operator at a parameter point.
using HessianFactory =
    std::function<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>(const Eigen::VectorXd&)>;

/// Max over sampled parameter pairs inside the radius ball around `center` of
/// ||H(t1) - H(t2)||_op / ||t1 - t2||; operator norms by power iteration on
/// the difference products. A lower estimate of the true local constant.
/// Points are drawn sequentially, so the estimate is non-decreasing in
/// num_probes for a fixed seed.
double estimate_lipschitz_c(const HessianFactory& hessian_at, const Eigen::VectorXd& center,
                            int num_probes, double radius, std::uint64_t seed);

/// Production form: Hessian of the mean training loss (the regularizer's
/// constant lambda*I cancels in differences).
double estimate_lipschitz_c(const SgcModel& model, const LabeledSplit& split, int num_probes,
                            double radius, std::uint64_t seed);

struct LambdaSweepEdgeRow {
  Edge edge;
  int degree_sum = 0;
  double estimated = 0;  // estimated eval-loss change
  double actual = 0;     // retrained eval-loss change
  double observed_err = 0;
  double bound = 0;
  double term1 = 0;
  double term2 = 0;
};

struct LambdaSweepRecord {
  double lambda = 0;
  std::optional<double> rho;
  double mean_observed_err = 0;
  double mean_bound = 0;
  std::vector<LambdaSweepEdgeRow> rows;
  bool failed = false;
  std::string error;
};

struct LambdaSweepConfig {
  int k = 2;
  std::vector<double> lambdas;  // sorted descending
  std::vector<Edge> edge_sample;
  std::uint64_t seed = 0;
  std::optional<double> lipschitz_c;  // absent: estimate per lambda
  int c_probes = 6;
  double c_radius = 0.5;
  double grad_tol = 1e-8;
  int max_iters = 400;
};

/// Retrains, estimates, and bounds the sampled edges at every lambda;
/// training or solver failures are recorded per lambda without aborting.
std::vector<LambdaSweepRecord> lambda_sweep(const AttributedGraph& graph,
                                            const LabeledSplit& split,
                                            const LambdaSweepConfig& config);

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<LambdaSweepRecord>& records);

}  // namespace sgcinf
