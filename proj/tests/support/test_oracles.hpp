#pragma once

// Independent reference implementations used as test oracles. Everything here
// deliberately recomputes from first principles (dense algebra, explicit
// Kronecker Hessians, direct Newton with factorized solves) so it shares no
// code path with the library under test.

#include <Eigen/Dense>
#include <vector>

#include "sgcinf/graph.hpp"
#include "sgcinf/model.hpp"
#include "sgcinf/rng.hpp"
#include "sgcinf/types.hpp"

namespace testsupport {

// Dense S = D^{-1/2}(A+I)D^{-1/2} built from the edge list alone.
Eigen::MatrixXd dense_normalized_operator(const sgcinf::AttributedGraph& g);

// Dense S^k X via repeated dense multiplication.
Eigen::MatrixXd dense_propagate(const sgcinf::AttributedGraph& g, int k);

// Dense per-sample softmax cross-entropy Hessian as the explicit Kronecker
// product (diag(p) - pp^T) (x) aa^T with a = [z;1], in the library's
// class-major flatten order.
Eigen::MatrixXd dense_sample_hessian(const sgcinf::ModelParams& params, const Eigen::VectorXd& z);

// Dense regularized training Hessian (1/N) sum H_i + lambda I.
Eigen::MatrixXd dense_training_hessian(const sgcinf::ModelParams& params,
                                       const Eigen::MatrixXd& Z,
                                       const std::vector<sgcinf::NodeId>& nodes,
                                       const std::vector<int>& labels, double lambda,
                                       double norm_n);

// From-scratch damped Newton minimizer of
//   (1/norm_n) sum_i w_i CE(z_i, y_i) + (lambda/2)||theta||^2
// with dense Hessian assembly and LDLT solves.
Eigen::VectorXd dense_newton_fit(const Eigen::MatrixXd& Z,
                                 const std::vector<sgcinf::NodeId>& nodes,
                                 const std::vector<int>& labels,
                                 const std::vector<double>& weights, int num_classes,
                                 double lambda, double norm_n, double grad_tol = 1e-12,
                                 int max_iters = 200);

// Connected-ish Erdos-Renyi style random graph with random features.
sgcinf::AttributedGraph random_graph(sgcinf::Rng& rng, int num_nodes, double edge_prob,
                                     int feature_dim);

// Random labeled split over all nodes: round-robin classes, random roles.
sgcinf::LabeledSplit random_split(sgcinf::Rng& rng, int num_nodes, int num_classes,
                                  double train_frac = 0.5);

}  // namespace testsupport
