#include "support/test_oracles.hpp"

#include <cmath>

namespace testsupport {

using sgcinf::AttributedGraph;
using sgcinf::Edge;
using sgcinf::LabeledSplit;
using sgcinf::ModelParams;
using sgcinf::NodeId;
using sgcinf::Rng;

Eigen::MatrixXd dense_normalized_operator(const AttributedGraph& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : g.edges()) {
    a(e.a, e.b) = 1.0;
    a(e.b, e.a) = 1.0;
  }
  a += Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd dinv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return dinv.asDiagonal() * a * dinv.asDiagonal();
}

Eigen::MatrixXd dense_propagate(const AttributedGraph& g, int k) {
  Eigen::MatrixXd z = g.features();
  const Eigen::MatrixXd s = dense_normalized_operator(g);
  for (int i = 0; i < k; ++i) z = s * z;
  return z;
}

namespace {

Eigen::VectorXd softmax_of(const ModelParams& params, const Eigen::VectorXd& z) {
  Eigen::VectorXd u = params.W.transpose() * z + params.b;
  u.array() -= u.maxCoeff();
  Eigen::VectorXd p = u.array().exp();
  return p / p.sum();
}

}  // namespace

Eigen::MatrixXd dense_sample_hessian(const ModelParams& params, const Eigen::VectorXd& z) {
  const int d = params.feature_dim();
  const int c = params.num_classes();
  const Eigen::VectorXd p = softmax_of(params, z);
  const Eigen::MatrixXd m = Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose();
  Eigen::VectorXd a(d + 1);
  a.head(d) = z;
  a(d) = 1.0;
  const Eigen::MatrixXd aat = a * a.transpose();

  Eigen::MatrixXd h((d + 1) * c, (d + 1) * c);
  for (int ci = 0; ci < c; ++ci)
    for (int cj = 0; cj < c; ++cj)
      h.block(ci * (d + 1), cj * (d + 1), d + 1, d + 1) = m(ci, cj) * aat;
  return h;
}

Eigen::MatrixXd dense_training_hessian(const ModelParams& params, const Eigen::MatrixXd& Z,
                                       const std::vector<NodeId>& nodes,
                                       const std::vector<int>& labels, double lambda,
                                       double norm_n) {
  (void)labels;  // the softmax Hessian does not depend on the label
  const int dim = params.dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (NodeId v : nodes) h += dense_sample_hessian(params, Z.row(v));
  h /= norm_n;
  h += lambda * Eigen::MatrixXd::Identity(dim, dim);
  return h;
}

Eigen::VectorXd dense_newton_fit(const Eigen::MatrixXd& Z, const std::vector<NodeId>& nodes,
                                 const std::vector<int>& labels,
                                 const std::vector<double>& weights, int num_classes,
                                 double lambda, double norm_n, double grad_tol, int max_iters) {
  const int d = static_cast<int>(Z.cols());
  const int dim = (d + 1) * num_classes;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);

  auto params_of = [&](const Eigen::VectorXd& t) {
    return ModelParams::unflatten(t, d, num_classes);
  };
  auto objective = [&](const Eigen::VectorXd& t) {
    const ModelParams params = params_of(t);
    double loss = 0;
    for (size_t i = 0; i < nodes.size(); ++i) {
      const double w = weights.empty() ? 1.0 : weights[i];
      Eigen::VectorXd u = params.W.transpose() * Z.row(nodes[i]).transpose() + params.b;
      const double mx = u.maxCoeff();
      loss += w * (mx + std::log((u.array() - mx).exp().sum()) - u(labels[i]));
    }
    return loss / norm_n + 0.5 * lambda * t.squaredNorm();
  };
  auto gradient = [&](const Eigen::VectorXd& t) {
    const ModelParams params = params_of(t);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (size_t i = 0; i < nodes.size(); ++i) {
      const double w = weights.empty() ? 1.0 : weights[i];
      const Eigen::VectorXd z = Z.row(nodes[i]);
      Eigen::VectorXd p = softmax_of(params, z);
      p(labels[i]) -= 1.0;
      for (int c = 0; c < num_classes; ++c) {
        g.segment(c * (d + 1), d) += w * p(c) * z;
        g(c * (d + 1) + d) += w * p(c);
      }
    }
    g /= norm_n;
    g += lambda * t;
    return g;
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::VectorXd g = gradient(theta);
    if (g.norm() <= grad_tol) return theta;
    const ModelParams params = params_of(theta);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (size_t i = 0; i < nodes.size(); ++i) {
      const double w = weights.empty() ? 1.0 : weights[i];
      h += w * dense_sample_hessian(params, Z.row(nodes[i]));
    }
    h /= norm_n;
    h += lambda * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::VectorXd step = h.ldlt().solve(-g);
    const double j0 = objective(theta);
    const double slope = g.dot(step);
    double t = 1.0;
    while (t > 1e-18 && objective(theta + t * step) > j0 + 1e-4 * t * slope) t *= 0.5;
    theta += t * step;
  }
  if (gradient(theta).norm() <= grad_tol) return theta;
  throw std::runtime_error("dense Newton oracle failed to converge");
}

AttributedGraph random_graph(Rng& rng, int num_nodes, double edge_prob, int feature_dim) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i < num_nodes; ++i)
    for (NodeId j = i + 1; j < num_nodes; ++j)
      if (rng.uniform() < edge_prob) edges.emplace_back(i, j);
  Eigen::MatrixXd x(num_nodes, feature_dim);
  for (int i = 0; i < num_nodes; ++i)
    for (int j = 0; j < feature_dim; ++j) x(i, j) = rng.normal();
  return AttributedGraph(num_nodes, std::move(edges), std::move(x));
}

LabeledSplit random_split(Rng& rng, int num_nodes, int num_classes, double train_frac) {
  std::vector<int> labels(static_cast<size_t>(num_nodes));
  for (int v = 0; v < num_nodes; ++v) labels[static_cast<size_t>(v)] = v % num_classes;
  std::vector<NodeId> ids(static_cast<size_t>(num_nodes));
  for (int v = 0; v < num_nodes; ++v) ids[static_cast<size_t>(v)] = v;
  rng.shuffle(ids);
  const size_t n_train = std::max<size_t>(
      static_cast<size_t>(num_classes), static_cast<size_t>(train_frac * num_nodes));
  std::vector<NodeId> train(ids.begin(), ids.begin() + static_cast<long>(n_train));
  const size_t n_val = (ids.size() - n_train) / 2;
  std::vector<NodeId> val(ids.begin() + static_cast<long>(n_train),
                          ids.begin() + static_cast<long>(n_train + n_val));
  std::vector<NodeId> test(ids.begin() + static_cast<long>(n_train + n_val), ids.end());
  return LabeledSplit(std::move(labels), std::move(train), std::move(val), std::move(test),
                      num_classes);
}

}  // namespace testsupport
