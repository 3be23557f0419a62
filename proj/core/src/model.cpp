#include "sgcinf/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace sgcinf {

Eigen::VectorXd ModelParams::flatten() const {
  const int d = feature_dim();
  const int c = num_classes();
  Eigen::VectorXd theta(dim());
  for (int j = 0; j < c; ++j) {
    theta.segment(j * (d + 1), d) = W.col(j);
    theta(j * (d + 1) + d) = b(j);
  }
  return theta;
}

ModelParams ModelParams::unflatten(const Eigen::VectorXd& theta, int feature_dim,
                                   int num_classes) {
  if (theta.size() != static_cast<Eigen::Index>((feature_dim + 1) * num_classes))
    throw ValidationError("flattened parameter length mismatch");
  ModelParams out;
  out.W.resize(feature_dim, num_classes);
  out.b.resize(num_classes);
  for (int j = 0; j < num_classes; ++j) {
    out.W.col(j) = theta.segment(j * (feature_dim + 1), feature_dim);
    out.b(j) = theta(j * (feature_dim + 1) + feature_dim);
  }
  return out;
}

ModelParams ModelParams::zeros(int feature_dim, int num_classes) {
  ModelParams out;
  out.W = Eigen::MatrixXd::Zero(feature_dim, num_classes);
  out.b = Eigen::VectorXd::Zero(num_classes);
  return out;
}

Eigen::VectorXd class_probabilities(const ModelParams& params, const Eigen::VectorXd& z) {
  Eigen::VectorXd logits = params.W.transpose() * z + params.b;
  const double mx = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - mx).exp();
  p /= p.sum();
  return p;
}

double sample_loss(const ModelParams& params, const Eigen::VectorXd& z, int y) {
  Eigen::VectorXd logits = params.W.transpose() * z + params.b;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(y);
}

Eigen::VectorXd sample_gradient(const ModelParams& params, const Eigen::VectorXd& z, int y) {
  const int d = params.feature_dim();
  const int c = params.num_classes();
  Eigen::VectorXd p = class_probabilities(params, z);
  p(y) -= 1.0;
  Eigen::VectorXd g(params.dim());
  for (int j = 0; j < c; ++j) {
    g.segment(j * (d + 1), d) = p(j) * z;
    g(j * (d + 1) + d) = p(j);
  }
  return g;
}

ErmProblem make_erm_problem(const Eigen::MatrixXd& Z, const LabeledSplit& split, double lambda) {
  ErmProblem prob;
  prob.Z = &Z;
  prob.nodes = split.train();
  prob.labels.reserve(prob.nodes.size());
  for (NodeId v : prob.nodes) prob.labels.push_back(split.label(v));
  prob.num_classes = split.num_classes();
  prob.lambda = lambda;
  prob.norm_n = static_cast<double>(prob.nodes.size());
  return prob;
}

namespace {

double weight_of(const ErmProblem& prob, size_t i) {
  return prob.weights.empty() ? 1.0 : prob.weights[i];
}

}  // namespace

double erm_objective(const ErmProblem& prob, const ModelParams& params) {
  double loss = 0;
  for (size_t i = 0; i < prob.nodes.size(); ++i) {
    const double w = weight_of(prob, i);
    if (w == 0.0) continue;
    loss += w * sample_loss(params, prob.Z->row(prob.nodes[i]), prob.labels[i]);
  }
  loss /= prob.norm_n;
  const double theta_sq = params.W.squaredNorm() + params.b.squaredNorm();
  return loss + 0.5 * prob.lambda * theta_sq;
}

Eigen::VectorXd erm_gradient(const ErmProblem& prob, const ModelParams& params) {
  const int d = params.feature_dim();
  const int c = params.num_classes();
  Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(d, c);
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(c);
  for (size_t i = 0; i < prob.nodes.size(); ++i) {
    const double w = weight_of(prob, i);
    if (w == 0.0) continue;
    const Eigen::VectorXd z = prob.Z->row(prob.nodes[i]);
    Eigen::VectorXd p = class_probabilities(params, z);
    p(prob.labels[i]) -= 1.0;
    gw.noalias() += w * (z * p.transpose());
    gb += w * p;
  }
  gw /= prob.norm_n;
  gb /= prob.norm_n;
  gw += prob.lambda * params.W;
  gb += prob.lambda * params.b;

  Eigen::VectorXd g(params.dim());
  for (int j = 0; j < c; ++j) {
    g.segment(j * (d + 1), d) = gw.col(j);
    g(j * (d + 1) + d) = gb(j);
  }
  return g;
}

HessianOperator::HessianOperator(const ErmProblem& prob, const ModelParams& params)
    : prob_(prob), dim_(params.dim()) {
  const int n = static_cast<int>(prob_.nodes.size());
  probs_.resize(n, prob_.num_classes);
  for (int i = 0; i < n; ++i)
    probs_.row(i) = class_probabilities(params, prob_.Z->row(prob_.nodes[i])).transpose();
}

Eigen::VectorXd HessianOperator::apply(const Eigen::VectorXd& v) const {
  const int c = prob_.num_classes;
  const int d = dim_ / c - 1;
  // Per sample: (diag(p) - pp^T) (x) aa^T with a = [z;1]; contributions are
  // rank-structured so each costs O(C*D).
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> V(
      v.data(), c, d + 1);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> O(
      out.data(), c, d + 1);
  for (size_t i = 0; i < prob_.nodes.size(); ++i) {
    const double w = weight_of(prob_, i);
    if (w == 0.0) continue;
    const Eigen::VectorXd z = prob_.Z->row(prob_.nodes[i]);
    const Eigen::VectorXd p = probs_.row(i);
    Eigen::VectorXd s = V.leftCols(d) * z + V.col(d);  // s_c = a . v_c
    Eigen::VectorXd t = p.cwiseProduct(s) - p.dot(s) * p;
    O.leftCols(d).noalias() += w * (t * z.transpose());
    O.col(d) += w * t;
  }
  out /= prob_.norm_n;
  out += prob_.lambda * v;
  return out;
}

Eigen::VectorXd conjugate_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& H,
                                   const Eigen::VectorXd& rhs, const CgOptions& opts,
                                   bool best_effort) {
  const Eigen::Index n = rhs.size();
  const double bnorm = rhs.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (bnorm == 0.0) return x;
  const int max_iters = opts.max_iters > 0 ? opts.max_iters : 10 * static_cast<int>(n);

  Eigen::VectorXd r = rhs;
  Eigen::VectorXd dvec = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(rr) <= opts.rel_tol * bnorm) return x;
    Eigen::VectorXd hd = H(dvec);
    const double dhd = dvec.dot(hd);
    if (dhd <= 0.0) break;  // not SPD to working precision
    const double alpha = rr / dhd;
    x += alpha * dvec;
    if ((it + 1) % 64 == 0) {
      r = rhs - H(x);  // periodic refresh against drift
    } else {
      r -= alpha * hd;
    }
    const double rr_next = r.squaredNorm();
    dvec = r + (rr_next / rr) * dvec;
    rr = rr_next;
  }
  const double res = (rhs - H(x)).norm() / bnorm;
  if (res <= opts.rel_tol || best_effort) return x;
  throw SolverStall("conjugate gradients stalled at relative residual " + std::to_string(res));
}

FitResult minimize_erm(const ErmProblem& prob, double grad_tol, int max_iters,
                       const ModelParams* warm_start) {
  const int d = static_cast<int>(prob.Z->cols());
  ModelParams params = warm_start ? *warm_start : ModelParams::zeros(d, prob.num_classes);

  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd g = erm_gradient(prob, params);
    if (g.norm() <= grad_tol) return {params, iter};

    HessianOperator hess(prob, params);
    CgOptions cg;
    cg.rel_tol = 1e-12;
    Eigen::VectorXd step =
        conjugate_gradient([&](const Eigen::VectorXd& v) { return hess.apply(v); }, -g, cg,
                           /*best_effort=*/true);

    const double j0 = erm_objective(prob, params);
    const double slope = g.dot(step);
    const Eigen::VectorXd theta = params.flatten();

    // Once the predicted decrease drops below the objective's rounding floor
    // the Armijo test is noise; we are in the quadratic basin, take the full
    // Newton step.
    const double rounding = 16.0 * std::numeric_limits<double>::epsilon() * (std::abs(j0) + 1.0);
    if (-slope <= rounding) {
      params = ModelParams::unflatten(theta + step, d, prob.num_classes);
      continue;
    }

    double t = 1.0;
    while (t > 1e-18) {
      ModelParams cand = ModelParams::unflatten(theta + t * step, d, prob.num_classes);
      if (erm_objective(prob, cand) <= j0 + 1e-4 * t * slope) {
        params = std::move(cand);
        break;
      }
      t *= 0.5;
    }
    if (t <= 1e-18)
      throw NonConvergence("line search failed with gradient norm " + std::to_string(g.norm()));
  }
  if (erm_gradient(prob, params).norm() <= grad_tol) return {params, max_iters};
  throw NonConvergence("gradient norm above tolerance after " + std::to_string(max_iters) +
                       " Newton iterations");
}

SgcModel train(const EmbeddingMatrix& Z, const LabeledSplit& split, const TrainConfig& config) {
  if (config.lambda <= 0.0)
    throw ValidationError("lambda must be positive (Hessian positive-definiteness)");
  if (split.train().empty()) throw ValidationError("empty training set");
  if (config.grad_tol <= 0.0 || config.max_iters <= 0)
    throw ValidationError("grad_tol and max_iters must be positive");

  ErmProblem prob = make_erm_problem(Z.Z, split, config.lambda);
  FitResult fit = minimize_erm(prob, config.grad_tol, config.max_iters);

  SgcModel model;
  model.k = Z.k;
  model.config = config;
  model.params = std::move(fit.params);
  model.num_classes = split.num_classes();
  model.train_view.embeddings = std::make_shared<EmbeddingMatrix>(Z);
  model.train_view.nodes = prob.nodes;
  model.train_view.labels = prob.labels;
  model.train_view.norm_n = prob.norm_n;
  return model;
}

Eigen::VectorXd hessian_vector_product(const ModelParams& params, const Eigen::MatrixXd& Z,
                                       const LabeledSplit& split, double lambda,
                                       const Eigen::VectorXd& v) {
  if (v.size() != params.dim()) throw ValidationError("vector length != parameter count");
  ErmProblem prob = make_erm_problem(Z, split, lambda);
  return HessianOperator(prob, params).apply(v);
}

Eigen::VectorXd solve_hessian_system(const ModelParams& params, const Eigen::MatrixXd& Z,
                                     const LabeledSplit& split, double lambda,
                                     const Eigen::VectorXd& g, const CgOptions& opts) {
  if (lambda <= 0.0) throw ValidationError("lambda must be positive");
  ErmProblem prob = make_erm_problem(Z, split, lambda);
  HessianOperator hess(prob, params);
  return conjugate_gradient([&](const Eigen::VectorXd& v) { return hess.apply(v); }, g, opts);
}

double per_sample_hessian_sigma_min(const ModelParams& params, const Eigen::MatrixXd& Z,
                                    const LabeledSplit& split) {
  const int d = params.feature_dim();
  if (d + 1 > 1) return 0.0;  // rank-1 aa^T factor forces a zero eigenvalue

  double smallest = std::numeric_limits<double>::infinity();
  for (NodeId v : split.train()) {
    const Eigen::VectorXd p = class_probabilities(params, Z.row(v));
    Eigen::MatrixXd m = Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    smallest = std::min(smallest, es.eigenvalues().minCoeff());
  }
  return smallest;
}

EvalMetrics evaluate(const ModelParams& params, const Eigen::MatrixXd& Z,
                     const LabeledSplit& split) {
  auto accuracy = [&](const std::vector<NodeId>& nodes) {
    if (nodes.empty()) return 0.0;
    int correct = 0;
    for (NodeId v : nodes) {
      Eigen::VectorXd logits = params.W.transpose() * Z.row(v).transpose() + params.b;
      Eigen::Index pred;
      logits.maxCoeff(&pred);
      if (static_cast<int>(pred) == split.label(v)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(nodes.size());
  };
  EvalMetrics m;
  m.val_accuracy = accuracy(split.val());
  m.test_accuracy = accuracy(split.test());
  m.val_loss = total_cross_entropy(params, Z, split.val(), split);
  return m;
}

double total_cross_entropy(const ModelParams& params, const Eigen::MatrixXd& Z,
                           const std::vector<NodeId>& nodes, const LabeledSplit& split) {
  double loss = 0;
  for (NodeId v : nodes) loss += sample_loss(params, Z.row(v), split.label(v));
  return loss;
}

void save_checkpoint(const SgcModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["k"] = model.k;
  j["lambda"] = model.config.lambda;
  j["num_classes"] = model.num_classes;
  j["flatten_order"] = kFlattenOrder;
  const Eigen::VectorXd theta = model.params.flatten();
  j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint: " + path.string());
  out << j.dump(2) << "\n";
}

SgcModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read checkpoint: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  SgcModel model;
  try {
    model.k = j.at("k").get<int>();
    model.config.lambda = j.at("lambda").get<double>();
    model.num_classes = j.at("num_classes").get<int>();
    if (j.at("flatten_order").get<std::string>() != kFlattenOrder)
      throw ValidationError("unsupported flatten_order in checkpoint");
    const std::vector<double> theta = j.at("theta").get<std::vector<double>>();
    if (model.num_classes <= 0 || theta.size() % static_cast<size_t>(model.num_classes) != 0)
      throw ValidationError("theta length not divisible by num_classes");
    const int d = static_cast<int>(theta.size()) / model.num_classes - 1;
    if (d < 0) throw ValidationError("theta too short");
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(theta.data(),
                                                          static_cast<Eigen::Index>(theta.size()));
    model.params = ModelParams::unflatten(t, d, model.num_classes);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace sgcinf
