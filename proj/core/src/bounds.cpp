#include "sgcinf/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sgcinf/influence.hpp"
#include "sgcinf/io.hpp"
#include "sgcinf/oracle.hpp"
#include "sgcinf/perturbation.hpp"
#include "sgcinf/rng.hpp"

namespace sgcinf {

namespace {

void check_common(int n, int affected, double lambda, double sigma_min, double c) {
  if (n < affected || affected < 0) throw ValidationError("need N >= affected >= 0");
  if (lambda <= 0.0) throw ValidationError("lambda must be positive");
  if (sigma_min < 0.0) throw ValidationError("sigma_min must be non-negative");
  if (c < 0.0) throw ValidationError("Lipschitz constant must be non-negative");
}

double checked_den(double value) {
  if (value <= 0.0)
    throw DegenerateDenominator("bound denominator " + std::to_string(value) + " <= 0");
  return value;
}

}  // namespace

ErrorBoundReport edge_error_bound(const EdgeBoundInputs& in) {
  check_common(in.n, in.affected, in.lambda, in.sigma_min, in.lipschitz_c);
  const double sp = in.sigma_min_prime.value_or(in.sigma_min);
  if (sp < 0.0) throw ValidationError("sigma_min_prime must be non-negative");

  const double n = in.n;
  const double l = in.affected;
  const double g = in.grad_diff_norm;
  const double den1 = checked_den(n * in.lambda + (n - l) * in.sigma_min + sp * l);
  const double den2 =
      checked_den(n * in.lambda + (n - l) * in.sigma_min + std::min(in.sigma_min, sp) * l);

  ErrorBoundReport rep;
  rep.kind = TargetKind::EdgeRemoval;
  rep.lambda = in.lambda;
  rep.n = in.n;
  rep.affected_count = in.affected;
  rep.sigma_min = in.sigma_min;
  rep.sigma_min_prime = sp;
  rep.a_priori = !in.sigma_min_prime.has_value();
  rep.lipschitz_c = in.lipschitz_c;
  rep.c_provenance = in.c_provenance;
  rep.grad_diff_norm = g;
  rep.observed_err = in.observed_err;
  rep.term1 = (n * n * n) * in.lipschitz_c / (den1 * den1 * den1) * g * g;
  rep.term2 = n / den2 * g;
  rep.bound = rep.term1 + rep.term2;
  return rep;
}

ErrorBoundReport node_error_bound(const NodeBoundInputs& in) {
  check_common(in.n, in.affected, in.lambda, in.sigma_min, in.lipschitz_c);
  if (in.m < 0.0) throw ValidationError("m must be non-negative");
  const double sp = in.sigma_min_prime.value_or(in.sigma_min);
  if (sp < 0.0) throw ValidationError("sigma_min_prime must be non-negative");

  const double n = in.n;
  const double s = in.affected;
  const double gi = in.removed_gradient_norm;
  const double den1 = checked_den((n - 1.0) * in.lambda + (n - s) * in.sigma_min + sp * s);
  const double den2 =
      checked_den(n * in.lambda + (n - s) * in.sigma_min + std::min(in.sigma_min, sp) * s);
  const double den3 = checked_den(n * in.lambda + (n - 1.0) * in.sigma_min);
  const double den4 = checked_den(n * in.lambda + n * in.sigma_min);

  ErrorBoundReport rep;
  rep.kind = TargetKind::NodeRemoval;
  rep.lambda = in.lambda;
  rep.n = in.n;
  rep.affected_count = in.affected;
  rep.sigma_min = in.sigma_min;
  rep.sigma_min_prime = sp;
  rep.a_priori = !in.sigma_min_prime.has_value();
  rep.lipschitz_c = in.lipschitz_c;
  rep.c_provenance = in.c_provenance;
  rep.grad_diff_norm = in.m;
  rep.m = in.m;
  rep.removed_gradient_norm = gi;
  rep.observed_err = in.observed_err;
  rep.term1 = (n * n * n) * in.m * in.m * in.lipschitz_c / (den1 * den1 * den1);
  rep.term2 = (n - 1.0) * in.m / den2;
  rep.term3 = (n * n * n) * in.lipschitz_c / (den3 * den3 * den3) * gi * gi;
  rep.term4 = n / den4 * gi;
  rep.bound = rep.term1 + rep.term2 + *rep.term3 + *rep.term4;
  return rep;
}

double estimate_lipschitz_c(const HessianFactory& hessian_at, const Eigen::VectorXd& center,
                            int num_probes, double radius, std::uint64_t seed) {
  if (num_probes < 2) throw ValidationError("num_probes must be at least 2");
  if (radius <= 0.0) throw ValidationError("radius must be positive");
  const Eigen::Index dim = center.size();

  Rng point_rng(seed);
  auto draw_point = [&]() {
    Eigen::VectorXd u(dim);
    for (Eigen::Index i = 0; i < dim; ++i) u(i) = point_rng.normal();
    const double norm = u.norm();
    if (norm == 0.0) return Eigen::VectorXd(center);
    const double r =
        radius * std::pow(point_rng.uniform(), 1.0 / static_cast<double>(std::max<Eigen::Index>(dim, 1)));
    return Eigen::VectorXd(center + (r / norm) * u);
  };

  std::vector<Eigen::VectorXd> points;
  std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> ops;
  points.reserve(static_cast<size_t>(num_probes));
  for (int i = 0; i < num_probes; ++i) {
    points.push_back(draw_point());
    ops.push_back(hessian_at(points.back()));
  }

  double best = 0.0;
  for (int j = 1; j < num_probes; ++j) {
    for (int i = 0; i < j; ++i) {
      const double dist = (points[static_cast<size_t>(j)] - points[static_cast<size_t>(i)]).norm();
      if (dist == 0.0) continue;
      // Power iteration on the symmetric difference operator; the start
      // vector is seeded per pair so earlier pairs are unaffected by later
      // probes (keeps the max monotone in num_probes).
      Rng pair_rng(seed ^ (0x100000001b3ull * static_cast<std::uint64_t>(i * num_probes + j + 1)));
      Eigen::VectorXd v(dim);
      for (Eigen::Index t = 0; t < dim; ++t) v(t) = pair_rng.normal();
      double norm_est = 0.0;
      v.normalize();
      for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd w = ops[static_cast<size_t>(j)](v) - ops[static_cast<size_t>(i)](v);
        norm_est = w.norm();
        if (norm_est <= 1e-300) break;
        v = w / norm_est;
      }
      best = std::max(best, norm_est / dist);
    }
  }
  return best;
}

double estimate_lipschitz_c(const SgcModel& model, const LabeledSplit& split, int num_probes,
                            double radius, std::uint64_t seed) {
  if (!model.train_view.embeddings)
    throw ValidationError("model carries no training embeddings");
  if (model.num_classes != split.num_classes())
    throw ValidationError("model and split disagree on the class count");
  ErmProblem prob;
  prob.Z = &model.train_view.embeddings->Z;
  prob.nodes = model.train_view.nodes;
  prob.labels = model.train_view.labels;
  prob.num_classes = model.num_classes;
  prob.lambda = 0.0;  // constant lambda*I cancels in Hessian differences
  prob.norm_n = model.train_view.norm_n;
  const int d = model.params.feature_dim();
  const int c = model.params.num_classes();

  HessianFactory factory = [prob, d, c](const Eigen::VectorXd& theta) {
    auto op = std::make_shared<HessianOperator>(prob, ModelParams::unflatten(theta, d, c));
    return [op](const Eigen::VectorXd& v) { return op->apply(v); };
  };
  return estimate_lipschitz_c(factory, model.params.flatten(), num_probes, radius, seed);
}

std::vector<LambdaSweepRecord> lambda_sweep(const AttributedGraph& graph,
                                            const LabeledSplit& split,
                                            const LambdaSweepConfig& config) {
  if (config.lambdas.empty()) throw ValidationError("no lambdas given");
  for (size_t i = 1; i < config.lambdas.size(); ++i)
    if (config.lambdas[i] >= config.lambdas[i - 1])
      throw ValidationError("lambdas must be sorted descending");
  for (const Edge& e : config.edge_sample)
    if (!graph.has_edge(e))
      throw MissingEdge("sweep edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                        ") not in graph");

  const EmbeddingMatrix z = propagate(graph, config.k);
  std::vector<LambdaSweepRecord> records;

  for (const double lambda : config.lambdas) {
    LambdaSweepRecord rec;
    rec.lambda = lambda;
    try {
      TrainConfig tc{lambda, config.grad_tol, config.max_iters};
      const SgcModel model = train(z, split, tc);
      InfluenceEngine engine(model, graph, split);
      const EvalProbe probe = engine.make_probe(split.val());
      const double sigma_min =
          per_sample_hessian_sigma_min(model.params, z.Z, split);
      const double c_value =
          config.lipschitz_c
              ? *config.lipschitz_c
              : estimate_lipschitz_c(model, split, config.c_probes, config.c_radius, config.seed);
      const CProvenance c_prov =
          config.lipschitz_c ? CProvenance::UserSupplied : CProvenance::Estimated;

      std::vector<double> est, act;
      for (const Edge& e : config.edge_sample) {
        const PerturbationDelta delta = delta_edge_removal(graph, config.k, e);
        const Eigen::VectorXd g = engine.perturbation_gradient(delta);
        const InfluenceEstimate estimate = engine.estimate_from_delta(delta, &probe);
        const ActualInfluence oracle =
            retrain_after_removal(model, graph, split, Target::edge(e), split.val());
        const double sigma_prime = per_sample_hessian_sigma_min(
            ModelParams::unflatten(model.params.flatten() + oracle.param_change,
                                   model.params.feature_dim(), model.num_classes),
            z.Z, split);

        EdgeBoundInputs in;
        in.n = static_cast<int>(model.train_view.norm_n);
        in.affected = static_cast<int>(affected_training_nodes(delta, split).size());
        in.lambda = lambda;
        in.sigma_min = sigma_min;
        in.sigma_min_prime = sigma_prime;
        in.lipschitz_c = c_value;
        in.c_provenance = c_prov;
        in.grad_diff_norm = g.norm();
        in.observed_err = (oracle.param_change - estimate.param_change).norm();
        const ErrorBoundReport bound = edge_error_bound(in);

        LambdaSweepEdgeRow row;
        row.edge = e;
        row.degree_sum = graph.degree(e.a) + graph.degree(e.b);
        row.estimated = estimate.eval_change.value();
        row.actual = oracle.eval_change;
        row.observed_err = *in.observed_err;
        row.bound = bound.bound;
        row.term1 = bound.term1;
        row.term2 = bound.term2;
        rec.rows.push_back(row);
        est.push_back(row.estimated);
        act.push_back(row.actual);
      }
      if (!rec.rows.empty()) {
        double sum_err = 0, sum_bound = 0;
        for (const auto& row : rec.rows) {
          sum_err += row.observed_err;
          sum_bound += row.bound;
        }
        rec.mean_observed_err = sum_err / static_cast<double>(rec.rows.size());
        rec.mean_bound = sum_bound / static_cast<double>(rec.rows.size());
      }
      try {
        rec.rho = spearman(est, act);
      } catch (const DegenerateInput&) {
      }
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<LambdaSweepRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "lambda,edge_i,edge_j,degree_sum,estimated,actual,observed_err,bound,term1,term2\n";
  for (const LambdaSweepRecord& rec : records) {
    for (const LambdaSweepEdgeRow& row : rec.rows) {
      out << format_double(rec.lambda) << ',' << row.edge.a << ',' << row.edge.b << ','
          << row.degree_sum << ',' << format_double(row.estimated) << ','
          << format_double(row.actual) << ',' << format_double(row.observed_err) << ','
          << format_double(row.bound) << ',' << format_double(row.term1) << ','
          << format_double(row.term2) << "\n";
    }
  }
}

}  // namespace sgcinf
