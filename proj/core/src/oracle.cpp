#include "sgcinf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sgcinf/io.hpp"

namespace sgcinf {

namespace {

std::vector<NodeId> without(const std::vector<NodeId>& ids, NodeId v) {
  std::vector<NodeId> out;
  out.reserve(ids.size());
  for (NodeId x : ids)
    if (x != v) out.push_back(x);
  return out;
}

std::vector<double> average_ranks(std::span<const double> xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

ActualInfluence retrain_after_removal(const SgcModel& base, const AttributedGraph& graph,
                                      const LabeledSplit& split, Target target,
                                      const std::vector<NodeId>& eval_set,
                                      const OracleOptions& opts) {
  const Eigen::MatrixXd& z_before = base.train_view.embeddings->Z;

  ErmProblem prob;
  prob.num_classes = split.num_classes();
  prob.lambda = base.config.lambda;
  prob.norm_n = base.train_view.norm_n;  // keep the original N
  std::vector<NodeId> eval_nodes = eval_set;

  Eigen::MatrixXd z_after;
  switch (target.kind) {
    case TargetKind::EdgeRemoval: {
      const AttributedGraph modified = graph.remove_edge(Edge(target.a, target.b));
      z_after = propagate(modified, base.k).Z;
      prob.nodes = base.train_view.nodes;
      prob.labels = base.train_view.labels;
      break;
    }
    case TargetKind::NodeRemoval: {
      const AttributedGraph modified = graph.remove_node(target.a);
      z_after = propagate(modified, base.k).Z;
      prob.nodes = without(base.train_view.nodes, target.a);
      prob.labels.reserve(prob.nodes.size());
      for (NodeId v : prob.nodes) prob.labels.push_back(split.label(v));
      eval_nodes = without(eval_nodes, target.a);
      break;
    }
    case TargetKind::SampleRemoval: {
      if (!split.in_train(target.a))
        throw ValidationError("sample removal target " + std::to_string(target.a) +
                              " is not a training node");
      z_after = z_before;
      prob.nodes = without(base.train_view.nodes, target.a);
      prob.labels.reserve(prob.nodes.size());
      for (NodeId v : prob.nodes) prob.labels.push_back(split.label(v));
      eval_nodes = without(eval_nodes, target.a);
      break;
    }
  }
  prob.Z = &z_after;

  const ModelParams* warm = opts.warm_start ? &base.params : nullptr;
  FitResult fit = minimize_erm(prob, base.config.grad_tol, base.config.max_iters, warm);

  ActualInfluence out;
  out.target = target;
  out.param_change = fit.params.flatten() - base.params.flatten();
  out.retrain_iters = fit.newton_iters;
  out.eval_change = total_cross_entropy(fit.params, z_after, eval_nodes, split) -
                    total_cross_entropy(base.params, z_before, eval_nodes, split);
  return out;
}

ActualInfluence retrain_after_removal(const AttributedGraph& graph, const LabeledSplit& split,
                                      int k, const TrainConfig& config, Target target,
                                      const std::vector<NodeId>& eval_set,
                                      const OracleOptions& opts) {
  const SgcModel base = train(propagate(graph, k), split, config);
  return retrain_after_removal(base, graph, split, target, eval_set, opts);
}

Eigen::VectorXd epsilon_downweight_probe(const SgcModel& base, const LabeledSplit& split,
                                         NodeId sample, double epsilon, double probe_tol) {
  if (!split.in_train(sample))
    throw ValidationError("probe sample " + std::to_string(sample) + " is not a training node");
  const double n = base.train_view.norm_n;
  // negative epsilon upweights instead; used by central-difference checks
  if (!(epsilon != 0.0 && std::abs(epsilon) < 1.0 / n))
    throw ValidationError("epsilon magnitude must lie in (0, 1/N)");

  ErmProblem prob;
  prob.Z = &base.train_view.embeddings->Z;
  prob.nodes = base.train_view.nodes;
  prob.labels = base.train_view.labels;
  prob.num_classes = split.num_classes();
  prob.lambda = base.config.lambda;
  prob.norm_n = n;

  // Both fits at the probe tolerance: the divided difference needs far more
  // accuracy than a fit used for prediction.
  FitResult tight_base = minimize_erm(prob, probe_tol, base.config.max_iters);

  prob.weights.assign(prob.nodes.size(), 1.0);
  for (size_t i = 0; i < prob.nodes.size(); ++i)
    if (prob.nodes[i] == sample) prob.weights[i] = 1.0 - n * epsilon;
  FitResult shifted = minimize_erm(prob, probe_tol, base.config.max_iters, &tight_base.params);

  return (shifted.params.flatten() - tight_base.params.flatten()) / epsilon;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("spearman: length mismatch");
  if (xs.size() < 2) throw DegenerateInput("spearman needs at least two pairs");

  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateInput("spearman undefined for a constant list");
  return sxy / std::sqrt(sxx * syy);
}

ValidationReport validate_influence(const AttributedGraph& graph, const LabeledSplit& split, int k,
                                    const TrainConfig& config, const std::vector<Target>& targets,
                                    const std::vector<NodeId>& eval_set) {
  if (targets.empty()) throw ValidationError("validate_influence needs at least one target");
  const SgcModel base = train(propagate(graph, k), split, config);
  InfluenceEngine engine(base, graph, split);
  const EvalProbe probe = engine.make_probe(eval_set);

  ValidationReport report;
  for (const Target& target : targets) {
    try {
      const InfluenceEstimate est = engine.estimate(target, &probe);
      const ActualInfluence act = retrain_after_removal(base, graph, split, target, eval_set);
      report.targets.push_back(target);
      report.estimated.push_back(est.eval_change.value());
      report.actual.push_back(act.eval_change);
    } catch (const Error&) {
      ++report.n_failed;
    }
  }
  try {
    report.rho = spearman(report.estimated, report.actual);
  } catch (const DegenerateInput& e) {
    report.rho_error = e.what();
  }
  return report;
}

void write_validation_csv(const std::filesystem::path& path, const ValidationReport& report) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "target_type,target_a,target_b,estimated,actual\n";
  for (size_t i = 0; i < report.targets.size(); ++i) {
    const Target& t = report.targets[i];
    out << target_kind_name(t.kind) << ',' << t.a << ',' << t.b << ','
        << format_double(report.estimated[i]) << ',' << format_double(report.actual[i]) << "\n";
  }
}

void write_validation_summary(const std::filesystem::path& path, const ValidationReport& report) {
  nlohmann::json j;
  if (report.rho)
    j["rho"] = *report.rho;
  else
    j["rho"] = nullptr;
  if (!report.rho_error.empty()) j["rho_error"] = report.rho_error;
  j["n_targets"] = report.targets.size();
  j["n_failed"] = report.n_failed;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace sgcinf
