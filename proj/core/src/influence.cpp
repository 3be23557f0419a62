#include "sgcinf/influence.hpp"

#include <fstream>

#include "sgcinf/io.hpp"

namespace sgcinf {

namespace {

ErmProblem problem_from_model(const SgcModel& model) {
  if (!model.train_view.embeddings)
    throw ValidationError("model carries no training embeddings; refit or re-attach them");
  ErmProblem prob;
  prob.Z = &model.train_view.embeddings->Z;
  prob.nodes = model.train_view.nodes;
  prob.labels = model.train_view.labels;
  prob.num_classes = model.num_classes;
  prob.lambda = model.config.lambda;
  prob.norm_n = model.train_view.norm_n;
  return prob;
}

}  // namespace

InfluenceEngine::InfluenceEngine(const SgcModel& model, const AttributedGraph& graph,
                                 const LabeledSplit& split, CgOptions cg)
    : model_(&model), graph_(&graph), split_(&split), cg_(cg) {
  prob_ = problem_from_model(model);
  Z_ = prob_.Z;
  hess_ = std::make_unique<HessianOperator>(prob_, model.params);
}

InfluenceEngine::InfluenceEngine(const SgcModel& model, const LabeledSplit& split, CgOptions cg)
    : model_(&model), split_(&split), cg_(cg) {
  prob_ = problem_from_model(model);
  Z_ = prob_.Z;
  hess_ = std::make_unique<HessianOperator>(prob_, model.params);
}

Eigen::VectorXd InfluenceEngine::solve(const Eigen::VectorXd& rhs) const {
  return conjugate_gradient([&](const Eigen::VectorXd& v) { return hess_->apply(v); }, rhs, cg_);
}

Eigen::VectorXd InfluenceEngine::perturbation_gradient(const PerturbationDelta& delta) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(model_->params.dim());
  const bool node_removal = delta.target.kind == TargetKind::NodeRemoval;
  const NodeId removed = delta.target.a;

  for (int i = 0; i < delta.size(); ++i) {
    const NodeId v = delta.nodes[static_cast<size_t>(i)];
    if (!split_->in_train(v)) continue;
    if (node_removal && v == removed) continue;  // sum runs over S \ {v_i}
    const int y = split_->label(v);
    const Eigen::VectorXd z = Z_->row(v);
    const Eigen::VectorXd z_new = z + delta.rows.row(i).transpose();
    g += sample_gradient(model_->params, z_new, y) - sample_gradient(model_->params, z, y);
  }
  if (node_removal && split_->in_train(removed)) {
    // The removed training node's own loss term leaves the objective.
    g -= sample_gradient(model_->params, Z_->row(removed), split_->label(removed));
  }
  return g;
}

Eigen::VectorXd InfluenceEngine::sample_perturbation_gradient(const Eigen::VectorXd& z,
                                                              int y) const {
  return -sample_gradient(model_->params, z, y);
}

EvalProbe InfluenceEngine::make_probe(const std::vector<NodeId>& eval_set) const {
  if (eval_set.empty()) throw ValidationError("eval set must be non-empty");
  EvalProbe probe;
  probe.eval_set = eval_set;
  probe.norm_n = prob_.norm_n;
  probe.eval_grad = Eigen::VectorXd::Zero(model_->params.dim());
  for (NodeId v : eval_set) {
    const int y = split_->label(v);
    if (y < 0) throw ValidationError("eval node " + std::to_string(v) + " is unlabeled");
    probe.eval_grad += sample_gradient(model_->params, Z_->row(v), y);
  }
  probe.s = solve(probe.eval_grad);
  return probe;
}

double InfluenceEngine::eval_influence_of(const EvalProbe& probe, const Eigen::VectorXd& g) const {
  return -probe.s.dot(g) / prob_.norm_n;
}

double InfluenceEngine::representation_shift(const PerturbationDelta& delta,
                                             const std::vector<NodeId>& eval_set) const {
  double shift = 0;
  for (NodeId v : eval_set) {
    const int i = delta.index_of(v);
    if (i < 0) continue;
    const int y = split_->label(v);
    const Eigen::VectorXd z = Z_->row(v);
    shift += sample_loss(model_->params, z + delta.rows.row(i).transpose(), y) -
             sample_loss(model_->params, z, y);
  }
  return shift;
}

InfluenceEstimate InfluenceEngine::estimate_from_delta(const PerturbationDelta& delta,
                                                       const EvalProbe* probe) const {
  const Eigen::VectorXd g = perturbation_gradient(delta);
  InfluenceEstimate est;
  est.target = delta.target;
  est.param_change = -solve(g) / prob_.norm_n;
  if (probe)
    est.eval_change =
        representation_shift(delta, probe->eval_set) + eval_influence_of(*probe, g);
  return est;
}

InfluenceEstimate InfluenceEngine::estimate(const Target& target, const EvalProbe* probe) const {
  switch (target.kind) {
    case TargetKind::EdgeRemoval: {
      if (!graph_) throw ValidationError("engine was built without a graph");
      return estimate_from_delta(
          delta_edge_removal(*graph_, model_->k, Edge(target.a, target.b)), probe);
    }
    case TargetKind::NodeRemoval: {
      if (!graph_) throw ValidationError("engine was built without a graph");
      return estimate_from_delta(delta_node_removal(*graph_, model_->k, target.a), probe);
    }
    case TargetKind::SampleRemoval: {
      const int y = split_->label(target.a);
      if (y < 0) throw ValidationError("sample " + std::to_string(target.a) + " is unlabeled");
      const Eigen::VectorXd g = sample_perturbation_gradient(Z_->row(target.a), y);
      InfluenceEstimate est;
      est.target = target;
      est.param_change = -solve(g) / prob_.norm_n;
      if (probe) est.eval_change = eval_influence_of(*probe, g);
      return est;
    }
  }
  throw ValidationError("unknown target kind");
}

InfluenceEstimate influence_remove_sample(const SgcModel& model, const LabeledSplit& split,
                                          const Eigen::VectorXd& z_i, int y_i) {
  InfluenceEngine engine(model, split);
  const Eigen::VectorXd g = engine.sample_perturbation_gradient(z_i, y_i);
  InfluenceEstimate est;
  est.target = Target::sample(-1);
  est.param_change = -engine.solve(g) / engine.norm_n();
  return est;
}

InfluenceEstimate influence_edge_removal(const SgcModel& model, const LabeledSplit& split,
                                         const PerturbationDelta& delta) {
  if (delta.target.kind != TargetKind::EdgeRemoval)
    throw ValidationError("delta target is not an edge removal");
  if (delta.k != model.k) throw ValidationError("delta hop count differs from the model's k");
  InfluenceEngine engine(model, split);
  return engine.estimate_from_delta(delta);
}

InfluenceEstimate influence_node_removal(const SgcModel& model, const LabeledSplit& split,
                                         const PerturbationDelta& delta, NodeId v_i) {
  if (delta.target.kind != TargetKind::NodeRemoval || delta.target.a != v_i)
    throw ValidationError("delta target is not the removal of node " + std::to_string(v_i));
  if (delta.k != model.k) throw ValidationError("delta hop count differs from the model's k");
  InfluenceEngine engine(model, split);
  return engine.estimate_from_delta(delta);
}

EvalProbe make_eval_probe(const SgcModel& model, const LabeledSplit& split,
                          const std::vector<NodeId>& eval_set) {
  InfluenceEngine engine(model, split);
  return engine.make_probe(eval_set);
}

double eval_influence(const EvalProbe& probe, const Eigen::VectorXd& gradient_diff) {
  return -probe.s.dot(gradient_diff) / probe.norm_n;
}

BatchInfluences batch_influences(const SgcModel& model, const AttributedGraph& graph,
                                 const LabeledSplit& split, const std::vector<Target>& targets,
                                 const EvalProbe& probe) {
  InfluenceEngine engine(model, graph, split);
  BatchInfluences out;
  out.estimates.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    try {
      out.estimates.push_back(engine.estimate(targets[i], &probe));
    } catch (const Error& e) {
      InfluenceEstimate failed;
      failed.target = targets[i];
      out.estimates.push_back(std::move(failed));
      out.failures.emplace_back(i, e.what());
    }
  }
  return out;
}

void write_influence_csv(const std::filesystem::path& path,
                         const std::vector<InfluenceEstimate>& estimates) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "target_type,target_a,target_b,eval_influence,param_change_norm\n";
  for (const InfluenceEstimate& est : estimates) {
    out << target_kind_name(est.target.kind) << ',' << est.target.a << ',' << est.target.b << ','
        << (est.eval_change ? format_double(*est.eval_change) : std::string("nan")) << ','
        << format_double(est.param_change.size() ? est.param_change.norm() : 0.0) << "\n";
  }
}

}  // namespace sgcinf
