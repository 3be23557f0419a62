// Command-line front end: dataset ingestion, training, influence reports,
// estimator validation, bound sweeps, pruning/attack planning, and synthetic
// bundle generation. Exit codes: 0 success, 2 validation/parse error,
// 3 non-convergence or solver stall.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "sgcinf/bounds.hpp"
#include "sgcinf/dataset.hpp"
#include "sgcinf/influence.hpp"
#include "sgcinf/io.hpp"
#include "sgcinf/model.hpp"
#include "sgcinf/oracle.hpp"
#include "sgcinf/planner.hpp"
#include "sgcinf/rng.hpp"

namespace {

using namespace sgcinf;

struct CommonDataArgs {
  std::string data;
  bool row_normalize = false;

  DatasetBundle load() const {
    IngestOptions opts;
    opts.row_normalize_features = row_normalize;
    return ingest_dataset(data, opts);
  }
};

std::vector<Target> collect_targets(const std::string& kind, const AttributedGraph& graph,
                                    const LabeledSplit& split, int sample, std::uint64_t seed) {
  std::vector<Target> targets;
  if (kind == "edges") {
    for (const Edge& e : graph.edges()) targets.push_back(Target::edge(e));
  } else if (kind == "nodes") {
    for (NodeId v : split.train()) targets.push_back(Target::node(v));
  } else if (kind == "samples") {
    for (NodeId v : split.train()) targets.push_back(Target::sample(v));
  } else {
    throw ValidationError("unknown target kind '" + kind + "'");
  }
  if (sample > 0 && static_cast<size_t>(sample) < targets.size()) {
    Rng rng(seed);
    targets = rng.sample(std::move(targets), static_cast<size_t>(sample));
  }
  return targets;
}

std::vector<NodeId> eval_set_of(const std::string& name, const LabeledSplit& split) {
  if (name == "val") return split.val();
  if (name == "test") return split.test();
  throw ValidationError("eval set must be 'val' or 'test'");
}

std::vector<double> parse_lambda_list(const std::string& csv) {
  std::vector<double> out;
  size_t start = 0;
  while (start <= csv.size()) {
    size_t pos = csv.find(',', start);
    const std::string cell =
        csv.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (!cell.empty()) out.push_back(std::stod(cell));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw ValidationError("--lambdas list is empty");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Influence-function analysis of SGC models on attributed graphs"};
  app.require_subcommand(1);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Fit an SGC model and write a checkpoint");
  CommonDataArgs train_data;
  int train_k = 2;
  double train_lambda = 0.1;
  double train_grad_tol = 1e-8;
  int train_max_iters = 200;
  std::string train_out = "model.json";
  train_cmd->add_option("--data", train_data.data, "dataset bundle directory")->required();
  train_cmd->add_option("--k", train_k, "propagation depth");
  train_cmd->add_option("--lambda", train_lambda, "L2 strength");
  train_cmd->add_option("--grad-tol", train_grad_tol, "gradient-norm tolerance");
  train_cmd->add_option("--max-iters", train_max_iters, "Newton iteration cap");
  train_cmd->add_flag("--row-normalize", train_data.row_normalize, "L1-normalize feature rows");
  train_cmd->add_option("--out", train_out, "checkpoint path");

  // ---- influence ----
  auto* infl_cmd = app.add_subcommand("influence", "Estimate removal influences");
  CommonDataArgs infl_data;
  std::string infl_model = "model.json";
  std::string infl_targets = "edges";
  std::string infl_eval = "val";
  int infl_sample = 0;
  std::uint64_t infl_seed = 0;
  std::string infl_out = "influence.csv";
  infl_cmd->add_option("--data", infl_data.data, "dataset bundle directory")->required();
  infl_cmd->add_option("--model", infl_model, "checkpoint from `train`")->required();
  infl_cmd->add_option("--targets", infl_targets, "edges|nodes|samples");
  infl_cmd->add_option("--eval", infl_eval, "val|test");
  infl_cmd->add_option("--sample", infl_sample, "subsample this many targets");
  infl_cmd->add_option("--seed", infl_seed, "subsampling seed");
  infl_cmd->add_flag("--row-normalize", infl_data.row_normalize, "L1-normalize feature rows");
  infl_cmd->add_option("--out", infl_out, "influence CSV path");

  // ---- validate ----
  auto* val_cmd = app.add_subcommand("validate", "Compare estimates against retraining");
  CommonDataArgs val_data;
  int val_k = 2;
  double val_lambda = 0.1;
  std::string val_targets = "edges";
  std::string val_eval = "val";
  int val_sample = 0;
  std::uint64_t val_seed = 0;
  std::string val_out = "scatter.csv";
  std::string val_summary = "summary.json";
  val_cmd->add_option("--data", val_data.data, "dataset bundle directory")->required();
  val_cmd->add_option("--k", val_k, "propagation depth");
  val_cmd->add_option("--lambda", val_lambda, "L2 strength");
  val_cmd->add_option("--targets", val_targets, "edges|nodes|samples");
  val_cmd->add_option("--eval", val_eval, "val|test");
  val_cmd->add_option("--sample", val_sample, "subsample this many targets");
  val_cmd->add_option("--seed", val_seed, "subsampling seed");
  val_cmd->add_flag("--row-normalize", val_data.row_normalize, "L1-normalize feature rows");
  val_cmd->add_option("--out", val_out, "scatter CSV path");
  val_cmd->add_option("--summary", val_summary, "summary JSON path");

  // ---- bound-sweep ----
  auto* sweep_cmd = app.add_subcommand("bound-sweep", "Lambda sweep with oracle and bounds");
  CommonDataArgs sweep_data;
  int sweep_k = 2;
  std::string sweep_lambdas = "1e-1,1e-2,1e-3";
  int sweep_edges = 20;
  std::uint64_t sweep_seed = 0;
  double sweep_c = -1.0;
  std::string sweep_out = "sweep.csv";
  sweep_cmd->add_option("--data", sweep_data.data, "dataset bundle directory")->required();
  sweep_cmd->add_option("--k", sweep_k, "propagation depth");
  sweep_cmd->add_option("--lambdas", sweep_lambdas, "comma list, descending");
  sweep_cmd->add_option("--edges", sweep_edges, "number of sampled edges");
  sweep_cmd->add_option("--seed", sweep_seed, "sampling seed");
  sweep_cmd->add_option("--lipschitz-c", sweep_c,
                        "use this C instead of estimating one per lambda");
  sweep_cmd->add_flag("--row-normalize", sweep_data.row_normalize, "L1-normalize feature rows");
  sweep_cmd->add_option("--out", sweep_out, "sweep CSV path");

  // ---- prune ----
  auto* prune_cmd = app.add_subcommand("prune", "Remove negative-influence edges");
  CommonDataArgs prune_data;
  int prune_k = 2;
  double prune_lambda = 0.1;
  int prune_budget = 10;
  int prune_recompute = 0;
  std::string prune_out = "trajectory.csv";
  prune_cmd->add_option("--data", prune_data.data, "dataset bundle directory")->required();
  prune_cmd->add_option("--k", prune_k, "propagation depth");
  prune_cmd->add_option("--lambda", prune_lambda, "L2 strength");
  prune_cmd->add_option("--budget", prune_budget, "max edges to remove");
  prune_cmd->add_option("--recompute-every", prune_recompute, "re-rank period (0 = static)");
  prune_cmd->add_flag("--row-normalize", prune_data.row_normalize, "L1-normalize feature rows");
  prune_cmd->add_option("--out", prune_out, "trajectory CSV path");

  // ---- attack ----
  auto* attack_cmd = app.add_subcommand("attack", "Influence-guided removals or baselines");
  CommonDataArgs attack_data;
  int attack_k = 2;
  double attack_lambda = 0.1;
  std::string attack_kind = "edges";
  double attack_rate = 0.05;
  int attack_count = -1;
  std::string attack_baseline = "none";
  std::uint64_t attack_seed = 0;
  int attack_recompute = 0;
  std::string attack_out = "trajectory.csv";
  attack_cmd->add_option("--data", attack_data.data, "dataset bundle directory")->required();
  attack_cmd->add_option("--k", attack_k, "propagation depth");
  attack_cmd->add_option("--lambda", attack_lambda, "L2 strength");
  attack_cmd->add_option("--kind", attack_kind, "edges|nodes");
  attack_cmd->add_option("--rate", attack_rate, "fraction of the candidate pool");
  attack_cmd->add_option("--count", attack_count, "absolute removal count (overrides --rate)");
  attack_cmd->add_option("--baseline", attack_baseline, "none|random|degree");
  attack_cmd->add_option("--seed", attack_seed, "baseline seed");
  attack_cmd->add_option("--recompute-every", attack_recompute, "re-rank period (0 = static)");
  attack_cmd->add_flag("--row-normalize", attack_data.row_normalize, "L1-normalize feature rows");
  attack_cmd->add_option("--out", attack_out, "trajectory CSV path");

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic SBM bundle");
  SyntheticConfig synth_cfg;
  std::string synth_out = "synth";
  synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed");
  synth_cmd->add_option("--blocks", synth_cfg.blocks, "number of classes/blocks");
  synth_cmd->add_option("--nodes-per-block", synth_cfg.nodes_per_block, "nodes per block");
  synth_cmd->add_option("--p-in", synth_cfg.p_in, "within-block edge probability");
  synth_cmd->add_option("--p-out", synth_cfg.p_out, "cross-block edge probability");
  synth_cmd->add_option("--noise-rate", synth_cfg.noise_rate,
                        "planted inter-class edges as a fraction of |E|");
  synth_cmd->add_option("--feature-dim", synth_cfg.feature_dim, "feature dimension");
  synth_cmd->add_option("--out", synth_out, "output bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit clean, bad usage is a validation error
  }

  if (train_cmd->parsed()) {
    const DatasetBundle data = train_data.load();
    const TrainConfig cfg{train_lambda, train_grad_tol, train_max_iters};
    const SgcModel model = train(propagate(data.graph, train_k), data.split, cfg);
    save_checkpoint(model, train_out);
    const EvalMetrics m = evaluate(model.params, model.train_view.embeddings->Z, data.split);
    std::cout << "trained k=" << train_k << " lambda=" << format_double(train_lambda)
              << " val_acc=" << format_double(m.val_accuracy)
              << " test_acc=" << format_double(m.test_accuracy)
              << " val_loss=" << format_double(m.val_loss) << "\n";
    return 0;
  }

  if (infl_cmd->parsed()) {
    const DatasetBundle data = infl_data.load();
    SgcModel model = load_checkpoint(infl_model);
    if (model.num_classes != data.split.num_classes())
      throw ValidationError("checkpoint class count does not match the dataset");
    const EmbeddingMatrix z = propagate(data.graph, model.k);
    if (model.params.feature_dim() != data.graph.feature_dim())
      throw ValidationError("checkpoint feature dimension does not match the dataset");
    model.train_view.embeddings = std::make_shared<EmbeddingMatrix>(z);
    model.train_view.nodes = data.split.train();
    model.train_view.labels.clear();
    for (NodeId v : data.split.train()) model.train_view.labels.push_back(data.split.label(v));
    model.train_view.norm_n = static_cast<double>(data.split.train().size());

    const std::vector<Target> targets =
        collect_targets(infl_targets, data.graph, data.split, infl_sample, infl_seed);
    const EvalProbe probe =
        make_eval_probe(model, data.split, eval_set_of(infl_eval, data.split));
    const BatchInfluences batch =
        batch_influences(model, data.graph, data.split, targets, probe);
    write_influence_csv(infl_out, batch.estimates);
    std::cout << "wrote " << batch.estimates.size() << " estimates to " << infl_out;
    if (!batch.failures.empty()) std::cout << " (" << batch.failures.size() << " failed)";
    std::cout << "\n";
    return 0;
  }

  if (val_cmd->parsed()) {
    const DatasetBundle data = val_data.load();
    const TrainConfig cfg{val_lambda, 1e-8, 200};
    const std::vector<Target> targets =
        collect_targets(val_targets, data.graph, data.split, val_sample, val_seed);
    const ValidationReport report = validate_influence(
        data.graph, data.split, val_k, cfg, targets, eval_set_of(val_eval, data.split));
    write_validation_csv(val_out, report);
    write_validation_summary(val_summary, report);
    std::cout << "validated " << report.targets.size() << " targets";
    if (report.rho) std::cout << " rho=" << format_double(*report.rho);
    if (report.n_failed) std::cout << " failed=" << report.n_failed;
    std::cout << "\n";
    return 0;
  }

  if (sweep_cmd->parsed()) {
    const DatasetBundle data = sweep_data.load();
    LambdaSweepConfig cfg;
    cfg.k = sweep_k;
    cfg.lambdas = parse_lambda_list(sweep_lambdas);
    cfg.seed = sweep_seed;
    if (sweep_c >= 0.0) cfg.lipschitz_c = sweep_c;
    std::vector<Edge> pool = data.graph.edges();
    Rng rng(sweep_seed);
    cfg.edge_sample = rng.sample(std::move(pool), static_cast<size_t>(sweep_edges));
    const std::vector<LambdaSweepRecord> records = lambda_sweep(data.graph, data.split, cfg);
    write_sweep_csv(sweep_out, records);
    for (const LambdaSweepRecord& rec : records) {
      std::cout << "lambda=" << format_double(rec.lambda);
      if (rec.failed) {
        std::cout << " FAILED: " << rec.error << "\n";
        continue;
      }
      if (rec.rho) std::cout << " rho=" << format_double(*rec.rho);
      std::cout << " mean_err=" << format_double(rec.mean_observed_err)
                << " mean_bound=" << format_double(rec.mean_bound) << "\n";
    }
    return 0;
  }

  if (prune_cmd->parsed()) {
    const DatasetBundle data = prune_data.load();
    const TrainConfig cfg{prune_lambda, 1e-8, 200};
    EditPlan plan = plan_prune_negative_edges(data.graph, data.split, prune_k, cfg, prune_budget);
    plan.recompute_every = prune_recompute;
    const TrajectoryReport report =
        run_trajectory(data.graph, data.split, prune_k, cfg, plan);
    write_trajectory_csv(prune_out, report);
    std::cout << "pruned " << plan.items.size() << " edges; wrote " << prune_out << "\n";
    return report.aborted ? 3 : 0;
  }

  if (attack_cmd->parsed()) {
    const DatasetBundle data = attack_data.load();
    const TrainConfig cfg{attack_lambda, 1e-8, 200};
    AttackOptions opts;
    if (attack_kind == "edges")
      opts.kind = AttackKind::Edges;
    else if (attack_kind == "nodes")
      opts.kind = AttackKind::Nodes;
    else
      throw ValidationError("--kind must be edges or nodes");
    opts.rate = attack_rate;
    if (attack_count >= 0) opts.count = attack_count;
    if (attack_baseline == "none")
      opts.baseline = AttackBaseline::None;
    else if (attack_baseline == "random")
      opts.baseline = AttackBaseline::Random;
    else if (attack_baseline == "degree")
      opts.baseline = AttackBaseline::Degree;
    else
      throw ValidationError("--baseline must be none, random, or degree");
    opts.seed = attack_seed;
    EditPlan plan = plan_attack(data.graph, data.split, attack_k, cfg, opts);
    plan.recompute_every = attack_recompute;
    const TrajectoryReport report =
        run_trajectory(data.graph, data.split, attack_k, cfg, plan);
    write_trajectory_csv(attack_out, report);
    std::cout << "attacked " << plan.items.size() << " " << attack_kind << "; wrote " << attack_out
              << "\n";
    return report.aborted ? 3 : 0;
  }

  if (synth_cmd->parsed()) {
    const SyntheticDataset data = generate_synthetic(synth_cfg);
    emit_synthetic(synth_out, data);
    std::cout << "wrote bundle to " << synth_out << " (" << data.graph.num_nodes() << " nodes, "
              << data.graph.edges().size() << " edges, " << data.planted_edges.size()
              << " planted)\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sgcinf::NonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sgcinf::SolverStall& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sgcinf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
