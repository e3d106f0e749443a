#include "mfnet/abm.hpp"
#include "mfnet/graph.hpp"
#include "mfnet/io.hpp"
#include "mfnet/mfd.hpp"
#include "mfnet/metrics.hpp"
#include "mfnet/recipe.hpp"
#include "mfnet/twostate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace mfnet;
using io::json;

namespace {

// Bad user input that is detected after argument parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": invalid number '" + item + "'");
    }
  }
  return out;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    io::write_text_file(path, text);
}

std::string trajectory_text(const Trajectory& t) {
  std::ostringstream os;
  io::write_trajectory_csv(os, t);
  return os.str();
}

JointDegreeDistribution load_degree_source(const std::string& path) {
  const json j = io::read_json_file(path);
  if (j.contains("edges")) return degree_distribution(io::graph_from_json(j));
  return io::degree_distribution_from_json(j);
}

InitSpec make_init(const std::string& dist, const std::string& placement, const std::string& nodes,
                   int num_states) {
  InitSpec init;
  init.distribution = dist.empty() ? default_init_distribution(num_states) : parse_numbers(dist, "--init");
  if (static_cast<int>(init.distribution.size()) != num_states)
    throw UsageError("--init needs one probability per state");
  try {
    init.placement = parse_placement(placement);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (double x : parse_numbers(nodes, "--nodes")) init.nodes.push_back(static_cast<int>(x));
  init.validate();
  return init;
}

struct GenGraphArgs {
  std::string model = "powerlaw";
  GraphGenSpec spec;
  std::string out;
  std::string degree_out;
};

int cmd_gen_graph(const GenGraphArgs& a) {
  GraphGenSpec spec = a.spec;
  spec.model = parse_graph_model(a.model);
  const DirectedGraph g = generate(spec);
  emit(a.out, io::graph_to_json(g).dump() + "\n");
  if (!a.degree_out.empty())
    io::write_text_file(a.degree_out, io::degree_distribution_to_json(degree_distribution(g)).dump(2) + "\n");
  return 0;
}

struct SimulateArgs {
  std::string graph, model, init, placement = "random", nodes, mode = "parallel", out, log;
  long long steps = 0;
  int rounds = 10;
  int runs = 1;
  double u = 0.0;
  std::uint64_t seed = 0;
  long long record_every = 1;
  bool per_degree = false;
};

int cmd_simulate(const SimulateArgs& a) {
  const DirectedGraph g = io::graph_from_json(io::read_json_file(a.graph));
  const io::LoadedModel m = io::model_from_json(io::read_json_file(a.model));
  const InitSpec init = make_init(a.init, a.placement, a.nodes, m.space.size());
  SimSpec sim;
  sim.mode = parse_sim_mode(a.mode);
  sim.steps = a.steps;
  sim.rounds = a.rounds;
  sim.u = a.u;
  sim.log_transitions = !a.log.empty();
  sim.per_degree = a.per_degree;
  sim.record_every = a.record_every;
  if (sim.mode == SimMode::sequential && sim.steps == 0) sim.steps = 10 * static_cast<long long>(g.edge_count());
  if (a.runs < 1) throw UsageError("--runs must be >= 1");

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < a.runs; ++i) seeds.push_back(a.seed + static_cast<std::uint64_t>(i));
  const auto results = run_many(g, init, AgentModels::uniform(m.kernel), m.space.labels, sim, seeds);

  std::vector<Trajectory> trajs;
  for (const auto& r : results) trajs.push_back(r.trajectory);
  emit(a.out, trajectory_text(mean_trajectory(trajs)));
  if (!a.log.empty()) {
    for (std::size_t i = 0; i < results.size(); ++i) {
      const std::string path = results.size() == 1 ? a.log : a.log + "." + std::to_string(seeds[i]);
      std::ofstream os(path);
      if (!os) throw io::FormatError("cannot write " + path);
      io::write_transition_log(os, results[i].log, m.space);
    }
  }
  return 0;
}

StateSpace make_space(const std::string& labels, const std::string& reference) {
  StateSpace s;
  s.labels = split_list(labels);
  s.reference = reference.empty() ? static_cast<int>(s.labels.size()) - 1 : s.index_of(reference);
  s.validate();
  return s;
}

struct FitArgs {
  std::string log, method = "rum", labels = "T,H,D", reference, features, out;
  double l2 = 1e-6;
  int buckets = 10;
};

int cmd_fit(const FitArgs& a) {
  const StateSpace space = make_space(a.labels, a.reference);
  std::ifstream in(a.log);
  if (!in) throw io::FormatError("cannot open " + a.log);
  const auto records = io::read_transition_log(in, space);
  json out;
  if (parse_fit_method(a.method) == FitMethod::plugin) {
    out = io::plugin_to_json(fit_plugin(records, space, a.buckets));
  } else {
    const FeatureMapSpec features =
        a.features.empty() ? default_features(space) : parse_features(split_list(a.features), space);
    FitOptions opt;
    opt.l2 = a.l2;
    const FitResult fit = fit_mle(records, features, space, opt);
    out = io::choice_model_to_json(fit.model);
    out["fit"] = {{"log_likelihood", fit.report.log_likelihood},
                  {"gradient_inf_norm", fit.report.gradient_inf_norm},
                  {"iterations", fit.report.iterations},
                  {"converged", fit.report.converged},
                  {"records", records.size()}};
    if (!fit.report.converged) std::cerr << "warning: optimizer did not converge\n";
  }
  emit(a.out, out.dump(2) + "\n");
  return 0;
}

struct PredictArgs {
  std::string graph, degree_dist, model, init, activation = "uniform", out;
  double t_end = 10.0, h = 0.01, u = 0.0;
};

int cmd_predict(const PredictArgs& a) {
  if (a.graph.empty() == a.degree_dist.empty()) throw UsageError("give exactly one of --graph or --degree-dist");
  const JointDegreeDistribution q = load_degree_source(a.graph.empty() ? a.degree_dist : a.graph);
  const io::LoadedModel m = io::model_from_json(io::read_json_file(a.model));
  const InitSpec init = make_init(a.init, "random", "", m.space.size());
  OdeSpec ode;
  ode.t_end = a.t_end;
  ode.h = a.h;
  ode.u = a.u;
  ode.activation = parse_activation(a.activation);
  const Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(
      init.distribution.data(), static_cast<Eigen::Index>(init.distribution.size()));
  emit(a.out, trajectory_text(integrate(q, uniform_population(q, rho), m.kernel, ode, m.space.labels)));
  return 0;
}

struct FixedPointArgs {
  std::string degree_dist, logits, out;
  std::vector<std::string> pins;
  double u = 0.0;
  bool contraction = false, statics = false;
};

int cmd_fixed_point(const FixedPointArgs& a) {
  const auto c = parse_numbers(a.logits, "--logits");
  if (c.size() != 6) throw UsageError("--logits needs six values: c0H,cuH,cqH,c0T,cuT,cqT");
  twostate::PhiContext ctx{load_degree_source(a.degree_dist),
                           twostate::TwoStateLogits::from_array({c[0], c[1], c[2], c[3], c[4], c[5]}),
                           a.u,
                           {}};
  for (const auto& p : a.pins) {
    const auto colon = p.find(':');
    if (colon == std::string::npos) throw UsageError("--pin expects l:share");
    const auto v = parse_numbers(p.substr(0, colon) + "," + p.substr(colon + 1), "--pin");
    if (v.size() != 2) throw UsageError("--pin expects l:share");
    ctx.pinned[static_cast<int>(v[0])] = v[1];
  }

  const auto fp = twostate::solve_fixed_point(ctx);
  json report = {{"theta_star", fp.theta_star},
                 {"residual", fp.residual},
                 {"method", fp.method},
                 {"iterations", fp.iterations},
                 {"bracketed_roots", fp.bracketed_roots}};
  if (a.contraction) {
    const auto cr = twostate::contraction_check(ctx);
    report["S_H"] = cr.s_h;
    report["S_T"] = cr.s_t;
    report["eta"] = cr.eta;
    report["bound"] = cr.bound;
    report["is_contraction"] = cr.is_contraction;
    report["measured_sup_derivative"] = cr.measured_sup_derivative;
  }
  if (a.statics) {
    try {
      const auto cs = twostate::comparative_statics(ctx, fp.theta_star);
      report["dtheta_du"] = cs.dtheta_du;
    } catch (const twostate::UnstableFixedPoint& e) {
      report["dtheta_du"] = nullptr;
      report["dtheta_du_error"] = e.what();
    }
  }
  const auto as = twostate::check_assumptions(ctx.logits, ctx);
  report["assumptions"] = {{"A1", as.a1}, {"A2", as.a2}, {"A3", as.a3}, {"A4", as.a4},
                           {"witnesses", as.witnesses}};
  emit(a.out, report.dump(2) + "\n");
  return 0;
}

Trajectory read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io::FormatError("cannot open " + path);
  return io::read_trajectory_csv(in);
}

struct CompareArgs {
  std::string empirical, predicted, state = "T", out;
  double eps = 1e-9;
};

int cmd_compare(const CompareArgs& a) {
  const Trajectory emp = read_csv(a.empirical);
  const Trajectory pred = read_csv(a.predicted);
  json report = {{"state", a.state}, {"kl", mean_kl(emp, pred, a.eps)}};
  try {
    report["correlation"] = pearson_correlation(emp, pred, a.state);
  } catch (const UndefinedCorrelation& e) {
    report["correlation"] = nullptr;
    report["correlation_error"] = e.what();
  }
  report["points"] = align(emp, pred).first.size();
  emit(a.out, report.dump(2) + "\n");
  return 0;
}

struct ValidateArgs {
  std::string graph, model, init, placement = "random", method = "rum", features, activation = "in_degree",
                                  state = "T", out;
  long long window = 150, steps = 2000;
  int seeds = 10, buckets = 5;
  double u = 0.0, l2 = 1e-6, h = 0.01;
  std::uint64_t seed = 0;
};

int cmd_validate(const ValidateArgs& a) {
  const DirectedGraph g = io::graph_from_json(io::read_json_file(a.graph));
  const io::LoadedModel m = io::model_from_json(io::read_json_file(a.model));
  const InitSpec init = make_init(a.init, a.placement, "", m.space.size());
  ValidationSpec spec;
  spec.steps = a.steps;
  spec.fit_window = a.window;
  spec.method = parse_fit_method(a.method);
  spec.seeds = a.seeds;
  spec.base_seed = a.seed;
  spec.u = a.u;
  if (!a.features.empty()) spec.features = parse_features(split_list(a.features), m.space);
  spec.l2 = a.l2;
  spec.buckets = a.buckets;
  spec.h = a.h;
  spec.activation = parse_activation(a.activation);
  spec.state = a.state;
  const auto r = validate_protocol(g, AgentModels::uniform(m.kernel), m.space, init, spec);
  json seeds = json::array();
  for (const auto& s : r.seeds) seeds.push_back({{"seed", s.seed}, {"correlation", s.correlation}, {"kl", s.kl}});
  const json report = {{"method", a.method},
                       {"window", a.window},
                       {"correlation_mean", r.correlation_mean},
                       {"correlation_std", r.correlation_std},
                       {"kl_mean", r.kl_mean},
                       {"kl_std", r.kl_std},
                       {"seeds", std::move(seeds)}};
  emit(a.out, report.dump(2) + "\n");
  return 0;
}

int cmd_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open recipe " + path);
  std::stringstream text;
  text << in.rdbuf();
  const ExperimentRecipe recipe = parse_config(text.str());
  const auto base = std::filesystem::absolute(path).parent_path();
  const RecipeResult r = run_recipe(recipe, base);
  for (const auto& c : r.cells)
    if (!c.ok) std::cerr << "cell " << c.cell.name << " failed: " << c.error << '\n';
  std::cout << r.summary_csv;
  return r.any_failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field dynamics of influence networks: simulation, fitting and prediction"};
  app.require_subcommand(1);

  GenGraphArgs gg;
  auto* gen = app.add_subcommand("gen-graph", "Generate a directed influence graph");
  gen->add_option("--model", gg.model, "powerlaw|ba|er|chain|tree")->capture_default_str();
  gen->add_option("--n", gg.spec.node_count, "Number of nodes")->capture_default_str();
  gen->add_option("--gamma", gg.spec.gamma, "Power-law exponent")->capture_default_str();
  gen->add_option("--p", gg.spec.er_p, "Edge probability (er)")->capture_default_str();
  gen->add_option("--branching", gg.spec.tree_branching, "Branching factor (tree)")->capture_default_str();
  gen->add_option("--clip", gg.spec.edge_clip, "Maximum in-degree (powerlaw)")->capture_default_str();
  gen->add_option("--seed", gg.spec.seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gg.out, "Output graph JSON (default stdout)");
  gen->add_option("--degree-dist-out", gg.degree_out, "Also write the joint degree distribution");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run the agent-based simulation");
  sim->add_option("--graph", sa.graph, "Graph JSON")->required();
  sim->add_option("--model", sa.model, "Transition model JSON")->required();
  sim->add_option("--init", sa.init, "Initial state probabilities, comma separated");
  sim->add_option("--placement", sa.placement, "Placement of the first state's quota")->capture_default_str();
  sim->add_option("--nodes", sa.nodes, "Node list for explicit placement");
  sim->add_option("--mode", sa.mode, "parallel|sequential")->capture_default_str();
  auto* steps = sim->add_option("--steps", sa.steps, "Edge events (sequential)");
  auto* rounds = sim->add_option("--rounds", sa.rounds, "Rounds (parallel)")->capture_default_str();
  steps->excludes(rounds);
  sim->add_option("--runs", sa.runs, "Independent runs; the output is their mean")->capture_default_str();
  sim->add_option("--u", sa.u, "Control value")->capture_default_str();
  sim->add_option("--seed", sa.seed, "Seed of the first run; run i uses seed + i")->capture_default_str();
  sim->add_option("--record-every", sa.record_every, "Sequential mode: record every k-th step")->capture_default_str();
  sim->add_flag("--per-degree", sa.per_degree, "Write per-degree columns");
  sim->add_option("--out", sa.out, "Trajectory CSV (default stdout)");
  sim->add_option("--log", sa.log, "Transition log JSONL");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a transition model to a transition log");
  fit->add_option("--log", fa.log, "Transition log JSONL")->required();
  fit->add_option("--method", fa.method, "rum|plugin")->capture_default_str();
  fit->add_option("--l2", fa.l2, "Ridge penalty")->capture_default_str();
  fit->add_option("--buckets", fa.buckets, "Plugin share buckets")->capture_default_str();
  fit->add_option("--labels", fa.labels, "State labels")->capture_default_str();
  fit->add_option("--reference", fa.reference, "Reference label (default: last)");
  fit->add_option("--features", fa.features, "Comma separated feature terms");
  fit->add_option("--out", fa.out, "Model JSON (default stdout)");

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Integrate the mean-field ODE");
  pred->set_help_flag("--help", "Print this help message and exit");
  pred->add_option("--graph", pa.graph, "Graph JSON");
  pred->add_option("--degree-dist", pa.degree_dist, "Joint degree distribution JSON");
  pred->add_option("--model", pa.model, "Transition model JSON")->required();
  pred->add_option("--init", pa.init, "Initial state probabilities, comma separated");
  pred->add_option("--t-end", pa.t_end, "Final time")->capture_default_str();
  pred->add_option("--h", pa.h, "RK4 step")->capture_default_str();
  pred->add_option("--u", pa.u, "Control value")->capture_default_str();
  pred->add_option("--activation", pa.activation, "uniform|in_degree")->capture_default_str();
  pred->add_option("--out", pa.out, "Trajectory CSV (default stdout)");

  FixedPointArgs fpa;
  auto* fp = app.add_subcommand("fixed-point", "Two-state equilibrium analysis");
  fp->add_option("--degree-dist", fpa.degree_dist, "Degree distribution or graph JSON")->required();
  fp->add_option("--logits", fpa.logits, "c0H,cuH,cqH,c0T,cuT,cqT")->required();
  fp->add_option("--u", fpa.u, "Control value")->capture_default_str();
  fp->add_option("--pin", fpa.pins, "Hold in-degree class l at a fixed truthful share (l:share)");
  fp->add_flag("--check-contraction", fpa.contraction, "Report the contraction bound");
  fp->add_flag("--comparative-statics", fpa.statics, "Report d theta* / du");
  fp->add_option("--out", fpa.out, "Report JSON (default stdout)");

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "Score a predicted trajectory against an empirical one");
  cmp->add_option("--empirical", ca.empirical, "Empirical trajectory CSV")->required();
  cmp->add_option("--predicted", ca.predicted, "Predicted trajectory CSV")->required();
  cmp->add_option("--state", ca.state, "State for the correlation")->capture_default_str();
  cmp->add_option("--eps", ca.eps, "KL floor")->capture_default_str();
  cmp->add_option("--out", ca.out, "Report JSON (default stdout)");

  ValidateArgs va;
  auto* val = app.add_subcommand("validate", "Fit-and-predict validation on simulated data");
  val->set_help_flag("--help", "Print this help message and exit");
  val->add_option("--graph", va.graph, "Graph JSON")->required();
  val->add_option("--model", va.model, "Ground-truth transition model JSON")->required();
  val->add_option("--init", va.init, "Initial state probabilities, comma separated");
  val->add_option("--placement", va.placement, "Initial placement")->capture_default_str();
  val->add_option("--window", va.window, "Transitions used for fitting")->capture_default_str();
  val->add_option("--steps", va.steps, "Transitions per run")->capture_default_str();
  val->add_option("--seeds", va.seeds, "Number of runs")->capture_default_str();
  val->add_option("--seed", va.seed, "Base seed")->capture_default_str();
  val->add_option("--method", va.method, "rum|plugin")->capture_default_str();
  val->add_option("--features", va.features, "Feature terms for rum");
  val->add_option("--l2", va.l2, "Ridge penalty")->capture_default_str();
  val->add_option("--buckets", va.buckets, "Plugin share buckets")->capture_default_str();
  val->add_option("--u", va.u, "Control value")->capture_default_str();
  val->add_option("--h", va.h, "RK4 step")->capture_default_str();
  val->add_option("--activation", va.activation, "uniform|in_degree")->capture_default_str();
  val->add_option("--state", va.state, "State for the correlation")->capture_default_str();
  val->add_option("--out", va.out, "Report JSON (default stdout)");

  std::string recipe;
  auto* runc = app.add_subcommand("run", "Run an experiment recipe");
  runc->add_option("recipe", recipe, "Recipe JSON; relative paths resolve against its directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_graph(gg);
    if (*sim) return cmd_simulate(sa);
    if (*fit) return cmd_fit(fa);
    if (*pred) return cmd_predict(pa);
    if (*fp) return cmd_fixed_point(fpa);
    if (*cmp) return cmd_compare(ca);
    if (*val) return cmd_validate(va);
    if (*runc) return cmd_run(recipe);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
