#include "mfnet/recipe.hpp"

#include "mfnet/parallel.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mfnet {

using io::json;

namespace {

// Typed access to a JSON object that rejects unknown keys and reports the
// full key path on every error.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + ": expected an object");
    for (const auto& [key, value] : j_.items())
      if (!allowed.contains(key)) throw ConfigError("unknown key '" + where(key) + "'");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) const { return j_.at(key); }
  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  T get(const std::string& key) const {
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where(key) + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.get<long long>() < 0) throw ConfigError(where(key) + ": expected a nonnegative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    }
    return v.get<T>();
  }

  template <typename T>
  std::vector<T> list(const std::string& key, bool non_empty = true) const {
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array");
    if (non_empty && v.empty()) throw ConfigError(where(key) + ": must not be empty");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& e = v[i];
      const std::string at = where(key) + "[" + std::to_string(i) + "]";
      if constexpr (std::is_integral_v<T>) {
        if (!e.is_number_integer()) throw ConfigError(at + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (e.get<long long>() < 0) throw ConfigError(at + ": expected a nonnegative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!e.is_number()) throw ConfigError(at + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!e.is_string()) throw ConfigError(at + ": expected a string");
      }
      out.push_back(e.get<T>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

template <typename F>
auto wrap(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

ModelRef parse_model_ref(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  ModelRef ref;
  if (j.contains("path")) {
    const Section s(j, where, {"path"});
    ref.path = s.get<std::string>("path");
  } else {
    wrap(where, [&] { return io::model_from_json(j); });
    ref.inline_model = j;
  }
  return ref;
}

json model_ref_to_json(const ModelRef& m) {
  return m.path.empty() ? m.inline_model : json{{"path", m.path}};
}

void parse_graph(const json& j, ExperimentRecipe& r) {
  const Section s(j, "graph", {"model", "n", "gamma", "clip", "p", "branching", "seed", "path"});
  if (s.has("path")) {
    for (const char* k : {"model", "n", "gamma", "clip", "p", "branching", "seed"})
      if (s.has(k)) throw ConfigError("graph." + std::string(k) + ": not allowed together with graph.path");
    r.graph_path = s.get<std::string>("path");
    return;
  }
  if (!s.has("model")) throw ConfigError("graph.model: required");
  if (!s.has("n")) throw ConfigError("graph.n: required");
  r.graph.model = wrap("graph.model", [&] { return parse_graph_model(s.get<std::string>("model")); });
  r.graph.node_count = s.get<int>("n");
  if (r.graph.node_count < 1) throw ConfigError("graph.n: must be >= 1");
  if (s.has("gamma")) r.graph.gamma = s.get<double>("gamma");
  if (!(r.graph.gamma > 1.0)) throw ConfigError("graph.gamma: must be > 1");
  if (s.has("clip")) r.graph.edge_clip = s.get<int>("clip");
  if (r.graph.edge_clip < 1) throw ConfigError("graph.clip: must be >= 1");
  if (s.has("p")) r.graph.er_p = s.get<double>("p");
  if (!(r.graph.er_p >= 0.0 && r.graph.er_p <= 1.0)) throw ConfigError("graph.p: must lie in [0, 1]");
  if (s.has("branching")) r.graph.tree_branching = s.get<int>("branching");
  if (r.graph.tree_branching < 1) throw ConfigError("graph.branching: must be >= 1");
  if (s.has("seed")) {
    r.graph.seed = s.get<std::uint64_t>("seed");
    r.graph_seed_fixed = true;
  }
}

void check_distribution(const std::vector<double>& d, const std::string& where) {
  double total = 0.0;
  for (double p : d) {
    if (!(p >= 0.0)) throw ConfigError(where + ": probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(where + ": must sum to 1");
}

}  // namespace

std::vector<double> default_init_distribution(int num_states) {
  std::vector<double> d(static_cast<std::size_t>(num_states), 0.65 / (num_states - 1));
  d[0] = 0.35;
  return d;
}

ExperimentRecipe parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  const Section top(root, "", {"graph", "model", "classes", "class_placement", "init", "sim",
                               "sweep", "seeds", "output_dir"});
  ExperimentRecipe r;

  if (!top.has("graph")) throw ConfigError("graph: required");
  parse_graph(top.raw("graph"), r);

  if (top.has("model") == top.has("classes"))
    throw ConfigError("exactly one of 'model' or 'classes' is required");
  if (top.has("model")) {
    r.classes.push_back({parse_model_ref(top.raw("model"), "model"), 1.0});
  } else {
    const json& cls = top.raw("classes");
    if (!cls.is_array() || cls.empty()) throw ConfigError("classes: expected a non-empty array");
    std::vector<double> fractions;
    for (std::size_t i = 0; i < cls.size(); ++i) {
      const std::string at = "classes[" + std::to_string(i) + "]";
      const Section s(cls[i], at, {"model", "fraction"});
      if (!s.has("model") || !s.has("fraction")) throw ConfigError(at + ": needs 'model' and 'fraction'");
      r.classes.push_back({parse_model_ref(s.raw("model"), at + ".model"), s.get<double>("fraction")});
      fractions.push_back(r.classes.back().fraction);
    }
    check_distribution(fractions, "classes[].fraction");
  }
  if (top.has("class_placement"))
    r.class_placement = wrap("class_placement", [&] {
      return parse_placement(top.get<std::string>("class_placement"));
    });

  if (top.has("init")) {
    const Section s(top.raw("init"), "init", {"distribution", "placement", "nodes"});
    if (s.has("distribution")) {
      r.init.distribution = s.list<double>("distribution");
      check_distribution(r.init.distribution, "init.distribution");
    }
    if (s.has("placement"))
      r.init.placement = wrap("init.placement", [&] { return parse_placement(s.get<std::string>("placement")); });
    if (s.has("nodes")) r.init.nodes = s.list<int>("nodes", false);
    if (r.init.placement == Placement::explicit_nodes && !s.has("nodes"))
      throw ConfigError("init.nodes: required for explicit placement");
  }
  for (const auto& c : r.classes)
    if (c.model.path.empty() && !r.init.distribution.empty()) {
      const auto k = io::model_from_json(c.model.inline_model).space.size();
      if (static_cast<int>(r.init.distribution.size()) != k)
        throw ConfigError("init.distribution: size differs from the model's state count");
    }

  if (top.has("sim")) {
    const Section s(top.raw("sim"), "sim", {"mode", "rounds", "steps", "u", "log_transitions",
                                            "per_degree", "record_every"});
    if (s.has("mode")) r.sim.mode = wrap("sim.mode", [&] { return parse_sim_mode(s.get<std::string>("mode")); });
    if (s.has("rounds")) r.sim.rounds = s.get<int>("rounds");
    if (s.has("steps")) r.sim.steps = s.get<long long>("steps");
    if (s.has("u")) r.sim.u = s.get<double>("u");
    if (s.has("log_transitions")) r.sim.log_transitions = s.get<bool>("log_transitions");
    if (s.has("per_degree")) r.sim.per_degree = s.get<bool>("per_degree");
    if (s.has("record_every")) r.sim.record_every = s.get<long long>("record_every");
    if (r.sim.rounds < 0) throw ConfigError("sim.rounds: must be >= 0");
    if (r.sim.steps < 0) throw ConfigError("sim.steps: must be >= 0");
    if (r.sim.record_every < 1) throw ConfigError("sim.record_every: must be >= 1");
  }

  if (top.has("sweep")) {
    const Section s(top.raw("sweep"), "sweep", {"u", "gamma", "n", "placement"});
    if (s.has("u")) r.sweep.u = s.list<double>("u");
    if (s.has("gamma")) {
      r.sweep.gamma = s.list<double>("gamma");
      for (double g : r.sweep.gamma)
        if (!(g > 1.0)) throw ConfigError("sweep.gamma: every value must be > 1");
    }
    if (s.has("n")) {
      r.sweep.n = s.list<int>("n");
      for (int n : r.sweep.n)
        if (n < 1) throw ConfigError("sweep.n: every value must be >= 1");
    }
    if (s.has("placement"))
      for (const auto& p : s.list<std::string>("placement"))
        r.sweep.placement.push_back(wrap("sweep.placement", [&] { return parse_placement(p); }));
  }

  if (top.has("seeds")) r.seeds = top.list<std::uint64_t>("seeds");
  if (top.has("output_dir")) r.output_dir = top.get<std::string>("output_dir");
  return r;
}

std::string serialize(const ExperimentRecipe& r) {
  json root;
  if (!r.graph_path.empty()) {
    root["graph"] = {{"path", r.graph_path}};
  } else {
    json g = {{"model", std::string(to_string(r.graph.model))},
              {"n", r.graph.node_count},
              {"gamma", r.graph.gamma},
              {"clip", r.graph.edge_clip},
              {"p", r.graph.er_p},
              {"branching", r.graph.tree_branching}};
    if (r.graph_seed_fixed) g["seed"] = r.graph.seed;
    root["graph"] = std::move(g);
  }
  if (r.classes.size() == 1 && r.classes[0].fraction == 1.0) {
    root["model"] = model_ref_to_json(r.classes[0].model);
  } else {
    json cls = json::array();
    for (const auto& c : r.classes) cls.push_back({{"model", model_ref_to_json(c.model)}, {"fraction", c.fraction}});
    root["classes"] = std::move(cls);
  }
  root["class_placement"] = std::string(to_string(r.class_placement));
  json init = {{"placement", std::string(to_string(r.init.placement))}};
  if (!r.init.distribution.empty()) init["distribution"] = r.init.distribution;
  if (!r.init.nodes.empty() || r.init.placement == Placement::explicit_nodes) init["nodes"] = r.init.nodes;
  root["init"] = std::move(init);
  root["sim"] = {{"mode", std::string(to_string(r.sim.mode))},
                 {"rounds", r.sim.rounds},
                 {"steps", r.sim.steps},
                 {"u", r.sim.u},
                 {"log_transitions", r.sim.log_transitions},
                 {"per_degree", r.sim.per_degree},
                 {"record_every", r.sim.record_every}};
  json sweep = json::object();
  if (!r.sweep.u.empty()) sweep["u"] = r.sweep.u;
  if (!r.sweep.gamma.empty()) sweep["gamma"] = r.sweep.gamma;
  if (!r.sweep.n.empty()) sweep["n"] = r.sweep.n;
  if (!r.sweep.placement.empty()) {
    json p = json::array();
    for (Placement x : r.sweep.placement) p.push_back(std::string(to_string(x)));
    sweep["placement"] = std::move(p);
  }
  root["sweep"] = std::move(sweep);
  root["seeds"] = r.seeds;
  root["output_dir"] = r.output_dir;
  return root.dump(2);
}

std::vector<CellConfig> expand_cells(const ExperimentRecipe& r) {
  const std::vector<double> us = r.sweep.u.empty() ? std::vector<double>{r.sim.u} : r.sweep.u;
  const std::vector<double> gammas = r.sweep.gamma.empty() ? std::vector<double>{r.graph.gamma} : r.sweep.gamma;
  const std::vector<int> ns = r.sweep.n.empty() ? std::vector<int>{r.graph.node_count} : r.sweep.n;
  const std::vector<Placement> ps =
      r.sweep.placement.empty() ? std::vector<Placement>{r.init.placement} : r.sweep.placement;
  std::vector<CellConfig> cells;
  for (double u : us)
    for (double g : gammas)
      for (int n : ns)
        for (Placement p : ps) {
          CellConfig c{"", u, g, n, p};
          std::ostringstream name;
          name << "cell" << cells.size();
          if (!r.sweep.u.empty()) name << "_u" << io::format_double(u);
          if (!r.sweep.gamma.empty()) name << "_gamma" << io::format_double(g);
          if (!r.sweep.n.empty()) name << "_n" << n;
          if (!r.sweep.placement.empty()) name << "_" << to_string(p);
          c.name = name.str();
          cells.push_back(std::move(c));
        }
  return cells;
}

namespace {

struct SeedRun {
  bool ok = false;
  std::string error;
  Eigen::VectorXd terminal;
  std::vector<std::string> files;
  json resolved;
};

io::LoadedModel load_model(const ModelRef& ref, const std::filesystem::path& base) {
  if (ref.path.empty()) return io::model_from_json(ref.inline_model);
  return io::model_from_json(io::read_json_file(base / ref.path));
}

SeedRun run_cell_seed(const ExperimentRecipe& r, const CellConfig& cell, std::uint64_t seed,
                      const std::filesystem::path& base, const std::filesystem::path& out_dir) {
  SeedRun out;
  try {
    DirectedGraph g;
    json graph_desc;
    if (!r.graph_path.empty()) {
      g = io::graph_from_json(io::read_json_file(base / r.graph_path));
      graph_desc = {{"path", r.graph_path}};
    } else {
      GraphGenSpec spec = r.graph;
      spec.gamma = cell.gamma;
      spec.node_count = cell.n;
      spec.seed = r.graph_seed_fixed ? r.graph.seed : seed;
      g = generate(spec);
      graph_desc = {{"model", std::string(to_string(spec.model))}, {"n", spec.node_count},
                    {"gamma", spec.gamma}, {"clip", spec.edge_clip}, {"p", spec.er_p},
                    {"branching", spec.tree_branching}, {"seed", spec.seed}};
    }

    AgentModels models;
    StateSpace space;
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
      io::LoadedModel m = load_model(r.classes[i].model, base);
      if (i == 0)
        space = m.space;
      else if (m.space.labels != space.labels)
        throw std::invalid_argument("capability classes disagree on state labels");
      models.classes.push_back(m.kernel);
    }
    if (r.classes.size() > 1) {
      InitSpec cls;
      for (const auto& c : r.classes) cls.distribution.push_back(c.fraction);
      cls.placement = r.class_placement;
      Rng class_rng(derive_seed(seed, 0xc1a55));
      models.node_class = assign_by_quota(g, cls, class_rng);
    }

    InitSpec init = r.init;
    if (init.distribution.empty()) init.distribution = default_init_distribution(space.size());
    init.placement = cell.placement;
    if (static_cast<int>(init.distribution.size()) != space.size())
      throw std::invalid_argument("init distribution size differs from the model's state count");

    SimSpec sim = r.sim;
    sim.u = cell.u;
    sim.seed = seed;
    const RunResult res = run(g, init, models, space.labels, sim);

    const auto dir = out_dir / cell.name;
    std::filesystem::create_directories(dir);
    const std::string stem = "seed" + std::to_string(seed);
    {
      std::ofstream csv(dir / (stem + ".csv"));
      io::write_trajectory_csv(csv, res.trajectory);
      out.files.push_back(cell.name + "/" + stem + ".csv");
    }
    if (sim.log_transitions) {
      std::ofstream log(dir / (stem + ".jsonl"));
      io::write_transition_log(log, res.log, space);
      out.files.push_back(cell.name + "/" + stem + ".jsonl");
    }
    out.terminal = res.trajectory.values.bottomRows(1).transpose();
    out.resolved = {{"seed", seed},
                    {"graph", graph_desc},
                    {"init", {{"distribution", init.distribution},
                              {"placement", std::string(to_string(init.placement))},
                              {"nodes", init.nodes}}},
                    {"sim", {{"mode", std::string(to_string(sim.mode))}, {"rounds", sim.rounds},
                             {"steps", sim.steps}, {"u", sim.u}, {"seed", sim.seed},
                             {"log_transitions", sim.log_transitions},
                             {"per_degree", sim.per_degree}, {"record_every", sim.record_every}}},
                    {"labels", space.labels},
                    {"files", out.files}};
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
    out.resolved = {{"seed", seed}, {"error", out.error}};
  }
  return out;
}

}  // namespace

RecipeResult run_recipe(const ExperimentRecipe& recipe, const std::filesystem::path& base_dir) {
  const auto cells = expand_cells(recipe);
  const std::filesystem::path out_dir = base_dir / recipe.output_dir;
  std::filesystem::create_directories(out_dir);

  const std::size_t per_cell = recipe.seeds.size();
  std::vector<SeedRun> runs(cells.size() * per_cell);
  parallel_for(runs.size(), [&](std::size_t i) {
    runs[i] = run_cell_seed(recipe, cells[i / per_cell], recipe.seeds[i % per_cell], base_dir, out_dir);
  });

  RecipeResult result;
  json manifest_cells = json::array();
  std::ostringstream summary;
  std::vector<std::string> header_labels;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellOutcome outcome;
    outcome.cell = cells[c];
    json run_list = json::array();
    std::vector<Eigen::VectorXd> terminals;
    for (std::size_t s = 0; s < per_cell; ++s) {
      const SeedRun& run = runs[c * per_cell + s];
      run_list.push_back(run.resolved);
      if (!run.ok) {
        outcome.ok = false;
        if (outcome.error.empty()) outcome.error = run.error;
        continue;
      }
      terminals.push_back(run.terminal);
      outcome.files.insert(outcome.files.end(), run.files.begin(), run.files.end());
      if (outcome.labels.empty()) outcome.labels = run.resolved["labels"].get<std::vector<std::string>>();
    }
    if (outcome.ok && !terminals.empty()) {
      const auto k = terminals.front().size();
      outcome.terminal_mean = Eigen::VectorXd::Zero(k);
      for (const auto& t : terminals) outcome.terminal_mean += t;
      outcome.terminal_mean /= static_cast<double>(terminals.size());
      outcome.terminal_std = Eigen::VectorXd::Zero(k);
      if (terminals.size() > 1) {
        for (const auto& t : terminals) outcome.terminal_std += (t - outcome.terminal_mean).cwiseAbs2();
        outcome.terminal_std = (outcome.terminal_std / static_cast<double>(terminals.size() - 1)).cwiseSqrt();
      }
      if (header_labels.empty()) header_labels = outcome.labels;
    }
    result.any_failed = result.any_failed || !outcome.ok;
    manifest_cells.push_back({{"name", outcome.cell.name},
                              {"u", outcome.cell.u},
                              {"gamma", outcome.cell.gamma},
                              {"n", outcome.cell.n},
                              {"placement", std::string(to_string(outcome.cell.placement))},
                              {"status", outcome.ok ? "ok" : "failed"},
                              {"error", outcome.error},
                              {"runs", std::move(run_list)}});
    result.cells.push_back(std::move(outcome));
  }

  summary << "cell,u,gamma,n,placement,status";
  for (const auto& l : header_labels) summary << ',' << l << "_mean," << l << "_std";
  summary << '\n';
  for (const auto& o : result.cells) {
    summary << o.cell.name << ',' << io::format_double(o.cell.u) << ','
            << io::format_double(o.cell.gamma) << ',' << o.cell.n << ','
            << to_string(o.cell.placement) << ',' << (o.ok ? "ok" : "failed");
    for (std::size_t z = 0; z < header_labels.size(); ++z) {
      if (o.ok && o.terminal_mean.size() == static_cast<Eigen::Index>(header_labels.size()))
        summary << ',' << io::format_double(o.terminal_mean(static_cast<Eigen::Index>(z))) << ','
                << io::format_double(o.terminal_std(static_cast<Eigen::Index>(z)));
      else
        summary << ",,";
    }
    summary << '\n';
  }
  result.summary_csv = summary.str();
  result.manifest = {{"recipe", json::parse(serialize(recipe))},
                     {"cells", std::move(manifest_cells)},
                     {"any_failed", result.any_failed}};
  io::write_text_file(out_dir / "summary.csv", result.summary_csv);
  io::write_text_file(out_dir / "manifest.json", result.manifest.dump(2) + "\n");
  return result;
}

}  // namespace mfnet
