#include "mfnet/recipe.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace mfnet;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "graph": {"model": "powerlaw", "n": 60},
  "model": {"logits": [-1, 0, 2, -0.5, 0, 2]}
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mfnet_recipe_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal recipe gets defaults") {
  const ExperimentRecipe r = parse_config(kMinimal);
  CHECK(r.graph.model == GraphModel::powerlaw);
  CHECK(r.graph.node_count == 60);
  CHECK(r.graph.gamma == 2.7);
  CHECK(r.graph.edge_clip == 50);
  CHECK_FALSE(r.graph_seed_fixed);
  CHECK(r.sim.mode == SimMode::parallel);
  CHECK(r.sim.rounds == 10);
  CHECK(r.seeds.size() == 5);
  CHECK(r.init.distribution.empty());
  CHECK(default_init_distribution(3) == std::vector<double>{0.35, 0.325, 0.325});
  CHECK(default_init_distribution(2) == std::vector<double>{0.35, 0.65});
  REQUIRE(r.classes.size() == 1);
  CHECK(r.classes[0].fraction == 1.0);
}

TEST_CASE("recipe validation names the key") {
  CHECK(error_of(R"({"graph": {"model": "powerlaw", "n": 60, "gama": 2.5}, "model": {"logits": [0,0,0,0,0,0]}})")
            .find("graph.gama") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "powerlaw", "n": 0}, "model": {"logits": [0,0,0,0,0,0]}})")
            .find("graph.n") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "powerlaw", "n": "ten"}, "model": {"logits": [0,0,0,0,0,0]}})")
            .find("graph.n") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "powerlaw", "n": 10, "gamma": 0.9}, "model": {"logits": [0,0,0,0,0,0]}})")
            .find("graph.gamma") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "chain", "n": 10}})").find("model") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "chain", "n": 10}, "model": {"logits": [0,0,0,0,0,0]},
                     "init": {"distribution": [0.5, 0.6]}})")
            .find("init.distribution") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "chain", "n": 10}, "model": {"logits": [0,0,0,0,0,0]},
                     "sim": {"mode": "async"}})")
            .find("sim.mode") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "chain", "n": 10}, "model": {"logits": [0,0,0,0,0,0]},
                     "sweep": {"placement": ["top_in_degree", "center"]}})")
            .find("sweep.placement") != std::string::npos);
  CHECK(error_of(R"({"graph": {"model": "chain", "n": 10}, "model": {"logits": [0,0,0,0,0,0]},
                     "classes": []})")
            .find("model") != std::string::npos);
  CHECK_FALSE(error_of("{not json").empty());
}

TEST_CASE("recipe serialization round trips") {
  const ExperimentRecipe r = parse_config(R"({
    "graph": {"model": "er", "n": 40, "p": 0.1, "seed": 9},
    "classes": [{"model": {"logits": [-1, 0, 2, 0, 0, 1]}, "fraction": 0.25},
                {"model": {"path": "weak.json"}, "fraction": 0.75}],
    "class_placement": "top_in_degree",
    "init": {"distribution": [0.2, 0.8], "placement": "random"},
    "sim": {"mode": "sequential", "steps": 500, "u": 0.3, "log_transitions": true, "record_every": 10},
    "sweep": {"u": [0, 0.5], "placement": ["random", "top_out_degree"]},
    "seeds": [3, 4],
    "output_dir": "out"
  })");
  CHECK(r.graph_seed_fixed);
  CHECK(r.classes[1].model.path == "weak.json");
  CHECK(parse_config(serialize(r)) == r);
  CHECK(parse_config(serialize(parse_config(kMinimal))) == parse_config(kMinimal));
}

TEST_CASE("sweep expansion") {
  ExperimentRecipe r = parse_config(kMinimal);
  CHECK(expand_cells(r).size() == 1);
  r.sweep.u = {0.0, 0.5, 1.0};
  r.sweep.n = {50, 100};
  r.sweep.placement = {Placement::random, Placement::top_in_degree};
  const auto cells = expand_cells(r);
  CHECK(cells.size() == 12);
  std::set<std::string> names;
  for (const auto& c : cells) names.insert(c.name);
  CHECK(names.size() == 12);
}

TEST_CASE("running a recipe") {
  TempDir tmp;
  ExperimentRecipe r = parse_config(kMinimal);
  r.seeds = {1};
  r.output_dir = "one";
  SUBCASE("one cell, one seed") {
    const RecipeResult res = run_recipe(r, tmp.path);
    CHECK_FALSE(res.any_failed);
    REQUIRE(res.cells.size() == 1);
    const fs::path out = tmp.path / "one";
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "summary.csv"));
    int csvs = 0;
    for (const auto& e : fs::recursive_directory_iterator(out))
      csvs += e.path().extension() == ".csv" && e.path().filename() != "summary.csv";
    CHECK(csvs == 1);
    const auto manifest = io::read_json_file(out / "manifest.json");
    CHECK(manifest["any_failed"] == false);
  }
  SUBCASE("identical runs give identical summaries") {
    r.seeds = {1, 2, 3};
    r.sweep.placement = {Placement::random, Placement::top_out_degree};
    run_recipe(r, tmp.path);
    const std::string first = slurp(tmp.path / "one" / "summary.csv");
    r.output_dir = "two";
    run_recipe(r, tmp.path);
    CHECK(slurp(tmp.path / "two" / "summary.csv") == first);
    CHECK(first.rfind("cell,u,gamma,n,placement,status,T_mean,T_std,H_mean,H_std\n", 0) == 0);
  }
  SUBCASE("a failing cell is recorded and the rest still run") {
    r.classes = {{ModelRef{nullptr, "missing.json"}, 1.0}};
    const RecipeResult res = run_recipe(r, tmp.path);
    CHECK(res.any_failed);
    REQUIRE(res.cells.size() == 1);
    CHECK_FALSE(res.cells[0].ok);
    CHECK(res.cells[0].error.find("missing.json") != std::string::npos);
    CHECK(io::read_json_file(tmp.path / "one" / "manifest.json")["any_failed"] == true);
  }
}
