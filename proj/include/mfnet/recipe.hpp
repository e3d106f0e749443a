#pragma once

#include "mfnet/abm.hpp"
#include "mfnet/graph.hpp"
#include "mfnet/io.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfnet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A transition model given inline (JSON object) or by file path.
struct ModelRef {
  io::json inline_model;  // null when `path` is used
  std::string path;
  bool operator==(const ModelRef&) const = default;
};

struct CapabilityClass {
  ModelRef model;
  double fraction = 1.0;
  bool operator==(const CapabilityClass&) const = default;
};

struct SweepAxes {
  std::vector<double> u;
  std::vector<double> gamma;
  std::vector<int> n;
  std::vector<Placement> placement;
  bool operator==(const SweepAxes&) const = default;
};

struct ExperimentRecipe {
  GraphGenSpec graph;
  std::string graph_path;         // load instead of generating when set
  bool graph_seed_fixed = false;  // otherwise each run regenerates with its own seed
  std::vector<CapabilityClass> classes;
  Placement class_placement = Placement::top_out_degree;
  InitSpec init;  // empty distribution: 0.35 on the first state, rest uniform
  SimSpec sim;
  SweepAxes sweep;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output_dir = "results";

  bool operator==(const ExperimentRecipe&) const = default;
};

/// Parses and validates a JSON recipe, applying defaults. Unknown keys,
/// type mismatches and constraint violations raise ConfigError naming the
/// key path.
ExperimentRecipe parse_config(const std::string& text);
std::string serialize(const ExperimentRecipe& recipe);

/// Default initial law: 0.35 on the first state, remainder split evenly.
std::vector<double> default_init_distribution(int num_states);

/// One sweep cell: concrete axis values.
struct CellConfig {
  std::string name;
  double u = 0.0;
  double gamma = 2.7;
  int n = 100;
  Placement placement = Placement::random;
};

std::vector<CellConfig> expand_cells(const ExperimentRecipe& recipe);

struct CellOutcome {
  CellConfig cell;
  bool ok = true;
  std::string error;
  std::vector<std::string> labels;
  Eigen::VectorXd terminal_mean;
  Eigen::VectorXd terminal_std;
  std::vector<std::string> files;
};

struct RecipeResult {
  std::vector<CellOutcome> cells;
  bool any_failed = false;
  std::string summary_csv;
  io::json manifest;
};

/// Runs the Cartesian sweep x seeds and writes per-seed trajectory CSVs,
/// optional transition logs, summary.csv and manifest.json under
/// recipe.output_dir. Relative paths resolve against `base_dir`.
RecipeResult run_recipe(const ExperimentRecipe& recipe,
                        const std::filesystem::path& base_dir = std::filesystem::current_path());

}  // namespace mfnet
