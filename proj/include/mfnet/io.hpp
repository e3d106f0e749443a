#pragma once

#include "mfnet/abm.hpp"
#include "mfnet/graph.hpp"
#include "mfnet/population.hpp"
#include "mfnet/rum.hpp"
#include "mfnet/twostate.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mfnet::io {

using nlohmann::json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// {"node_count": N, "edges": [[listener, influencer], ...]}
json graph_to_json(const DirectedGraph& g);
DirectedGraph graph_from_json(const json& j);

/// {"entries": [[l, m, mass], ...]}
json degree_distribution_to_json(const JointDegreeDistribution& q);
JointDegreeDistribution degree_distribution_from_json(const json& j);

/// {"labels": [...], "reference": "D", "features": [...], "coeffs": [...]}
json choice_model_to_json(const ChoiceModel& m);
ChoiceModel choice_model_from_json(const json& j);

/// {"kind": "plugin", "labels": [...], "buckets": B, "counts": [[...], ...]}
json plugin_to_json(const PluginKernel& k);
PluginKernel plugin_from_json(const json& j);

/// A loaded transition model: the kernel plus its state labels. Accepts a
/// choice model, a plugin table, or {"logits": [c0H, cuH, cqH, c0T, cuT, cqT]}.
struct LoadedModel {
  std::shared_ptr<const TransitionKernel> kernel;
  StateSpace space;
  std::optional<ChoiceModel> choice;
};
LoadedModel model_from_json(const json& j);

/// One JSONL line: step, node, u, l, n (label -> count), w, prev, next.
json record_to_json(const TransitionRecord& r, const StateSpace& space);
TransitionRecord record_from_json(const json& j, const StateSpace& space);
void write_transition_log(std::ostream& os, const std::vector<TransitionRecord>& log,
                          const StateSpace& space);
std::vector<TransitionRecord> read_transition_log(std::istream& is, const StateSpace& space);

/// CSV: t, one column per label, then rho_l<k>_<label> columns when present.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is);

std::string format_double(double x);

}  // namespace mfnet::io
