#include "mfnet/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mfnet::io {

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw FormatError("cannot format number");
  return {buf, ptr};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

namespace {

template <typename T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("key '") + key + "': " + e.what());
  }
}

StateSpace space_from_json(const json& j) {
  StateSpace s;
  s.labels = get<std::vector<std::string>>(j, "labels");
  s.reference = j.contains("reference") ? s.index_of(get<std::string>(j, "reference"))
                                        : static_cast<int>(s.labels.size()) - 1;
  s.validate();
  return s;
}

}  // namespace

json graph_to_json(const DirectedGraph& g) {
  json edges = json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.listener, e.influencer});
  return {{"node_count", g.node_count()}, {"edges", std::move(edges)}};
}

DirectedGraph graph_from_json(const json& j) {
  const int n = get<int>(j, "node_count");
  std::vector<Edge> edges;
  const json list = get<json>(j, "edges");
  for (const auto& e : list) {
    if (!e.is_array() || e.size() != 2) throw FormatError("edges must be [listener, influencer] pairs");
    edges.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  try {
    return DirectedGraph(n, std::move(edges));
  } catch (const InvalidSpec& ex) {
    throw FormatError(ex.what());
  }
}

json degree_distribution_to_json(const JointDegreeDistribution& q) {
  json entries = json::array();
  for (const auto& [key, mass] : q.entries()) entries.push_back({key.first, key.second, mass});
  return {{"entries", std::move(entries)}};
}

JointDegreeDistribution degree_distribution_from_json(const json& j) {
  std::map<JointDegreeDistribution::Key, double> entries;
  const json list = get<json>(j, "entries");
  for (const auto& e : list) {
    if (!e.is_array() || e.size() != 3) throw FormatError("entries must be [l, m, mass] triples");
    entries[{e[0].get<int>(), e[1].get<int>()}] += e[2].get<double>();
  }
  try {
    return JointDegreeDistribution(std::move(entries));
  } catch (const InvalidSpec& ex) {
    throw FormatError(ex.what());
  }
}

json choice_model_to_json(const ChoiceModel& m) {
  const auto& s = m.space();
  json features = json::array();
  for (const auto& f : m.features().terms) features.push_back(format_feature(f, s));
  return {{"labels", s.labels},
          {"reference", s.labels[s.reference]},
          {"features", std::move(features)},
          {"coeffs", std::vector<double>(m.coeffs().data(), m.coeffs().data() + m.coeffs().size())}};
}

ChoiceModel choice_model_from_json(const json& j) {
  const StateSpace space = space_from_json(j);
  const FeatureMapSpec features = parse_features(get<std::vector<std::string>>(j, "features"), space);
  const auto c = get<std::vector<double>>(j, "coeffs");
  return ChoiceModel(space, features, Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
}

json plugin_to_json(const PluginKernel& k) {
  json counts = json::array();
  for (Eigen::Index r = 0; r < k.counts().rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < k.counts().cols(); ++c) row.push_back(k.counts()(r, c));
    counts.push_back(std::move(row));
  }
  return {{"kind", "plugin"},
          {"labels", k.space().labels},
          {"reference", k.space().labels[k.space().reference]},
          {"buckets", k.buckets()},
          {"counts", std::move(counts)}};
}

PluginKernel plugin_from_json(const json& j) {
  PluginKernel k(space_from_json(j), get<int>(j, "buckets"));
  const auto rows = get<std::vector<std::vector<double>>>(j, "counts");
  Eigen::MatrixXd counts(static_cast<Eigen::Index>(rows.size()), k.space().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != k.space().size())
      throw FormatError("plugin count rows must have one entry per state");
    for (int c = 0; c < k.space().size(); ++c) counts(static_cast<Eigen::Index>(r), c) = rows[r][c];
  }
  k.set_counts(std::move(counts));
  return k;
}

LoadedModel model_from_json(const json& j) {
  LoadedModel out;
  if (j.contains("logits")) {
    const auto c = get<std::vector<double>>(j, "logits");
    if (c.size() != 6) throw FormatError("logits must have 6 entries: c0H,cuH,cqH,c0T,cuT,cqT");
    ChoiceModel m = twostate::to_choice_model(
        twostate::TwoStateLogits::from_array({c[0], c[1], c[2], c[3], c[4], c[5]}));
    out.space = m.space();
    out.choice = m;
    out.kernel = std::make_shared<ChoiceKernel>(std::move(m));
  } else if (j.value("kind", "") == "plugin") {
    auto k = std::make_shared<PluginKernel>(plugin_from_json(j));
    out.space = k->space();
    out.kernel = std::move(k);
  } else {
    ChoiceModel m = choice_model_from_json(j);
    std::vector<double> w;
    if (j.contains("w")) w = get<std::vector<double>>(j, "w");
    out.space = m.space();
    out.choice = m;
    out.kernel = std::make_shared<ChoiceKernel>(std::move(m), std::move(w));
  }
  return out;
}

json record_to_json(const TransitionRecord& r, const StateSpace& space) {
  json n = json::object();
  for (int z = 0; z < space.size(); ++z) n[space.labels[z]] = r.n[z];
  json j = {{"step", r.step}, {"node", r.node}, {"u", r.u},  {"l", r.l},
            {"n", std::move(n)}, {"prev", space.labels[r.prev]}, {"next", space.labels[r.next]}};
  if (!r.w.empty()) j["w"] = r.w;
  return j;
}

TransitionRecord record_from_json(const json& j, const StateSpace& space) {
  TransitionRecord r;
  r.step = get<long long>(j, "step");
  r.node = get<int>(j, "node");
  r.u = get<double>(j, "u");
  r.l = get<int>(j, "l");
  r.n.assign(space.size(), 0);
  const json counts = get<json>(j, "n");
  if (!counts.is_object()) throw FormatError("key 'n' must map state labels to counts");
  for (const auto& [label, count] : counts.items()) r.n[space.index_of(label)] = count.get<int>();
  if (j.contains("w")) r.w = get<std::vector<double>>(j, "w");
  r.prev = space.index_of(get<std::string>(j, "prev"));
  r.next = space.index_of(get<std::string>(j, "next"));
  validate_record(r, space);
  return r;
}

void write_transition_log(std::ostream& os, const std::vector<TransitionRecord>& log,
                          const StateSpace& space) {
  for (const auto& r : log) os << record_to_json(r, space).dump() << '\n';
}

std::vector<TransitionRecord> read_transition_log(std::istream& is, const StateSpace& space) {
  std::vector<TransitionRecord> out;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line), space));
    } catch (const std::exception& e) {
      throw FormatError("transition log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int k = traj.num_states();
  const bool per_degree = traj.per_degree.size() > 0 && !traj.degrees.empty();
  os << 't';
  for (const auto& l : traj.labels) os << ',' << l;
  if (per_degree)
    for (int d : traj.degrees)
      for (const auto& l : traj.labels) os << ",rho_l" << d << '_' << l;
  os << '\n';
  for (Eigen::Index i = 0; i < traj.size(); ++i) {
    os << format_double(traj.times[static_cast<std::size_t>(i)]);
    for (int z = 0; z < k; ++z) os << ',' << format_double(traj.values(i, z));
    if (per_degree)
      for (Eigen::Index c = 0; c < traj.per_degree.cols(); ++c)
        os << ',' << format_double(traj.per_degree(i, c));
    os << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (e > b && (e[-1] == '\r' || e[-1] == ' ')) --e;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw FormatError("invalid number '" + s + "'");
  return v;
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty trajectory CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.empty() || header[0] != "t") throw FormatError("trajectory CSV must start with column 't'");
  Trajectory traj;
  std::size_t col = 1;
  for (; col < header.size() && !header[col].starts_with("rho_l"); ++col) traj.labels.push_back(header[col]);
  const int k = traj.num_states();
  if (k < 1) throw FormatError("trajectory CSV has no state columns");
  const std::size_t extra = header.size() - col;
  if (extra % static_cast<std::size_t>(k) != 0) throw FormatError("malformed per-degree columns");
  for (std::size_t c = col; c < header.size(); c += static_cast<std::size_t>(k)) {
    const auto& h = header[c];
    const auto us = h.find('_', 5);
    if (us == std::string::npos) throw FormatError("malformed per-degree column '" + h + "'");
    traj.degrees.push_back(static_cast<int>(parse_double(h.substr(5, us - 5))));
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw FormatError("trajectory CSV row has the wrong width");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  traj.values.resize(n, k);
  traj.per_degree.resize(n, static_cast<Eigen::Index>(extra));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    traj.times.push_back(r[0]);
    for (int z = 0; z < k; ++z) traj.values(i, z) = r[1 + static_cast<std::size_t>(z)];
    for (std::size_t c = 0; c < extra; ++c)
      traj.per_degree(i, static_cast<Eigen::Index>(c)) = r[col + c];
  }
  return traj;
}

}  // namespace mfnet::io
