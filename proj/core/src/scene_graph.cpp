#include "vpt/scene_graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <tuple>

#include "jsonl.hpp"
#include "vpt/errors.hpp"

namespace vpt {

namespace {

std::string
to_lower_ascii(std::string s)
{
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<char>(c - 'A' + 'a');
    }
  }
  return s;
}

} // namespace

void
validate(const SceneGraph& graph)
{
  for (std::size_t i = 0; i < graph.objects.size(); ++i) {
    const auto& label = graph.objects[i];
    if (label.empty()) {
      throw ValidationError("scene graph object " + std::to_string(i) + " has an empty label");
    }
    if (label != to_lower_ascii(label)) {
      throw ValidationError("scene graph label \"" + label + "\" is not lowercase");
    }
  }
  const std::size_t n = graph.objects.size();
  for (std::size_t r = 0; r < graph.relations.size(); ++r) {
    const auto& rel = graph.relations[r];
    if (rel.subject >= n || rel.object >= n) {
      throw ValidationError("scene graph relation " + std::to_string(r) + " references node "
                            + std::to_string(std::max(rel.subject, rel.object)) + " but only "
                            + std::to_string(n) + " objects exist");
    }
    if (rel.predicate.empty()) {
      throw ValidationError("scene graph relation " + std::to_string(r) + " has empty predicate");
    }
    if (rel.subject == rel.object && !graph.allow_self_loops) {
      throw ValidationError("scene graph relation " + std::to_string(r) + " is a self loop");
    }
  }
}

SceneGraph
parse_scene_graph(std::string_view text, std::size_t line)
{
  using detail::Json;
  Json rec;
  try {
    rec = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(line, std::string("malformed scene graph: ") + e.what());
  }
  if (!rec.is_object() || !rec.contains("objects") || !rec["objects"].is_array()
      || !rec.contains("relations") || !rec["relations"].is_array()) {
    throw ParseError(line, "scene graph needs \"objects\" and \"relations\" arrays");
  }

  SceneGraph g;
  if (auto it = rec.find("allow_self_loops"); it != rec.end()) {
    if (!it->is_boolean()) {
      throw ParseError(line, "\"allow_self_loops\" must be a boolean");
    }
    g.allow_self_loops = it->get<bool>();
  }
  for (const auto& o : rec["objects"]) {
    if (!o.is_string()) {
      throw ParseError(line, "object labels must be strings");
    }
    g.objects.push_back(to_lower_ascii(o.get<std::string>()));
  }
  for (const auto& r : rec["relations"]) {
    if (!r.is_array() || r.size() != 3 || !r[0].is_number_integer() || !r[1].is_string()
        || !r[2].is_number_integer()) {
      throw ParseError(line, "relations must be [subject_index, \"predicate\", object_index]");
    }
    const auto s = r[0].get<long long>();
    const auto o = r[2].get<long long>();
    if (s < 0 || o < 0) {
      throw ValidationError("scene graph relation index is negative");
    }
    g.relations.push_back(
      {static_cast<std::size_t>(s), r[1].get<std::string>(), static_cast<std::size_t>(o)});
  }
  validate(g);
  return g;
}

std::string
serialize_scene_graph(const SceneGraph& graph)
{
  using detail::Json;
  Json rels = Json::array();
  for (const auto& r : graph.relations) {
    rels.push_back(Json::array({r.subject, r.predicate, r.object}));
  }
  Json rec{{"objects", graph.objects}, {"relations", rels}};
  if (graph.allow_self_loops) {
    rec["allow_self_loops"] = true;
  }
  return rec.dump();
}

std::string
linearize(const SceneGraph& graph)
{
  using Phrase = std::tuple<std::string, std::string, std::string>;
  std::vector<Phrase> phrases;
  phrases.reserve(graph.relations.size());
  for (const auto& r : graph.relations) {
    phrases.emplace_back(graph.objects.at(r.subject), r.predicate, graph.objects.at(r.object));
  }
  std::sort(phrases.begin(), phrases.end());

  std::string out;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i > 0) {
      out += ". ";
    }
    const auto& [s, p, o] = phrases[i];
    out += s;
    out += ' ';
    out += p;
    out += ' ';
    out += o;
  }
  return out;
}

std::map<std::string, SceneGraph>
read_scene_graphs(std::istream& graphs, std::istream& manifest)
{
  std::vector<std::string> keys;
  std::string line;
  while (std::getline(manifest, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      keys.push_back(line);
    }
  }

  std::map<std::string, SceneGraph> out;
  std::size_t line_no = 0;
  std::size_t record = 0;
  while (std::getline(graphs, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    if (record >= keys.size()) {
      throw ParseError(line_no, "graph record has no manifest key");
    }
    auto g = parse_scene_graph(line, line_no);
    if (!out.emplace(keys[record], std::move(g)).second) {
      throw ValidationError("duplicate scene graph key \"" + keys[record] + "\"");
    }
    ++record;
  }
  if (record != keys.size()) {
    throw ValidationError("manifest lists " + std::to_string(keys.size()) + " keys but "
                          + std::to_string(record) + " graphs were read");
  }
  return out;
}

void
write_scene_graphs(std::ostream& graphs,
                   std::ostream& manifest,
                   const std::map<std::string, SceneGraph>& by_key)
{
  for (const auto& [key, g] : by_key) {
    graphs << serialize_scene_graph(g) << '\n';
    manifest << key << '\n';
  }
}

} // namespace vpt
