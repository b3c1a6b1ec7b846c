#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vpt {

struct Relation
{
  std::size_t subject = 0;
  std::string predicate;
  std::size_t object = 0;

  bool operator==(const Relation&) const = default;
};

// Panoptic scene graph as labelled nodes plus (subject, predicate, object)
// triplets over node indices.
struct SceneGraph
{
  std::vector<std::string> objects;
  std::vector<Relation> relations;
  bool allow_self_loops = false;

  bool empty() const noexcept { return relations.empty() && objects.empty(); }
  bool operator==(const SceneGraph&) const = default;
};

// Throws ValidationError on empty or non-lowercase labels, out-of-range
// relation indices, empty predicates, or self loops when not allowed.
void validate(const SceneGraph& graph);

// Parses one record: {"objects": [...], "relations": [[s, "pred", o], ...]}
// with an optional "allow_self_loops" boolean. Labels are lowercased.
// Malformed text throws ParseError carrying `line`; bad indices throw
// ValidationError.
SceneGraph parse_scene_graph(std::string_view text, std::size_t line = 0);

std::string serialize_scene_graph(const SceneGraph& graph);

// "subject predicate object" phrases joined by ". ", sorted by
// (subject label, predicate, object label). Empty graph gives "".
std::string linearize(const SceneGraph& graph);

// Reads a graphs file (one record per line) together with a sidecar
// manifest holding one key per line; manifest line i names graph line i.
std::map<std::string, SceneGraph> read_scene_graphs(std::istream& graphs,
                                                    std::istream& manifest);

void write_scene_graphs(std::ostream& graphs,
                        std::ostream& manifest,
                        const std::map<std::string, SceneGraph>& by_key);

} // namespace vpt
