#pragma once

#include <string>
#include <vector>

#include "annograph/errors.hpp"
#include "annograph/graph.hpp"

namespace annograph {

// Graph bundle directory layout (all UTF-8):
//   nodes.jsonl    one object per node: {"id": str, "text": str, "gold": str?}
//                  file order defines the node index
//   edges.tsv      two tab-separated node ids per line
//   features.csv   header "dim=<d>", then one comma-separated row per node
//   classes.json   ordered array of class-name strings
//   manifest.json  optional: {"embedding_provenance": str}
//
// Errors carry file name and line number. Directed duplicates (both (a,b) and
// (b,a) present) are collapsed to one undirected edge with a warning.
TextAttributedGraph load_graph_bundle(const std::string& dir, WarningSink* warnings = nullptr);

void save_graph_bundle(const TextAttributedGraph& graph, const std::string& dir);

}  // namespace annograph
