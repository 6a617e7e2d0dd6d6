#include "annograph/bundle.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace annograph {

namespace {

[[noreturn]] void fail(const std::string& file, std::size_t line, const std::string& what) {
  throw ConfigError(file + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing file: " + path.string());
  return in;
}

}  // namespace

TextAttributedGraph load_graph_bundle(const std::string& dir, WarningSink* warnings) {
  const fs::path root(dir);
  TextAttributedGraph graph;

  {
    auto in = open_or_throw(root / "classes.json");
    json classes;
    try {
      in >> classes;
    } catch (const json::exception& e) {
      fail("classes.json", 1, e.what());
    }
    if (!classes.is_array() || classes.size() < 2)
      fail("classes.json", 1, "expected an array of at least 2 class names");
    for (const auto& c : classes) graph.class_names.push_back(c.get<std::string>());
  }
  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < graph.class_names.size(); ++i)
    class_index[graph.class_names[i]] = static_cast<int>(i);

  std::map<std::string, std::uint32_t> node_index;
  bool any_text = false;
  bool any_gold = false;
  {
    auto in = open_or_throw(root / "nodes.jsonl");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json node;
      try {
        node = json::parse(line);
      } catch (const json::exception& e) {
        fail("nodes.jsonl", lineno, e.what());
      }
      if (!node.contains("id")) fail("nodes.jsonl", lineno, "node object without id");
      const auto id = node["id"].get<std::string>();
      if (!node_index.emplace(id, static_cast<std::uint32_t>(graph.node_ids.size())).second)
        fail("nodes.jsonl", lineno, "duplicate node id '" + id + "'");
      graph.node_ids.push_back(id);
      graph.texts.push_back(node.value("text", std::string()));
      if (!graph.texts.back().empty()) any_text = true;
      int gold = -1;
      if (node.contains("gold")) {
        const auto name = node["gold"].get<std::string>();
        auto it = class_index.find(name);
        if (it == class_index.end())
          fail("nodes.jsonl", lineno, "gold class '" + name + "' not in classes.json");
        gold = it->second;
        any_gold = true;
      }
      graph.gold_labels.push_back(gold);
    }
  }
  graph.node_count = graph.node_ids.size();
  if (graph.node_count == 0) fail("nodes.jsonl", 0, "bundle has no nodes");
  if (!any_text) graph.texts.clear();
  if (!any_gold) graph.gold_labels.clear();

  {
    auto in = open_or_throw(root / "edges.tsv");
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    std::size_t collapsed = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) fail("edges.tsv", lineno, "expected two tab-separated ids");
      const std::string a = line.substr(0, tab);
      std::string b = line.substr(tab + 1);
      if (!b.empty() && b.back() == '\r') b.pop_back();
      auto ia = node_index.find(a);
      auto ib = node_index.find(b);
      if (ia == node_index.end() || ib == node_index.end())
        fail("edges.tsv", lineno, "edge endpoint out of range: unknown id '" +
                                      (ia == node_index.end() ? a : b) + "'");
      if (ia->second == ib->second)
        fail("edges.tsv", lineno, "self-loop pairs rejected at ingest (node '" + a + "')");
      const auto key = std::minmax(ia->second, ib->second);
      if (!seen.insert({key.first, key.second}).second) {
        ++collapsed;
        continue;
      }
      graph.edges.emplace_back(key.first, key.second);
    }
    if (collapsed > 0 && warnings)
      warnings->push_back("edges.tsv: symmetrized directed input, collapsed " +
                          std::to_string(collapsed) + " duplicate pair(s)");
    std::sort(graph.edges.begin(), graph.edges.end());
  }

  {
    auto in = open_or_throw(root / "features.csv");
    std::string header;
    if (!std::getline(in, header) || header.rfind("dim=", 0) != 0)
      fail("features.csv", 1, "expected header dim=<d>");
    std::size_t dim = 0;
    {
      const char* first = header.data() + 4;
      const char* last = header.data() + header.size();
      auto [ptr, ec] = std::from_chars(first, last, dim);
      if (ec != std::errc() || dim == 0) fail("features.csv", 1, "invalid dimension header");
    }
    graph.features = Matrix(graph.node_count, dim);
    std::string line;
    std::size_t row = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (row >= graph.node_count)
        fail("features.csv", lineno, "more feature rows than nodes (" +
                                         std::to_string(graph.node_count) + ")");
      std::size_t col = 0;
      const char* p = line.data();
      const char* end = line.data() + line.size();
      while (p < end) {
        if (col >= dim) fail("features.csv", lineno, "row has more than dim=" +
                                                         std::to_string(dim) + " values");
        char* after = nullptr;
        errno = 0;
        const double v = std::strtod(p, &after);
        if (after == p) fail("features.csv", lineno, "could not parse value");
        if (!std::isfinite(v)) fail("features.csv", lineno, "non-finite feature value");
        graph.features(row, col++) = v;
        p = after;
        if (p < end && *p == ',') ++p;
      }
      if (col != dim)
        fail("features.csv", lineno,
             "dimension mismatch: got " + std::to_string(col) + ", expected " + std::to_string(dim));
      ++row;
    }
    if (row != graph.node_count)
      fail("features.csv", lineno,
           "dimension mismatch: " + std::to_string(row) + " feature rows for " +
               std::to_string(graph.node_count) + " nodes");
  }

  if (fs::exists(root / "manifest.json")) {
    auto in = open_or_throw(root / "manifest.json");
    json manifest;
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      fail("manifest.json", 1, e.what());
    }
    graph.embedding_provenance = manifest.value("embedding_provenance", std::string());
  }

  graph.validate();
  return graph;
}

void save_graph_bundle(const TextAttributedGraph& graph, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);

  {
    json classes = json::array();
    for (const auto& name : graph.class_names) classes.push_back(name);
    std::ofstream out(root / "classes.json");
    out << classes.dump(2) << '\n';
  }
  {
    std::ofstream out(root / "nodes.jsonl");
    for (std::size_t i = 0; i < graph.node_count; ++i) {
      json node;
      node["id"] = graph.node_ids.empty() ? std::to_string(i) : graph.node_ids[i];
      if (!graph.texts.empty()) node["text"] = graph.texts[i];
      if (!graph.gold_labels.empty() && graph.gold_labels[i] >= 0)
        node["gold"] = graph.class_names[graph.gold_labels[i]];
      out << node.dump() << '\n';
    }
  }
  {
    std::ofstream out(root / "edges.tsv");
    for (auto [a, b] : graph.edges) {
      const std::string& ia = graph.node_ids.empty() ? std::to_string(a) : graph.node_ids[a];
      const std::string& ib = graph.node_ids.empty() ? std::to_string(b) : graph.node_ids[b];
      out << ia << '\t' << ib << '\n';
    }
  }
  {
    std::ofstream out(root / "features.csv");
    out << "dim=" << graph.features.cols() << '\n';
    char buf[40];
    for (std::size_t i = 0; i < graph.features.rows(); ++i) {
      const auto row = graph.features.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", row[j]);
        out << (j ? "," : "") << buf;
      }
      out << '\n';
    }
  }
  if (!graph.embedding_provenance.empty()) {
    json manifest;
    manifest["embedding_provenance"] = graph.embedding_provenance;
    std::ofstream out(root / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

}  // namespace annograph
