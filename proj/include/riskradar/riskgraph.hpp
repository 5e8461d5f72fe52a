#pragma once
// Typed risk knowledge graph: Trigger --causes--> Outcome --impacts--> Vessel.
//
// Nodes are identified by (kind, canonical phrase). Parallel edges never
// exist; repeated (relation, from, to) triples merge their risk-id sets.

#include <algorithm>
#include <compare>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskradar/error.hpp"
#include "riskradar/extraction.hpp"

namespace riskradar {

enum class NodeKind { Trigger, Outcome, ExposureVessel };
enum class Relation { Causes, Impacts };
enum class GraphFormat { Dot, Json };

constexpr std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Trigger: return "trigger";
    case NodeKind::Outcome: return "outcome";
    case NodeKind::ExposureVessel: return "exposure_vessel";
  }
  return "";
}

constexpr std::string_view to_string(Relation r) { return r == Relation::Causes ? "causes" : "impacts"; }

inline NodeKind node_kind_from_string(std::string_view s) {
  if (s == "trigger") return NodeKind::Trigger;
  if (s == "outcome") return NodeKind::Outcome;
  if (s == "exposure_vessel") return NodeKind::ExposureVessel;
  throw Error(ErrorCode::InvalidInput, "unknown node kind '" + std::string(s) + "'");
}

inline Relation relation_from_string(std::string_view s) {
  if (s == "causes") return Relation::Causes;
  if (s == "impacts") return Relation::Impacts;
  throw Error(ErrorCode::InvalidInput, "unknown relation '" + std::string(s) + "'");
}

inline GraphFormat graph_format_from_string(std::string_view s) {
  if (s == "dot") return GraphFormat::Dot;
  if (s == "json") return GraphFormat::Json;
  throw Error(ErrorCode::Usage, "unknown graph format '" + std::string(s) + "' (expected dot or json)");
}

struct NodeKey {
  NodeKind kind;
  CanonicalPhrase phrase;

  auto operator<=>(const NodeKey&) const = default;
};

struct EdgeKey {
  Relation relation;
  NodeKey from;
  NodeKey to;

  auto operator<=>(const EdgeKey&) const = default;
};

using RiskIdSet = std::set<std::string>;

struct GraphNode {
  NodeKey key;
  RiskIdSet risk_ids;

  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  EdgeKey key;
  RiskIdSet risk_ids;

  bool operator==(const GraphEdge&) const = default;
};

struct SharedOutcome {
  std::string phrase;
  RiskIdSet risk_ids;

  bool operator==(const SharedOutcome&) const = default;
};

struct DegreeEntry {
  NodeKey key;
  std::size_t in_degree = 0;
  std::size_t out_degree = 0;
  std::size_t risk_count = 0;
};

class KnowledgeGraph {
 public:
  // Throws InsufficientStructure for trigger_only decompositions.
  void add_risk(const RiskDecomposition& d) {
    if (d.confidence == Confidence::TriggerOnly)
      throw Error(ErrorCode::InsufficientStructure,
                  "risk '" + d.risk_id + "' has no outcome or exposure vessel");
    if (d.trigger.empty()) throw Error(ErrorCode::InvalidInput, "risk '" + d.risk_id + "' has an empty trigger");
    if (d.risk_id.empty()) throw Error(ErrorCode::InvalidInput, "decomposition without a risk id");

    const NodeKey trigger{NodeKind::Trigger, d.trigger};
    touch_node(trigger, d.risk_id);
    for (const auto& v : d.exposure_vessels) touch_node({NodeKind::ExposureVessel, v}, d.risk_id);
    for (const auto& o : d.outcomes) {
      const NodeKey outcome{NodeKind::Outcome, o};
      touch_node(outcome, d.risk_id);
      touch_edge({Relation::Causes, trigger, outcome}, d.risk_id);
      for (const auto& v : d.exposure_vessels)
        touch_edge({Relation::Impacts, outcome, {NodeKind::ExposureVessel, v}}, d.risk_id);
    }
  }

  const std::map<NodeKey, GraphNode>& nodes() const noexcept { return nodes_; }
  const std::map<EdgeKey, GraphEdge>& edges() const noexcept { return edges_; }

  std::size_t node_count(NodeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [&](const auto& n) { return n.first.kind == kind; }));
  }

  std::size_t edge_count(Relation relation) const {
    return static_cast<std::size_t>(std::count_if(
        edges_.begin(), edges_.end(), [&](const auto& e) { return e.first.relation == relation; }));
  }

  // Phrase is normalized before lookup.
  const GraphNode* find(NodeKind kind, std::string_view phrase) const {
    auto it = nodes_.find(NodeKey{kind, normalize_phrase(phrase)});
    return it == nodes_.end() ? nullptr : &it->second;
  }

  RiskIdSet risks_by_trigger(std::string_view phrase) const {
    const GraphNode* node = find(NodeKind::Trigger, phrase);
    return node ? node->risk_ids : RiskIdSet{};
  }

  // Outcomes reached from two or more risks, largest sharing first.
  std::vector<SharedOutcome> shared_outcomes() const {
    std::vector<SharedOutcome> out;
    for (const auto& [key, node] : nodes_) {
      if (key.kind == NodeKind::Outcome && node.risk_ids.size() >= 2)
        out.push_back({key.phrase.str(), node.risk_ids});
    }
    std::sort(out.begin(), out.end(), [](const SharedOutcome& a, const SharedOutcome& b) {
      if (a.risk_ids.size() != b.risk_ids.size()) return a.risk_ids.size() > b.risk_ids.size();
      return a.phrase < b.phrase;
    });
    return out;
  }

  std::vector<DegreeEntry> degree_report() const {
    std::map<NodeKey, DegreeEntry> report;
    for (const auto& [key, node] : nodes_) report[key] = DegreeEntry{key, 0, 0, node.risk_ids.size()};
    for (const auto& [key, edge] : edges_) {
      ++report.at(key.from).out_degree;
      ++report.at(key.to).in_degree;
    }
    std::vector<DegreeEntry> out;
    out.reserve(report.size());
    for (auto& [key, entry] : report) out.push_back(std::move(entry));
    return out;
  }

  bool operator==(const KnowledgeGraph&) const = default;

  friend KnowledgeGraph import_graph_json(std::string_view document);

 private:
  static void check_layering(const EdgeKey& e) {
    const bool ok = e.relation == Relation::Causes
                        ? (e.from.kind == NodeKind::Trigger && e.to.kind == NodeKind::Outcome)
                        : (e.from.kind == NodeKind::Outcome && e.to.kind == NodeKind::ExposureVessel);
    if (!ok) throw std::logic_error("edge violates trigger->outcome->vessel layering");
  }

  void touch_node(const NodeKey& key, const std::string& risk_id) {
    auto [it, inserted] = nodes_.try_emplace(key, GraphNode{key, {}});
    it->second.risk_ids.insert(risk_id);
  }

  void touch_edge(const EdgeKey& key, const std::string& risk_id) {
    check_layering(key);
    if (!nodes_.count(key.from) || !nodes_.count(key.to))
      throw std::logic_error("edge endpoint missing from node set");
    auto [it, inserted] = edges_.try_emplace(key, GraphEdge{key, {}});
    it->second.risk_ids.insert(risk_id);
  }

  std::map<NodeKey, GraphNode> nodes_;
  std::map<EdgeKey, GraphEdge> edges_;
};

inline KnowledgeGraph add_risk(KnowledgeGraph graph, const RiskDecomposition& d) {
  graph.add_risk(d);
  return graph;
}

namespace detail {

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
  return out;
}

inline std::string dot_id(const NodeKey& k) {
  return dot_quote(std::string(to_string(k.kind)) + ":" + k.phrase.str());
}

inline std::string_view dot_style(NodeKind kind) {
  switch (kind) {
    case NodeKind::Trigger: return "shape=box, style=filled, fillcolor=\"#f4cccc\"";
    case NodeKind::Outcome: return "shape=ellipse, style=filled, fillcolor=\"#fff2cc\"";
    case NodeKind::ExposureVessel: return "shape=hexagon, style=filled, fillcolor=\"#d9ead3\"";
  }
  return "";
}

inline nlohmann::ordered_json node_ref_json(const NodeKey& k) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(k.kind);
  j["phrase"] = k.phrase.str();
  return j;
}

inline NodeKey node_ref_from_json(const nlohmann::json& j) {
  return NodeKey{node_kind_from_string(j.at("kind").get<std::string>()),
                 CanonicalPhrase::from_normalized(j.at("phrase").get<std::string>())};
}

inline RiskIdSet risk_ids_from_json(const nlohmann::json& j) {
  RiskIdSet ids;
  for (const auto& id : j) ids.insert(id.get<std::string>());
  if (ids.empty()) throw Error(ErrorCode::InvalidInput, "graph element with empty risk_ids");
  return ids;
}

}  // namespace detail

inline std::string export_graph(const KnowledgeGraph& graph, GraphFormat format) {
  if (format == GraphFormat::Dot) {
    std::string out = "digraph riskgraph {\n  rankdir=LR;\n";
    for (const auto& [key, node] : graph.nodes()) {
      out += "  " + detail::dot_id(key) + " [label=" + detail::dot_quote(key.phrase.str()) + ", " +
             std::string(detail::dot_style(key.kind)) + "];\n";
    }
    for (const auto& [key, edge] : graph.edges()) {
      out += "  " + detail::dot_id(key.from) + " -> " + detail::dot_id(key.to) + " [label=\"" +
             std::string(to_string(key.relation)) + "\"];\n";
    }
    out += "}\n";
    return out;
  }

  nlohmann::ordered_json doc;
  doc["schema"] = "riskgraph/1";
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& [key, node] : graph.nodes()) {
    nlohmann::ordered_json n = detail::node_ref_json(key);
    n["risk_ids"] = node.risk_ids;
    doc["nodes"].push_back(std::move(n));
  }
  doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& [key, edge] : graph.edges()) {
    nlohmann::ordered_json e;
    e["relation"] = to_string(key.relation);
    e["from"] = detail::node_ref_json(key.from);
    e["to"] = detail::node_ref_json(key.to);
    e["risk_ids"] = edge.risk_ids;
    doc["edges"].push_back(std::move(e));
  }
  return doc.dump(2) + "\n";
}

// Rebuilds a graph from its JSON export, re-checking every invariant.
inline KnowledgeGraph import_graph_json(std::string_view document) {
  nlohmann::json doc = nlohmann::json::parse(document, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw Error(ErrorCode::InvalidInput, "graph document is not a JSON object");
  if (doc.value("schema", std::string()) != "riskgraph/1")
    throw Error(ErrorCode::InvalidInput, "graph document schema is not riskgraph/1");

  KnowledgeGraph g;
  try {
    for (const auto& n : doc.at("nodes")) {
      NodeKey key = detail::node_ref_from_json(n);
      auto [it, inserted] = g.nodes_.try_emplace(key, GraphNode{key, detail::risk_ids_from_json(n.at("risk_ids"))});
      if (!inserted) throw Error(ErrorCode::InvalidInput, "duplicate node '" + key.phrase.str() + "'");
    }
    for (const auto& e : doc.at("edges")) {
      EdgeKey key{relation_from_string(e.at("relation").get<std::string>()),
                  detail::node_ref_from_json(e.at("from")), detail::node_ref_from_json(e.at("to"))};
      try {
        KnowledgeGraph::check_layering(key);
      } catch (const std::logic_error& ex) {
        throw Error(ErrorCode::InvalidInput, ex.what());
      }
      if (!g.nodes_.count(key.from) || !g.nodes_.count(key.to))
        throw Error(ErrorCode::InvalidInput, "edge endpoint missing from node list");
      auto [it, inserted] = g.edges_.try_emplace(key, GraphEdge{key, detail::risk_ids_from_json(e.at("risk_ids"))});
      if (!inserted) throw Error(ErrorCode::InvalidInput, "duplicate edge");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidInput, std::string("graph document: ") + ex.what());
  }
  return g;
}

}  // namespace riskradar
