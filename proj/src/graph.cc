#include "pathrec/graph.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pathrec/errors.h"

namespace pathrec {
namespace {

bool has_control_separator(std::string_view s) {
  return s.find_first_of("\t\r\n") != std::string_view::npos;
}

std::pair<std::string, std::string> split_entity_label(std::string_view label,
                                                       std::size_t line_no) {
  const auto colon = label.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == label.size()) {
    throw InputError("triples line " + std::to_string(line_no) +
                     ": expected kind:key, got '" + std::string(label) + "'");
  }
  return {std::string(label.substr(0, colon)), std::string(label.substr(colon + 1))};
}

}  // namespace

std::string entity_label(const KnowledgeGraph& g, EntityId e) {
  return g.kind(e) + ":" + g.key(e);
}

std::size_t ReasoningPath::hops() const {
  return static_cast<std::size_t>(
      std::count_if(relations.begin(), relations.end(),
                    [](RelationId r) { return r != kStayRelation; }));
}

EntityId KnowledgeGraph::register_entity(std::string_view kind, std::string_view key) {
  if (key.empty()) throw InputError("entity key must be nonempty");
  if (kind.empty()) throw InputError("entity kind must be nonempty");
  if (has_control_separator(key) || has_control_separator(kind) ||
      kind.find(':') != std::string_view::npos) {
    throw InputError("entity '" + std::string(kind) + ":" + std::string(key) +
                     "' contains a reserved separator");
  }
  auto lookup = std::make_pair(std::string(kind), std::string(key));
  if (auto it = entity_index_.find(lookup); it != entity_index_.end()) return it->second;
  check_mutable();
  const EntityId id{static_cast<std::uint32_t>(entities_.size())};
  entities_.push_back({lookup.first, lookup.second});
  entity_index_.emplace(std::move(lookup), id);
  out_.emplace_back();
  return id;
}

RelationId KnowledgeGraph::register_relation(std::string_view name) {
  if (name.ends_with(kReverseSuffix) && name.size() > kReverseSuffix.size()) {
    return reverse_of(register_relation(name.substr(0, name.size() - kReverseSuffix.size())));
  }
  if (name.empty() || has_control_separator(name)) {
    throw InputError("invalid relation name '" + std::string(name) + "'");
  }
  if (auto it = relation_index_.find(name); it != relation_index_.end()) return it->second;
  check_mutable();
  const RelationId forward{static_cast<std::uint32_t>(relations_.size())};
  const RelationId reverse{forward.index + 1};
  std::string reverse_name = std::string(name) + std::string(kReverseSuffix);
  relations_.push_back({std::string(name), false});
  relations_.push_back({reverse_name, true});
  relation_index_.emplace(std::string(name), forward);
  relation_index_.emplace(std::move(reverse_name), reverse);
  return forward;
}

void KnowledgeGraph::add_triple(EntityId head, RelationId rel, EntityId tail) {
  check_entity(head);
  check_entity(tail);
  check_relation(rel);
  check_mutable();
  if (!triples_.insert({head, rel, tail}).second) return;
  auto& edges = out_[head.index];
  const Edge edge{rel, tail};
  edges.insert(std::lower_bound(edges.begin(), edges.end(), edge), edge);
}

void KnowledgeGraph::augment_reverse_edges() {
  check_mutable();
  std::vector<Triple> missing;
  for (const Triple& t : triples_) {
    const Triple rev{t.tail, reverse_of(t.rel), t.head};
    if (!triples_.contains(rev)) missing.push_back(rev);
  }
  for (const Triple& t : missing) add_triple(t);
}

bool KnowledgeGraph::has_triple(EntityId head, RelationId rel, EntityId tail) const {
  return triples_.contains({head, rel, tail});
}

const std::string& KnowledgeGraph::kind(EntityId e) const {
  check_entity(e);
  return entities_[e.index].kind;
}

const std::string& KnowledgeGraph::key(EntityId e) const {
  check_entity(e);
  return entities_[e.index].key;
}

bool KnowledgeGraph::is_kind(EntityId e, std::string_view kind) const {
  return has_entity(e) && entities_[e.index].kind == kind;
}

std::vector<EntityId> KnowledgeGraph::entities_of_kind(std::string_view kind) const {
  std::vector<EntityId> out;
  for (std::uint32_t i = 0; i < entities_.size(); ++i) {
    if (entities_[i].kind == kind) out.push_back(EntityId{i});
  }
  return out;
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view kind,
                                                    std::string_view key) const {
  auto it = entity_index_.find({std::string(kind), std::string(key)});
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, std::size_t> KnowledgeGraph::kind_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& rec : entities_) ++counts[rec.kind];
  return counts;
}

const std::string& KnowledgeGraph::relation_name(RelationId r) const {
  static const std::string kStayName = "stay";
  if (r == kStayRelation) return kStayName;
  check_relation(r);
  return relations_[r.index].name;
}

bool KnowledgeGraph::is_reverse(RelationId r) const {
  check_relation(r);
  return relations_[r.index].is_reverse;
}

RelationId KnowledgeGraph::reverse_of(RelationId r) const {
  check_relation(r);
  return relations_[r.index].is_reverse ? RelationId{r.index - 1} : RelationId{r.index + 1};
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
  auto it = relation_index_.find(name);
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const Edge> KnowledgeGraph::out_edges(EntityId e) const {
  check_entity(e);
  return out_[e.index];
}

std::vector<std::vector<Edge>> KnowledgeGraph::rebuild_out_index() const {
  std::vector<std::vector<Edge>> index(entities_.size());
  for (const Triple& t : triples_) index[t.head.index].push_back({t.rel, t.tail});
  for (auto& edges : index) std::sort(edges.begin(), edges.end());
  return index;
}

bool KnowledgeGraph::validate_path(const ReasoningPath& path) const {
  if (path.entities.empty() || path.entities.size() != path.relations.size() + 1) return false;
  for (EntityId e : path.entities) {
    if (!has_entity(e)) return false;
  }
  for (std::size_t i = 0; i < path.relations.size(); ++i) {
    const EntityId from = path.entities[i];
    const EntityId to = path.entities[i + 1];
    const RelationId rel = path.relations[i];
    if (rel == kStayRelation) {
      if (from != to) return false;
    } else if (!has_triple(from, rel, to)) {
      return false;
    }
  }
  return true;
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (!has_entity(e)) {
    throw InputError("unregistered entity id " + std::to_string(e.index));
  }
}

void KnowledgeGraph::check_relation(RelationId r) const {
  if (!has_relation(r)) {
    throw InputError("unregistered relation id " + std::to_string(r.index));
  }
}

void KnowledgeGraph::check_mutable() const {
  if (frozen_) throw ContractError("knowledge graph is frozen");
}

void write_triples(const KnowledgeGraph& graph, std::ostream& out) {
  for (std::uint32_t r = 0; r < graph.relation_count(); ++r) {
    if (!graph.is_reverse(RelationId{r})) {
      out << "#relation\t" << graph.relation_name(RelationId{r}) << '\n';
    }
  }
  for (std::uint32_t e = 0; e < graph.entity_count(); ++e) {
    out << "#entity\t" << entity_label(graph, EntityId{e}) << '\n';
  }
  for (const Triple& t : graph.triples()) {
    out << entity_label(graph, t.head) << '\t' << graph.relation_name(t.rel) << '\t'
        << entity_label(graph, t.tail) << '\n';
  }
}

KnowledgeGraph read_triples(std::istream& in) {
  KnowledgeGraph graph;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (auto tab = rest.find('\t'); tab != std::string_view::npos; tab = rest.find('\t')) {
      fields.push_back(rest.substr(0, tab));
      rest.remove_prefix(tab + 1);
    }
    fields.push_back(rest);
    if (fields[0] == "#relation" && fields.size() == 2) {
      graph.register_relation(fields[1]);
      continue;
    }
    if (fields[0] == "#entity" && fields.size() == 2) {
      auto [kind, key] = split_entity_label(fields[1], line_no);
      graph.register_entity(kind, key);
      continue;
    }
    if (fields[0].starts_with('#')) continue;
    if (fields.size() != 3) {
      throw InputError("triples line " + std::to_string(line_no) + ": expected 3 fields");
    }
    auto [hk, hkey] = split_entity_label(fields[0], line_no);
    auto [tk, tkey] = split_entity_label(fields[2], line_no);
    const EntityId head = graph.register_entity(hk, hkey);
    const RelationId rel = graph.register_relation(fields[1]);
    const EntityId tail = graph.register_entity(tk, tkey);
    graph.add_triple(head, rel, tail);
  }
  return graph;
}

void save_triples(const KnowledgeGraph& graph, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  write_triples(graph, out);
  if (!out) throw InputError("failed writing " + path);
}

KnowledgeGraph load_triples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_triples(in);
}

}  // namespace pathrec
