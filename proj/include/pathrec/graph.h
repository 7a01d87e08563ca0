#ifndef PATHREC_GRAPH_H_
#define PATHREC_GRAPH_H_

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pathrec {

struct EntityId {
  std::uint32_t index = 0;
  auto operator<=>(const EntityId&) const = default;
};

struct RelationId {
  std::uint32_t index = 0;
  auto operator<=>(const RelationId&) const = default;
};

// Self-loop used when an entity has no outgoing edges. Never stored in a graph.
inline constexpr RelationId kStayRelation{std::numeric_limits<std::uint32_t>::max()};

namespace kinds {
inline constexpr std::string_view kSubscriber = "subscriber";
inline constexpr std::string_view kArticle = "educational_article";
inline constexpr std::string_view kTopic = "topic";
inline constexpr std::string_view kProduct = "product";
inline constexpr std::string_view kTopicTag = "topic_tag";
inline constexpr std::string_view kProductTag = "product_tag";
inline constexpr std::string_view kResponse = "response";
inline constexpr std::string_view kTerm = "term";
}  // namespace kinds

inline constexpr std::string_view kReverseSuffix = "_rev";

struct Triple {
  EntityId head;
  RelationId rel;
  EntityId tail;
  auto operator<=>(const Triple&) const = default;
};

struct Edge {
  RelationId rel;
  EntityId target;
  auto operator<=>(const Edge&) const = default;
};

// Alternating entity/relation sequence e_0 -r_1-> e_1 ... -r_n-> e_n. A step
// may be a STAY self-loop; those count toward the episode length but not
// toward hops().
struct ReasoningPath {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  std::vector<double> step_probs;
  double probability = 1.0;
  double reward = 0.0;

  std::size_t hops() const;
  EntityId end() const { return entities.back(); }
};

// Typed, append-only knowledge graph. Ids are dense and assigned in
// registration order; every forward relation owns a reverse partner whose
// index is forward + 1. Once frozen the graph is immutable and safe to share
// between threads.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  EntityId register_entity(std::string_view kind, std::string_view key);
  // Returns the forward relation; registering "x_rev" yields the reverse of "x".
  RelationId register_relation(std::string_view name);
  void add_triple(EntityId head, RelationId rel, EntityId tail);
  void add_triple(const Triple& t) { add_triple(t.head, t.rel, t.tail); }
  void augment_reverse_edges();
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  std::size_t triple_count() const { return triples_.size(); }

  bool has_entity(EntityId e) const { return e.index < entities_.size(); }
  bool has_relation(RelationId r) const { return r.index < relations_.size(); }
  bool has_triple(EntityId head, RelationId rel, EntityId tail) const;
  bool has_triple(const Triple& t) const { return has_triple(t.head, t.rel, t.tail); }

  const std::string& kind(EntityId e) const;
  const std::string& key(EntityId e) const;
  bool is_kind(EntityId e, std::string_view kind) const;
  std::vector<EntityId> entities_of_kind(std::string_view kind) const;
  std::optional<EntityId> find_entity(std::string_view kind, std::string_view key) const;
  // Counts per kind, ordered by kind name.
  std::map<std::string, std::size_t> kind_counts() const;

  const std::string& relation_name(RelationId r) const;
  bool is_reverse(RelationId r) const;
  RelationId reverse_of(RelationId r) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  // Sorted by (relation index, entity index).
  std::span<const Edge> out_edges(EntityId e) const;
  const std::set<Triple>& triples() const { return triples_; }

  // Adjacency rebuilt from the raw triple set; equals the incremental index.
  std::vector<std::vector<Edge>> rebuild_out_index() const;
  const std::vector<std::vector<Edge>>& out_index() const { return out_; }

  bool validate_path(const ReasoningPath& path) const;

 private:
  struct EntityRecord {
    std::string kind;
    std::string key;
  };
  struct RelationRecord {
    std::string name;
    bool is_reverse;
  };

  void check_entity(EntityId e) const;
  void check_relation(RelationId r) const;
  void check_mutable() const;

  std::vector<EntityRecord> entities_;
  std::map<std::pair<std::string, std::string>, EntityId> entity_index_;
  std::vector<RelationRecord> relations_;
  std::map<std::string, RelationId, std::less<>> relation_index_;
  std::set<Triple> triples_;
  std::vector<std::vector<Edge>> out_;
  bool frozen_ = false;
};

// `kind:key`, the form used in dumps and exports.
std::string entity_label(const KnowledgeGraph& graph, EntityId e);

// Text dump: one triple per line, `kind:key<TAB>relation<TAB>kind:key`.
// Leading `#relation<TAB>name` and `#entity<TAB>kind:key` lines record the
// registration order so a reload reproduces the same ids.
void write_triples(const KnowledgeGraph& graph, std::ostream& out);
KnowledgeGraph read_triples(std::istream& in);
void save_triples(const KnowledgeGraph& graph, const std::string& path);
KnowledgeGraph load_triples(const std::string& path);

}  // namespace pathrec

#endif  // PATHREC_GRAPH_H_
