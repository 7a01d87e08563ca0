#ifndef PATHREC_ENV_H_
#define PATHREC_ENV_H_

#include <compare>
#include <vector>

#include "pathrec/embeddings.h"
#include "pathrec/graph.h"

namespace pathrec {

struct EnvConfig {
  int alpha = 3;      // action-space cap per state
  int horizon = 3;    // episode length T
  int history_k = 1;  // remembered (relation, entity) pairs
  int max_hops = 3;   // J; recommendations need 2 <= hops <= J

  // Throws InputError unless alpha >= 1, history_k >= 0, max_hops >= 2 and
  // horizon == max_hops.
  void validate() const;
};

struct HistoryStep {
  RelationId rel;
  EntityId entity;
  auto operator<=>(const HistoryStep&) const = default;
};

// s_t = (user, current, history). At t = 0 the agent sits on the user with an
// empty history.
struct AgentState {
  EntityId user;
  EntityId current;
  std::vector<HistoryStep> history;  // oldest first, at most history_k entries
  int step = 0;
  bool operator==(const AgentState&) const = default;
};

struct ActionChoice {
  RelationId rel;
  EntityId target;
  double prune_score = 0.0;

  bool is_stay() const { return rel == kStayRelation; }
  bool operator==(const ActionChoice&) const = default;
};

// Deterministic MDP over a frozen graph. Holds references only; the graph and
// embedding table must outlive it. Per-user reward denominators
// max_i f(u, i) are computed once at construction, after which every method
// is read-only and safe to call concurrently.
class Environment {
 public:
  Environment(const KnowledgeGraph& graph, const EmbeddingTable& table, EnvConfig config);

  const KnowledgeGraph& graph() const { return *graph_; }
  const EmbeddingTable& table() const { return *table_; }
  const EnvConfig& config() const { return config_; }
  RelationId response_relation() const { return response_; }
  const std::vector<EntityId>& items() const { return items_; }

  AgentState initial_state(EntityId user) const;

  // Out-edges of the current entity ranked by f(user, target) descending,
  // ties by (relation, entity) id; truncated to alpha. A dead end yields the
  // single STAY action.
  std::vector<ActionChoice> pruned_actions(const AgentState& state) const;

  // Throws ContractError when the action is not in pruned_actions(state).
  AgentState step(const AgentState& state, const ActionChoice& action) const;
  // Same transition without the membership check; for callers that took the
  // action from pruned_actions themselves.
  AgentState advance(const AgentState& state, const ActionChoice& action) const;

  // Requires state.step == horizon.
  double terminal_reward(const AgentState& state) const;
  // max(0, f(u, e) / max_i f(u, i)) for items, 0 for anything else or when the
  // denominator is not positive.
  double reward(EntityId user, EntityId end) const;

  double affinity(EntityId user, EntityId e) const;
  double reward_denominator(EntityId user) const;
  // Subscribers with at least one outgoing edge, in id order.
  std::vector<EntityId> trainable_users() const;

 private:
  const KnowledgeGraph* graph_;
  const EmbeddingTable* table_;
  EnvConfig config_;
  RelationId response_;
  std::vector<EntityId> items_;
  std::vector<double> denominators_;  // indexed by entity id; subscribers only
};

}  // namespace pathrec

#endif  // PATHREC_ENV_H_
