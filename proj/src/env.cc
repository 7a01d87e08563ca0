#include "pathrec/env.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathrec/errors.h"
#include "pathrec/kg_builder.h"

namespace pathrec {

void EnvConfig::validate() const {
  if (alpha < 1) throw InputError("env.alpha must be at least 1");
  if (history_k < 0) throw InputError("env.history_k must be non-negative");
  if (max_hops < 2) throw InputError("env.max_hops must be at least 2");
  if (horizon != max_hops) throw InputError("env.horizon must equal env.max_hops");
}

Environment::Environment(const KnowledgeGraph& graph, const EmbeddingTable& table,
                         EnvConfig config)
    : graph_(&graph), table_(&table), config_(config) {
  config_.validate();
  if (!graph.frozen()) throw ContractError("environment requires a frozen graph");
  if (table.entity_count() != graph.entity_count() ||
      table.relation_count() != graph.relation_count()) {
    throw InputError("embedding table does not match the graph (" +
                     std::to_string(table.entity_count()) + " vs " +
                     std::to_string(graph.entity_count()) + " entities)");
  }
  const auto response = graph.find_relation(relations::kHasResponse);
  if (!response) throw InputError("graph has no has_response relation");
  response_ = *response;
  items_ = graph.entities_of_kind(kinds::kArticle);

  denominators_.assign(graph.entity_count(), std::numeric_limits<double>::quiet_NaN());
  for (EntityId u : graph.entities_of_kind(kinds::kSubscriber)) {
    double best = -std::numeric_limits<double>::infinity();
    for (EntityId i : items_) best = std::max(best, affinity(u, i));
    denominators_[u.index] = best;
  }
}

double Environment::affinity(EntityId user, EntityId e) const {
  return user_affinity(*table_, user, response_, e);
}

double Environment::reward_denominator(EntityId user) const {
  if (!graph_->is_kind(user, kinds::kSubscriber)) {
    throw InputError("entity " + std::to_string(user.index) + " is not a subscriber");
  }
  return denominators_[user.index];
}

AgentState Environment::initial_state(EntityId user) const {
  if (!graph_->is_kind(user, kinds::kSubscriber)) {
    throw InputError("initial state requires a subscriber, got entity " +
                     std::to_string(user.index));
  }
  return AgentState{user, user, {}, 0};
}

std::vector<ActionChoice> Environment::pruned_actions(const AgentState& state) const {
  const auto edges = graph_->out_edges(state.current);
  if (edges.empty()) return {ActionChoice{kStayRelation, state.current, 0.0}};
  std::vector<ActionChoice> actions;
  actions.reserve(edges.size());
  for (const Edge& e : edges) {
    actions.push_back({e.rel, e.target, affinity(state.user, e.target)});
  }
  // Edges arrive sorted by (relation, entity); a stable sort keeps that order
  // among equal scores.
  std::stable_sort(actions.begin(), actions.end(),
                   [](const ActionChoice& a, const ActionChoice& b) {
                     return a.prune_score > b.prune_score;
                   });
  if (actions.size() > static_cast<std::size_t>(config_.alpha)) actions.resize(config_.alpha);
  return actions;
}

AgentState Environment::advance(const AgentState& state, const ActionChoice& action) const {
  AgentState next{state.user, action.target, state.history, state.step + 1};
  if (config_.history_k > 0) {
    next.history.push_back({action.rel, state.current});
    if (next.history.size() > static_cast<std::size_t>(config_.history_k)) {
      next.history.erase(next.history.begin(),
                         next.history.end() - config_.history_k);
    }
  } else {
    next.history.clear();
  }
  return next;
}

AgentState Environment::step(const AgentState& state, const ActionChoice& action) const {
  const auto allowed = pruned_actions(state);
  const bool found = std::any_of(allowed.begin(), allowed.end(), [&](const ActionChoice& a) {
    return a.rel == action.rel && a.target == action.target;
  });
  if (!found) {
    throw ContractError("action (" + std::to_string(action.rel.index) + ", " +
                        std::to_string(action.target.index) +
                        ") is not in the pruned action space");
  }
  return advance(state, action);
}

double Environment::reward(EntityId user, EntityId end) const {
  if (!graph_->is_kind(end, kinds::kArticle)) return 0.0;
  const double denom = reward_denominator(user);
  if (!(denom > 0)) return 0.0;
  return std::clamp(affinity(user, end) / denom, 0.0, 1.0);
}

double Environment::terminal_reward(const AgentState& state) const {
  if (state.step != config_.horizon) {
    throw ContractError("terminal_reward at step " + std::to_string(state.step) +
                        ", horizon is " + std::to_string(config_.horizon));
  }
  return reward(state.user, state.current);
}

std::vector<EntityId> Environment::trainable_users() const {
  std::vector<EntityId> users;
  for (EntityId u : graph_->entities_of_kind(kinds::kSubscriber)) {
    if (!graph_->out_edges(u).empty()) users.push_back(u);
  }
  return users;
}

}  // namespace pathrec
