#include "pathrec/pdr.h"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>

#include "json.hpp"
#include "pathrec/errors.h"
#include "pathrec/kg_builder.h"
#include "pathrec/parallel.h"

namespace pathrec {
namespace {

struct BeamNode {
  AgentState state;
  ReasoningPath path;
};

bool better_explanation(const ReasoningPath& a, const ReasoningPath& b) {
  if (a.probability != b.probability) return a.probability > b.probability;
  if (a.hops() != b.hops()) return a.hops() < b.hops();
  return a.entities < b.entities;
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void BeamConfig::validate() const {
  if (widths.empty()) throw InputError("beam.widths must list one width per hop");
  for (int w : widths) {
    if (w < 1) throw InputError("beam widths must be positive");
  }
  if (top_n < 1) throw InputError("beam.top_n must be at least 1");
  if (min_hops < 2 || min_hops > max_hops) {
    throw InputError("beam.min_hops must satisfy 2 <= min_hops <= max_hops");
  }
  if (static_cast<int>(widths.size()) != max_hops) {
    throw InputError("beam.widths has " + std::to_string(widths.size()) +
                     " entries, expected max_hops = " + std::to_string(max_hops));
  }
}

std::vector<ReasoningPath> CandidateSet::item_paths(const KnowledgeGraph& graph) const {
  std::vector<ReasoningPath> out;
  for (const ReasoningPath& p : paths) {
    if (graph.is_kind(p.end(), kinds::kArticle)) out.push_back(p);
  }
  return out;
}

CandidateSet pdr_search(EntityId user, const PolicyParams& params, const Environment& env,
                        const BeamConfig& beam) {
  beam.validate();
  if (static_cast<int>(beam.widths.size()) != env.config().horizon) {
    throw InputError("beam widths do not match the environment horizon");
  }
  CandidateSet result;
  if (env.graph().out_edges(user).empty()) return result;

  std::vector<BeamNode> level;
  BeamNode root{env.initial_state(user), {}};
  root.path.entities.push_back(user);
  level.push_back(std::move(root));

  for (int width : beam.widths) {
    std::vector<BeamNode> next;
    for (const BeamNode& node : level) {
      const auto actions = env.pruned_actions(node.state);
      const auto probs = action_distribution(params, env.table(), node.state, actions);
      std::vector<std::size_t> order(actions.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
      order.resize(std::min(order.size(), static_cast<std::size_t>(width)));
      for (std::size_t j : order) {
        BeamNode child{env.advance(node.state, actions[j]), node.path};
        child.path.entities.push_back(actions[j].target);
        child.path.relations.push_back(actions[j].rel);
        child.path.step_probs.push_back(probs[j]);
        child.path.probability *= probs[j];
        next.push_back(std::move(child));
      }
    }
    level = std::move(next);
  }
  for (BeamNode& node : level) {
    node.path.reward = env.terminal_reward(node.state);
    result.paths.push_back(std::move(node.path));
  }
  return result;
}

std::map<EntityId, ReasoningPath> best_explanation_per_item(const KnowledgeGraph& graph,
                                                            const CandidateSet& candidates,
                                                            int min_hops) {
  std::map<EntityId, ReasoningPath> best;
  for (const ReasoningPath& p : candidates.paths) {
    if (!graph.is_kind(p.end(), kinds::kArticle)) continue;
    if (p.hops() < static_cast<std::size_t>(min_hops)) continue;
    auto it = best.find(p.end());
    if (it == best.end()) {
      best.emplace(p.end(), p);
    } else if (better_explanation(p, it->second)) {
      it->second = p;
    }
  }
  return best;
}

RecommendationList rank_items(const KnowledgeGraph& graph, EntityId user,
                              const std::map<EntityId, ReasoningPath>& explanations, int n) {
  RecommendationList list{user, {}};
  const auto response = graph.find_relation(relations::kHasResponse);
  for (const auto& [item, path] : explanations) {
    if (response && graph.has_triple(user, *response, item)) continue;
    list.entries.push_back({item, path.reward, path});
  }
  std::sort(list.entries.begin(), list.entries.end(),
            [](const RecommendationEntry& a, const RecommendationEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.item < b.item;
            });
  if (list.entries.size() > static_cast<std::size_t>(std::max(n, 0))) {
    list.entries.resize(static_cast<std::size_t>(std::max(n, 0)));
  }
  return list;
}

RecommendationList recommend(EntityId user, const PolicyParams& params, const Environment& env,
                             const BeamConfig& beam) {
  const CandidateSet candidates = pdr_search(user, params, env, beam);
  return rank_items(env.graph(), user,
                    best_explanation_per_item(env.graph(), candidates, beam.min_hops),
                    beam.top_n);
}

std::vector<RecommendationList> recommend_all(std::span<const EntityId> users,
                                              const PolicyParams& params,
                                              const Environment& env, const BeamConfig& beam,
                                              int threads) {
  beam.validate();
  std::vector<RecommendationList> out(users.size());
  parallel_for(users.size(), threads,
               [&](std::size_t i) { out[i] = recommend(users[i], params, env, beam); });
  return out;
}

RenderedExplanation render_explanation(const KnowledgeGraph& graph, const ReasoningPath& path) {
  if (!graph.validate_path(path)) throw InputError("explanation path does not validate");
  RenderedExplanation r;
  r.text = graph.key(path.entities.front());
  std::vector<EntityId> nodes{path.entities.front()};
  std::vector<std::pair<std::size_t, std::size_t>> arrows;  // (from, to) step index
  std::size_t from = 0;
  for (std::size_t i = 0; i < path.relations.size(); ++i) {
    if (path.relations[i] == kStayRelation) continue;
    r.text += " -" + graph.relation_name(path.relations[i]) + "-> " +
              graph.key(path.entities[i + 1]);
    arrows.emplace_back(from, i);
    from = i + 1;
    nodes.push_back(path.entities[i + 1]);
  }

  std::set<EntityId> declared;
  std::string dot = "digraph explanation {\n  rankdir=LR;\n";
  for (EntityId e : nodes) {
    if (!declared.insert(e).second) continue;
    dot += "  e" + std::to_string(e.index) + " [label=" + dot_quote(entity_label(graph, e));
    if (e == path.end()) dot += ", style=filled, fillcolor=gold, penwidth=2";
    dot += "];\n";
  }
  for (const auto& [src, step] : arrows) {
    dot += "  e" + std::to_string(path.entities[src].index) + " -> e" +
           std::to_string(path.entities[step + 1].index) +
           " [label=" + dot_quote(graph.relation_name(path.relations[step])) + "];\n";
  }
  dot += "}\n";
  r.dot = std::move(dot);
  return r;
}

void write_recommendations_jsonl(std::ostream& out, const KnowledgeGraph& graph,
                                 std::span<const RecommendationList> lists) {
  for (const RecommendationList& list : lists) {
    nlohmann::ordered_json row;
    row["user"] = graph.key(list.user);
    row["items"] = nlohmann::ordered_json::array();
    for (const RecommendationEntry& e : list.entries) {
      nlohmann::ordered_json path = nlohmann::ordered_json::array();
      path.push_back(entity_label(graph, e.explanation.entities.front()));
      for (std::size_t i = 0; i < e.explanation.relations.size(); ++i) {
        if (e.explanation.relations[i] == kStayRelation) continue;
        path.push_back(graph.relation_name(e.explanation.relations[i]));
        path.push_back(entity_label(graph, e.explanation.entities[i + 1]));
      }
      nlohmann::ordered_json item;
      item["item"] = graph.key(e.item);
      item["score"] = e.score;
      item["path"] = std::move(path);
      row["items"].push_back(std::move(item));
    }
    out << row.dump() << '\n';
  }
}

}  // namespace pathrec
