#ifndef PATHREC_PDR_H_
#define PATHREC_PDR_H_

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pathrec/env.h"
#include "pathrec/graph.h"
#include "pathrec/policy.h"

namespace pathrec {

struct BeamConfig {
  std::vector<int> widths{3, 2, 1};  // one per hop
  int top_n = 10;
  int min_hops = 2;
  int max_hops = 3;

  // Throws InputError unless every width is positive, top_n >= 1 and
  // 2 <= min_hops <= max_hops == widths.size().
  void validate() const;
};

struct CandidateSet {
  std::vector<ReasoningPath> paths;  // every surviving path after T hops

  std::vector<ReasoningPath> item_paths(const KnowledgeGraph& graph) const;
};

// Policy-guided beam search from the user. At hop t every surviving path is
// extended by its widths[t] most probable actions over the pruned action
// space (ties keep pruned order). No sampling. A user without outgoing edges
// yields an empty set.
CandidateSet pdr_search(EntityId user, const PolicyParams& params, const Environment& env,
                        const BeamConfig& beam);

// Highest-probability path per end item among paths with at least min_hops
// non-STAY hops. Ties go to fewer hops, then the smaller entity-id sequence.
std::map<EntityId, ReasoningPath> best_explanation_per_item(const KnowledgeGraph& graph,
                                                            const CandidateSet& candidates,
                                                            int min_hops);

struct RecommendationEntry {
  EntityId item;
  double score = 0.0;
  ReasoningPath explanation;
};

struct RecommendationList {
  EntityId user;
  std::vector<RecommendationEntry> entries;
};

// Orders by path reward descending, then item id; drops items the user
// already has a has_response edge to; keeps at most n.
RecommendationList rank_items(const KnowledgeGraph& graph, EntityId user,
                              const std::map<EntityId, ReasoningPath>& explanations, int n);

RecommendationList recommend(EntityId user, const PolicyParams& params, const Environment& env,
                             const BeamConfig& beam);
// One list per user, in input order; users are searched concurrently.
std::vector<RecommendationList> recommend_all(std::span<const EntityId> users,
                                              const PolicyParams& params,
                                              const Environment& env, const BeamConfig& beam,
                                              int threads);

struct RenderedExplanation {
  std::string text;  // `s1 -has_response-> a12 -has_topic-> ...`, STAY elided
  std::string dot;   // digraph with the end node highlighted
};

// Throws InputError when the path does not validate against the graph.
RenderedExplanation render_explanation(const KnowledgeGraph& graph, const ReasoningPath& path);

// One JSON object per line: {"user", "items": [{"item", "score", "path"}]}.
// Path entries alternate `kind:key` entity labels and relation names, with
// STAY hops left out.
void write_recommendations_jsonl(std::ostream& out, const KnowledgeGraph& graph,
                                 std::span<const RecommendationList> lists);

}  // namespace pathrec

#endif  // PATHREC_PDR_H_
