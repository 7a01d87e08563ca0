#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "pathrec/errors.h"
#include "pathrec/kg_builder.h"
#include "pathrec/pdr.h"
#include "pdr_oracle.h"
#include "test_support.h"

using namespace pathrec;
using pathrec::testing::all_paths;
using pathrec::testing::data_path;
using pathrec::testing::oracle_ranking;
using pathrec::testing::random_world;
using pathrec::testing::same_path;

namespace {

struct Toy {
  KnowledgeGraph graph;
  EmbeddingTable table;

  Toy() {
    auto rows = read_interactions_file(data_path("fixtures/toy/interactions.csv"));
    auto articles = read_articles_file(data_path("fixtures/toy/articles.csv"));
    REQUIRE(rows.issues.empty());
    REQUIRE(articles.issues.empty());
    graph = build_ckg(rows.rows, articles.rows, 2).graph;
    table = EmbeddingTable(ModelKind::kTransE, 3, graph.entity_count(), graph.relation_count());
    Rng rng(17);
    for (auto* m : {&table.entity_matrix(), &table.relation_matrix()}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-1, 1);
    }
  }

  EntityId id(std::string_view kind, std::string_view key) const {
    return *graph.find_entity(kind, key);
  }
};

std::size_t max_pruned_degree(const KnowledgeGraph& g, int alpha) {
  std::size_t best = 1;
  for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
    best = std::max(best, std::min<std::size_t>(g.out_edges(EntityId{e}).size(), alpha));
  }
  return best;
}

BeamConfig full_width(std::size_t width, int top_n = 100) {
  BeamConfig b;
  b.widths.assign(3, static_cast<int>(width));
  b.top_n = top_n;
  return b;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ReasoningPath make_path(std::vector<std::uint32_t> ents, std::vector<std::uint32_t> rels,
                        double prob, double reward = 0.0) {
  ReasoningPath p;
  for (auto e : ents) p.entities.push_back(EntityId{e});
  for (auto r : rels) p.relations.push_back(RelationId{r});
  p.probability = prob;
  p.reward = reward;
  return p;
}

}  // namespace

TEST_CASE("beam config validation") {
  CHECK_NOTHROW(BeamConfig{}.validate());
  BeamConfig b;
  b.widths = {3, 0, 1};
  CHECK_THROWS_AS(b.validate(), InputError);
  b = {};
  b.widths = {3, 2};
  CHECK_THROWS_AS(b.validate(), InputError);
  b = {};
  b.min_hops = 1;
  CHECK_THROWS_AS(b.validate(), InputError);
  b = {};
  b.top_n = 0;
  CHECK_THROWS_AS(b.validate(), InputError);
}

TEST_CASE("toy fixture at full width equals exhaustive enumeration") {
  Toy toy;
  EnvConfig cfg;
  cfg.alpha = 5;
  Environment env(toy.graph, toy.table, cfg);
  const PolicyParams params = PolicyParams::random(3, 6, 2);
  const EntityId s1 = toy.id(kinds::kSubscriber, "s1");
  const BeamConfig beam = full_width(max_pruned_degree(toy.graph, cfg.alpha));

  // Compared as sets: the beam emits children in probability order.
  auto by_sequence = [](const ReasoningPath& a, const ReasoningPath& b) {
    return std::tie(a.entities, a.relations) < std::tie(b.entities, b.relations);
  };
  CandidateSet found = pdr_search(s1, params, env, beam);
  auto expected = all_paths(params, env, s1);
  std::sort(found.paths.begin(), found.paths.end(), by_sequence);
  std::sort(expected.begin(), expected.end(), by_sequence);
  REQUIRE(found.paths.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(same_path(found.paths[i], expected[i]));

  const RecommendationList list = recommend(s1, params, env, beam);
  const auto oracle = oracle_ranking(params, env, s1, beam.min_hops, beam.top_n);
  REQUIRE(list.entries.size() == oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(list.entries[i].item == oracle[i].item);
    CHECK(list.entries[i].score == oracle[i].score);
    CHECK(same_path(list.entries[i].explanation, oracle[i].explanation));
  }
  // a1 is clicked, so only a2 and a3 can be recommended.
  REQUIRE(list.entries.size() == 2);
  for (const auto& e : list.entries) CHECK(e.item != toy.id(kinds::kArticle, "a1"));
}

TEST_CASE("random graphs at full width equal exhaustive enumeration") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto w = random_world(seed + 500, 4);
    EnvConfig cfg;
    cfg.alpha = 2 + static_cast<int>(seed % 3);
    Environment env(w.graph, w.table, cfg);
    const PolicyParams params = PolicyParams::random(4, 5, seed);
    const BeamConfig beam = full_width(max_pruned_degree(w.graph, cfg.alpha), 10);
    for (EntityId u : w.graph.entities_of_kind(kinds::kSubscriber)) {
      const RecommendationList list = recommend(u, params, env, beam);
      const auto oracle = oracle_ranking(params, env, u, beam.min_hops, beam.top_n);
      REQUIRE(list.entries.size() == oracle.size());
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(list.entries[i].item == oracle[i].item);
        CHECK(same_path(list.entries[i].explanation, oracle[i].explanation));
      }
    }
  }
}

TEST_CASE("a short chain is padded with STAY") {
  KnowledgeGraph g;
  const RelationId resp = g.register_relation(relations::kHasResponse);
  const EntityId u = g.register_entity(kinds::kSubscriber, "u");
  const EntityId a = g.register_entity(kinds::kArticle, "a");
  const EntityId lonely = g.register_entity(kinds::kSubscriber, "v");
  g.add_triple(u, resp, a);
  g.freeze();
  EmbeddingTable t(ModelKind::kTransE, 2, g.entity_count(), g.relation_count());
  t.entity(a)[0] = 1.0;
  t.entity(u)[0] = 1.0;
  Environment env(g, t, EnvConfig{});
  const PolicyParams params = PolicyParams::random(2, 3, 1);

  const CandidateSet c = pdr_search(u, params, env, BeamConfig{});
  REQUIRE(c.paths.size() == 1);
  const ReasoningPath& p = c.paths[0];
  CHECK(p.entities == std::vector<EntityId>{u, a, a, a});
  CHECK(p.relations == std::vector<RelationId>{resp, kStayRelation, kStayRelation});
  CHECK(p.hops() == 1);
  CHECK(p.probability == 1.0);
  CHECK(p.reward == 1.0);
  CHECK(c.item_paths(g).size() == 1);
  // One real hop is below min_hops.
  CHECK(best_explanation_per_item(g, c, 2).empty());
  CHECK(best_explanation_per_item(g, c, 1).size() == 1);

  CHECK(pdr_search(lonely, params, env, BeamConfig{}).paths.empty());
}

TEST_CASE("best explanation selection") {
  KnowledgeGraph g;
  g.register_relation("r");
  for (int i = 0; i < 6; ++i) g.register_entity(kinds::kArticle, "a" + std::to_string(i));
  g.register_entity(kinds::kTopic, "t");
  CandidateSet c;
  c.paths.push_back(make_path({0, 1, 2, 3}, {0, 0, 0}, 0.05));
  c.paths.push_back(make_path({0, 4, 2, 3}, {0, 0, 0}, 0.2));
  // Equal probability: the two-hop path wins.
  c.paths.push_back(make_path({0, 1, 2, 5}, {0, 0, 0}, 0.1));
  c.paths.push_back(make_path({0, 1, 5, 5}, {0, 0, kStayRelation.index}, 0.1));
  // Equal probability and hops: smaller entity sequence wins.
  c.paths.push_back(make_path({0, 2, 1, 4}, {0, 0, 0}, 0.3));
  c.paths.push_back(make_path({0, 1, 2, 4}, {0, 0, 0}, 0.3));
  // Ends at a topic: never an explanation.
  c.paths.push_back(make_path({0, 1, 2, 6}, {0, 0, 0}, 0.9));

  const auto best = best_explanation_per_item(g, c, 2);
  REQUIRE(best.size() == 3);
  CHECK(best.at(EntityId{3}).probability == 0.2);
  CHECK(best.at(EntityId{5}).hops() == 2);
  CHECK(best.at(EntityId{4}).entities[1] == EntityId{1});
}

TEST_CASE("ranking by reward with clicked items removed") {
  KnowledgeGraph g;
  const RelationId resp = g.register_relation(relations::kHasResponse);
  const EntityId u = g.register_entity(kinds::kSubscriber, "u");
  std::vector<EntityId> items;
  for (int i = 0; i < 4; ++i) items.push_back(g.register_entity(kinds::kArticle, "a" + std::to_string(i)));
  g.add_triple(u, resp, items[3]);
  g.freeze();

  std::map<EntityId, ReasoningPath> ex;
  ex[items[0]] = make_path({0, 4, 0, 1}, {}, 0.1, 0.1);
  ex[items[1]] = make_path({0, 4, 0, 2}, {}, 0.1, 0.9);
  ex[items[2]] = make_path({0, 4, 0, 3}, {}, 0.1, 0.5);
  const auto top2 = rank_items(g, u, ex, 2);
  REQUIRE(top2.entries.size() == 2);
  CHECK(top2.entries[0].item == items[1]);
  CHECK(top2.entries[1].item == items[2]);
  CHECK(top2.entries[0].score == 0.9);

  // Equal scores fall back to item id.
  ex[items[0]].reward = 0.9;
  const auto tied = rank_items(g, u, ex, 3);
  CHECK(tied.entries[0].item == items[0]);
  CHECK(tied.entries[1].item == items[1]);

  std::map<EntityId, ReasoningPath> clicked_only{{items[3], make_path({0, 4}, {}, 1, 1)}};
  CHECK(rank_items(g, u, clicked_only, 10).entries.empty());
}

TEST_CASE("narrower beams never add paths") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto w = random_world(seed + 900, 3);
    EnvConfig cfg;
    cfg.alpha = 4;
    Environment env(w.graph, w.table, cfg);
    const PolicyParams params = PolicyParams::random(3, 4, seed);
    Rng rng(seed);
    for (EntityId u : w.graph.entities_of_kind(kinds::kSubscriber)) {
      BeamConfig wide;
      wide.widths = {4, 3, 3};
      BeamConfig narrow = wide;
      narrow.widths[rng.below(3)] -= 1 + static_cast<int>(rng.below(2));
      const auto big = pdr_search(u, params, env, wide);
      const auto small = pdr_search(u, params, env, narrow);
      CHECK(small.paths.size() <= big.paths.size());
      for (const auto& p : small.paths) {
        const bool present = std::any_of(big.paths.begin(), big.paths.end(),
                                         [&](const ReasoningPath& q) { return same_path(p, q); });
        CHECK(present);
      }
    }
  }
}

TEST_CASE("emitted paths validate and probabilities are consistent") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto w = random_world(seed + 1300, 3);
    Environment env(w.graph, w.table, EnvConfig{});
    const PolicyParams params = PolicyParams::random(3, 4, seed);
    for (EntityId u : w.graph.entities_of_kind(kinds::kSubscriber)) {
      const auto c = pdr_search(u, params, env, BeamConfig{});
      for (const auto& p : c.paths) {
        CHECK(w.graph.validate_path(p));
        CHECK(p.entities.front() == u);
        CHECK(p.probability > 0.0);
        CHECK(p.probability <= 1.0);
        const double product =
            std::accumulate(p.step_probs.begin(), p.step_probs.end(), 1.0, std::multiplies<>());
        CHECK(p.probability == product);
        CHECK(p.reward == env.reward(u, p.end()));
      }
      // Siblings from the root share their first-step probability mass.
      std::map<EntityId, double> first;
      for (const auto& p : c.paths) first[p.entities[1]] = p.step_probs[0];
      double mass = 0;
      for (const auto& [e, q] : first) mass += q;
      CHECK(mass <= 1.0 + 1e-12);

      const auto list = recommend(u, params, env, BeamConfig{});
      CHECK(list.entries.size() <= 10);
      for (std::size_t i = 0; i < list.entries.size(); ++i) {
        const auto& e = list.entries[i];
        CHECK(w.graph.validate_path(e.explanation));
        CHECK(e.explanation.end() == e.item);
        CHECK(e.explanation.hops() >= 2);
        CHECK(e.explanation.hops() <= 3);
        if (i > 0) {
          const auto& prev = list.entries[i - 1];
          CHECK((prev.score > e.score || (prev.score == e.score && prev.item < e.item)));
        }
      }
    }
  }
}

TEST_CASE("recommend_all is independent of thread count") {
  auto w = random_world(4242, 4);
  Environment env(w.graph, w.table, EnvConfig{});
  const PolicyParams params = PolicyParams::random(4, 5, 3);
  const auto users = w.graph.entities_of_kind(kinds::kSubscriber);
  const auto one = recommend_all(users, params, env, BeamConfig{}, 1);
  const auto many = recommend_all(users, params, env, BeamConfig{}, 4);
  std::ostringstream a, b;
  write_recommendations_jsonl(a, w.graph, one);
  write_recommendations_jsonl(b, w.graph, many);
  CHECK(a.str() == b.str());
}

TEST_CASE("rendering") {
  Toy toy;
  const KnowledgeGraph& g = toy.graph;
  const EntityId s1 = toy.id(kinds::kSubscriber, "s1");
  const EntityId a1 = toy.id(kinds::kArticle, "a1");
  const EntityId a2 = toy.id(kinds::kArticle, "a2");
  const EntityId savings = toy.id(kinds::kTopic, "savings");
  const RelationId resp = *g.find_relation(relations::kHasResponse);
  const RelationId topic = *g.find_relation(relations::kHasTopic);

  ReasoningPath two_hop;
  two_hop.entities = {s1, a1, a1, savings};
  two_hop.relations = {resp, kStayRelation, topic};
  const RenderedExplanation r2 = render_explanation(g, two_hop);
  CHECK(r2.text == "s1 -has_response-> a1 -has_topic-> savings");
  CHECK(std::count(r2.dot.begin(), r2.dot.end(), '\n') == 2 + 3 + 2 + 1);
  CHECK(r2.dot.find("->") != std::string::npos);
  std::size_t arrows = 0;
  for (std::size_t pos = r2.dot.find(" -> "); pos != std::string::npos;
       pos = r2.dot.find(" -> ", pos + 1)) {
    ++arrows;
  }
  CHECK(arrows == 2);
  CHECK(r2.dot.find("label=\"stay\"") == std::string::npos);

  ReasoningPath three_hop;
  three_hop.entities = {s1, a1, savings, a2};
  three_hop.relations = {resp, topic, g.reverse_of(topic)};
  const RenderedExplanation r3 = render_explanation(g, three_hop);
  CHECK(r3.text + "\n" == read_file(data_path("golden/toy_explanation.txt")));
  CHECK(r3.dot == read_file(data_path("golden/toy_explanation.dot")));
  CHECK(render_explanation(g, three_hop).dot == r3.dot);

  ReasoningPath broken = three_hop;
  broken.relations[1] = resp;
  CHECK_THROWS_AS(render_explanation(g, broken), InputError);
}

TEST_CASE("recommendation lines") {
  Toy toy;
  Environment env(toy.graph, toy.table, EnvConfig{});
  const PolicyParams params = PolicyParams::random(3, 6, 2);
  const EntityId s1 = toy.id(kinds::kSubscriber, "s1");
  BeamConfig beam;
  beam.widths = {5, 5, 5};
  const std::vector<RecommendationList> lists{recommend(s1, params, env, beam)};
  std::ostringstream out;
  write_recommendations_jsonl(out, toy.graph, lists);
  const std::string text = out.str();
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 1);
  const auto row = nlohmann::json::parse(text);
  CHECK(row["user"] == "s1");
  REQUIRE(row["items"].size() == lists[0].entries.size());
  for (std::size_t i = 0; i < lists[0].entries.size(); ++i) {
    const auto& item = row["items"][i];
    const auto& entry = lists[0].entries[i];
    CHECK(item["item"] == toy.graph.key(entry.item));
    CHECK(item["score"].get<double>() == entry.score);
    const auto& path = item["path"];
    CHECK(path.size() == 2 * entry.explanation.hops() + 1);
    CHECK(path[0] == "subscriber:s1");
    CHECK(path.back() == entity_label(toy.graph, entry.item));
  }
}
