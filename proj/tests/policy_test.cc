#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "pathrec/errors.h"
#include "pathrec/fixtures.h"
#include "pathrec/kg_builder.h"
#include "pathrec/policy.h"
#include "test_support.h"

using namespace pathrec;
using pathrec::testing::central_difference;
using pathrec::testing::random_world;
using pathrec::testing::relative_error;

namespace {

// s1 -> a1, s1 -> a2, nothing else. One-dimensional embeddings with
// v_a1 = 1 and every other vector 0; a policy that outputs relu(action)
// then scores the two first moves with logits 1 and 0.
struct TwoChoiceWorld {
  KnowledgeGraph graph;
  EmbeddingTable table;
  EntityId s1, a1, a2;
  RelationId response;

  TwoChoiceWorld() {
    response = graph.register_relation(relations::kHasResponse);
    s1 = graph.register_entity(kinds::kSubscriber, "s1");
    a1 = graph.register_entity(kinds::kArticle, "a1");
    a2 = graph.register_entity(kinds::kArticle, "a2");
    graph.add_triple(s1, response, a1);
    graph.add_triple(s1, response, a2);
    graph.freeze();
    table = EmbeddingTable(ModelKind::kTransE, 1, graph.entity_count(), graph.relation_count());
    table.entity(a1)[0] = 1.0;
  }
};

PolicyParams action_reader() {
  PolicyParams p = PolicyParams::zeros(1, 1);
  p.w1(0, 3) = 1.0;
  p.w2[0] = 1.0;
  return p;
}

Eigen::VectorXd oracle_state(const EmbeddingTable& t, const AgentState& s) {
  const int d = t.dim();
  Eigen::VectorXd out(3 * d);
  for (int j = 0; j < d; ++j) {
    out[j] = t.entity(s.user)[j];
    out[d + j] = t.entity(s.current)[j];
    double sum = 0;
    for (const HistoryStep& h : s.history) {
      sum += t.entity(h.entity)[j];
      if (h.rel != kStayRelation) sum += t.relation(h.rel)[j];
    }
    out[2 * d + j] = s.history.empty() ? 0.0 : sum / static_cast<double>(s.history.size());
  }
  return out;
}

std::vector<Trajectory> sample_many(const PolicyParams& p, const Environment& env, Rng& rng,
                                    int n) {
  std::vector<Trajectory> out;
  const auto users = env.graph().entities_of_kind(kinds::kSubscriber);
  for (int i = 0; i < n; ++i) {
    out.push_back(sample_trajectory(p, env, users[rng.below(users.size())], rng));
  }
  return out;
}

}  // namespace

TEST_CASE("parameter layout") {
  PolicyParams p = PolicyParams::random(3, 5, 11);
  CHECK(p.input_dim() == 12);
  CHECK(p.hidden() == 5);
  CHECK(p.embed_dim() == 3);
  CHECK(p.size() == 5 * 12 + 5 + 5 + 1);
  CHECK(&p[0] == &p.w1(0, 0));
  CHECK(&p[1] == &p.w1(0, 1));
  CHECK(&p[12] == &p.w1(1, 0));
  CHECK(&p[60] == &p.b1[0]);
  CHECK(&p[65] == &p.w2[0]);
  CHECK(&p[70] == &p.b2);
  CHECK_THROWS_AS(p[71], InputError);
  const double in_bound = 1 / std::sqrt(12.0);
  CHECK(p.w1.cwiseAbs().maxCoeff() <= in_bound);
  CHECK(p.w2.cwiseAbs().maxCoeff() <= 1 / std::sqrt(5.0));
  CHECK(p == PolicyParams::random(3, 5, 11));
  CHECK_FALSE(p == PolicyParams::random(3, 5, 12));
}

TEST_CASE("state encoding") {
  auto world = random_world(3, 4);
  Environment env(world.graph, world.table, EnvConfig{});
  const EntityId u = world.graph.entities_of_kind(kinds::kSubscriber)[0];
  const AgentState s0 = env.initial_state(u);
  const Eigen::VectorXd v0 = encode_state(world.table, s0);
  REQUIRE(v0.size() == 12);
  CHECK(v0.segment(0, 4) == world.table.entity(u).transpose());
  CHECK(v0.segment(4, 4) == world.table.entity(u).transpose());
  CHECK(v0.segment(8, 4).isZero());

  const auto actions = env.pruned_actions(s0);
  const AgentState s1 = env.advance(s0, actions[0]);
  const Eigen::VectorXd v1 = encode_state(world.table, s1);
  Eigen::RowVectorXd hop = world.table.entity(u);
  if (!actions[0].is_stay()) hop += world.table.relation(actions[0].rel);
  CHECK((v1.segment(8, 4) - hop.transpose()).norm() < 1e-12);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto w = random_world(seed, 3);
    EnvConfig cfg;
    cfg.history_k = 2;
    Environment e(w.graph, w.table, cfg);
    Rng rng(seed);
    for (EntityId user : w.graph.entities_of_kind(kinds::kSubscriber)) {
      AgentState s = e.initial_state(user);
      for (int t = 0; t < 3; ++t) {
        CHECK((encode_state(w.table, s) - oracle_state(w.table, s)).norm() < 1e-12);
        const auto acts = e.pruned_actions(s);
        s = e.advance(s, acts[rng.below(acts.size())]);
      }
    }
  }
}

TEST_CASE("action encoding") {
  TwoChoiceWorld w;
  CHECK(encode_action(w.table, {w.response, w.a1, 0})[0] == 1.0);
  w.table.relation(w.response)[0] = 0.25;
  CHECK(encode_action(w.table, {w.response, w.a1, 0})[0] == 1.25);
  CHECK(encode_action(w.table, {kStayRelation, w.a1, 0})[0] == 1.0);
}

TEST_CASE("action distribution") {
  TwoChoiceWorld w;
  Environment env(w.graph, w.table, EnvConfig{});
  const AgentState s0 = env.initial_state(w.s1);
  const PolicyParams p = action_reader();

  const std::vector<ActionChoice> two{{w.response, w.a1, 0}, {w.response, w.a2, 0}};
  const auto probs = action_distribution(p, w.table, s0, two);
  CHECK(probs[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(probs[1] == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(probs[0] == doctest::Approx(1 / (1 + std::exp(-1.0))).epsilon(1e-12));

  CHECK(action_distribution(p, w.table, s0, std::vector<ActionChoice>{two[1]}) ==
        std::vector<double>{1.0});
  const std::vector<ActionChoice> same{two[1], two[1]};
  const auto half = action_distribution(p, w.table, s0, same);
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  CHECK_THROWS_AS(action_distribution(p, w.table, s0, std::vector<ActionChoice>{}),
                  ContractError);
  CHECK_THROWS_AS(action_distribution(PolicyParams::zeros(2, 1), w.table, s0, two), InputError);
}

TEST_CASE("distribution properties on random states") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto w = random_world(seed, 3);
    Environment env(w.graph, w.table, EnvConfig{});
    PolicyParams p = PolicyParams::random(3, 6, seed);
    Rng rng(seed);
    for (EntityId u : w.graph.entities_of_kind(kinds::kSubscriber)) {
      AgentState s = env.initial_state(u);
      for (int t = 0; t < 3; ++t) {
        const auto acts = env.pruned_actions(s);
        const auto probs = action_distribution(p, w.table, s, acts);
        const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
        CHECK(std::abs(total - 1.0) < 1e-9);
        for (double q : probs) {
          CHECK(q > 0.0);
          CHECK(q <= 1.0);
        }
        // Shifting every logit by the same amount changes nothing.
        PolicyParams shifted = p;
        shifted.b2 += 3.7;
        const auto probs2 = action_distribution(shifted, w.table, s, acts);
        for (std::size_t j = 0; j < probs.size(); ++j) CHECK(std::abs(probs[j] - probs2[j]) < 1e-12);
        s = env.advance(s, acts[rng.below(acts.size())]);
      }
    }
  }
}

TEST_CASE("sampling matches the softmax") {
  TwoChoiceWorld w;
  EnvConfig cfg;
  cfg.horizon = cfg.max_hops = 2;
  Environment env(w.graph, w.table, cfg);
  const PolicyParams p = action_reader();
  Rng rng(2024);
  int first = 0;
  constexpr int kSamples = 10000;
  for (int i = 0; i < kSamples; ++i) {
    const Trajectory t = sample_trajectory(p, env, w.s1, rng);
    if (t.action(0).target == w.a1) ++first;
  }
  CHECK(std::abs(first / double(kSamples) - 0.7311) < 0.02);
}

TEST_CASE("trajectories are consistent and reproducible") {
  auto w = random_world(8, 4);
  Environment env(w.graph, w.table, EnvConfig{});
  const PolicyParams p = PolicyParams::random(4, 8, 1);
  for (EntityId u : w.graph.entities_of_kind(kinds::kSubscriber)) {
    Rng a(42), b(42);
    const Trajectory t1 = sample_trajectory(p, env, u, a);
    const Trajectory t2 = sample_trajectory(p, env, u, b);
    CHECK(t1.states == t2.states);
    CHECK(t1.chosen == t2.chosen);
    CHECK(t1.reward == t2.reward);
    REQUIRE(t1.states.size() == 4);
    CHECK(t1.candidates.size() == 3);
    CHECK(t1.log_probs.size() == 3);
    for (double lp : t1.log_probs) CHECK(lp <= 0.0);
    CHECK(t1.reward >= 0.0);
    CHECK(t1.reward <= 1.0);
    CHECK(t1.reward == env.terminal_reward(t1.states.back()));
  }
}

TEST_CASE("a chain is followed with probability one") {
  KnowledgeGraph g;
  const RelationId resp = g.register_relation(relations::kHasResponse);
  const RelationId topic = g.register_relation(relations::kHasTopic);
  const EntityId s = g.register_entity(kinds::kSubscriber, "s");
  const EntityId a = g.register_entity(kinds::kArticle, "a");
  const EntityId t = g.register_entity(kinds::kTopic, "t");
  g.add_triple(s, resp, a);
  g.add_triple(a, topic, t);
  g.freeze();
  EmbeddingTable table(ModelKind::kTransE, 2, g.entity_count(), g.relation_count());
  Environment env(g, table, EnvConfig{});
  Rng rng(5);
  const Trajectory tr = sample_trajectory(PolicyParams::random(2, 4, 3), env, s, rng);
  CHECK(tr.action(0).target == a);
  CHECK(tr.action(1).target == t);
  CHECK(tr.action(2).is_stay());
  for (double lp : tr.log_probs) CHECK(lp == 0.0);
  CHECK(tr.reward == 0.0);
}

TEST_CASE("zero reward gives a zero gradient") {
  auto w = random_world(4, 3);
  Environment env(w.graph, w.table, EnvConfig{});
  const PolicyParams p = PolicyParams::random(3, 5, 2);
  Rng rng(1);
  auto trajs = sample_many(p, env, rng, 8);
  for (auto& t : trajs) t.reward = 0.0;
  const PolicyParams g = reinforce_gradient(p, w.table, trajs);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
  CHECK_THROWS_AS(reinforce_gradient(p, w.table, std::vector<Trajectory>{}), ContractError);
}

TEST_CASE("single binary choice gradient matches finite differences") {
  TwoChoiceWorld w;
  EnvConfig cfg;
  cfg.horizon = cfg.max_hops = 2;
  Environment env(w.graph, w.table, cfg);
  PolicyParams p = PolicyParams::random(1, 3, 9);
  Rng rng(3);
  std::vector<Trajectory> one{sample_trajectory(p, env, w.s1, rng)};
  one[0].reward = 0.8;
  const PolicyParams g = reinforce_gradient(p, w.table, one);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double fd = central_difference(&p[i], 1e-5,
                                         [&] { return reinforce_objective(p, w.table, one); });
    CHECK(relative_error(g[i], fd) < 1e-4);
  }
}

TEST_CASE("gradient matches finite differences on random instances") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const int dim = 1 + static_cast<int>(seed % 4);
    auto w = random_world(seed + 100, dim, 40);
    Environment env(w.graph, w.table, EnvConfig{});
    PolicyParams p = PolicyParams::random(dim, 4, seed);
    Rng rng(seed);
    auto trajs = sample_many(p, env, rng, 3);
    for (auto& t : trajs) t.reward = rng.uniform(0.1, 1.0);
    const PolicyParams g = reinforce_gradient(p, w.table, trajs);
    for (int c = 0; c < 20; ++c) {
      const std::size_t i = rng.below(p.size());
      const double fd = central_difference(
          &p[i], 1e-5, [&] { return reinforce_objective(p, w.table, trajs); });
      CHECK_MESSAGE(relative_error(g[i], fd) < 1e-4, "seed ", seed, " coordinate ", i);
      ++checked;
    }
  }
  CHECK(checked == 500);
}

TEST_CASE("duplicating trajectories leaves the mean gradient unchanged") {
  auto w = random_world(6, 3);
  Environment env(w.graph, w.table, EnvConfig{});
  const PolicyParams p = PolicyParams::random(3, 5, 4);
  Rng rng(6);
  auto trajs = sample_many(p, env, rng, 5);
  for (auto& t : trajs) t.reward = 0.5;
  auto doubled = trajs;
  doubled.insert(doubled.end(), trajs.begin(), trajs.end());
  const PolicyParams g1 = reinforce_gradient(p, w.table, trajs);
  const PolicyParams g2 = reinforce_gradient(p, w.table, doubled);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
}

TEST_CASE("training contracts") {
  auto w = random_world(12, 4);
  Environment env(w.graph, w.table, EnvConfig{});
  PolicyTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 5;
  cfg.batch_size = 2;
  cfg.seed = 77;

  SUBCASE("zero learning rate keeps the initial parameters") {
    cfg.learning_rate = 0.0;
    const TrainedPolicy t = train_policy(env, cfg);
    CHECK(t.params == PolicyParams::random(4, 8, derive_seed(77, "policy-init")));
    CHECK(t.log.size() == 5);
  }
  SUBCASE("same seed, any thread count, identical result") {
    cfg.learning_rate = 0.05;
    const TrainedPolicy a = train_policy(env, cfg);
    cfg.threads = 4;
    const TrainedPolicy b = train_policy(env, cfg);
    CHECK(a.params == b.params);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
      CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
      CHECK(a.log[i].mean_entropy == b.log[i].mean_entropy);
    }
    CHECK(a.params.all_finite());
  }
  SUBCASE("no trainable users") {
    KnowledgeGraph g;
    g.register_relation(relations::kHasResponse);
    g.register_entity(kinds::kSubscriber, "s");
    g.freeze();
    EmbeddingTable t(ModelKind::kTransE, 4, 1, 2);
    Environment empty(g, t, EnvConfig{});
    CHECK_THROWS_AS(train_policy(empty, cfg), InputError);
  }
}

TEST_CASE("training raises reward on a planted fixture") {
  const PlantedFixture fx = generate_planted_fixture(7, 20, 16, 4);
  const CkgBuild ckg = build_ckg(fx.interactions, fx.articles, 5);
  EmbeddingConfig ec;
  ec.dim = 16;
  ec.epochs = 300;
  ec.learning_rate = 0.05;
  ec.batch_size = 64;
  ec.seed = 7;
  const TrainedEmbeddings emb = train_embeddings(ckg.graph, ec);
  Environment env(ckg.graph, emb.table, EnvConfig{});
  PolicyTrainConfig pc;
  pc.seed = 7;
  const TrainedPolicy trained = train_policy(env, pc);
  REQUIRE(trained.log.size() == 200);
  MESSAGE("epoch 0 reward ", trained.log.front().mean_reward, ", final ",
          trained.log.back().mean_reward);
  CHECK(trained.log.back().mean_reward > trained.log.front().mean_reward);
}

TEST_CASE("policy file round trip") {
  const PolicyParams p = PolicyParams::random(3, 4, 8);
  std::stringstream buf;
  write_policy(p, buf);
  CHECK(read_policy(buf) == p);

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_policy(bad), InputError);
  std::string bytes;
  {
    std::stringstream full;
    write_policy(p, full);
    bytes = full.str();
  }
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_policy(truncated), InputError);
}

TEST_CASE("log and trace formatting") {
  std::ostringstream log;
  const std::vector<EpochStats> stats{{0, 0.5, 1.25}, {1, 0.75, 1.0}};
  write_training_log(log, stats);
  CHECK(log.str() == "0\t0.5\t1.25\n1\t0.75\t1\n");

  TwoChoiceWorld w;
  EnvConfig cfg;
  cfg.horizon = cfg.max_hops = 2;
  Environment env(w.graph, w.table, cfg);
  Rng rng(1);
  const Trajectory t = sample_trajectory(action_reader(), env, w.s1, rng);
  const std::string line = format_trajectory(w.graph, t);
  CHECK(line.rfind("s1\ts1 -has_response-> a", 0) == 0);
  CHECK(line.find(" -stay-> ") != std::string::npos);
}
