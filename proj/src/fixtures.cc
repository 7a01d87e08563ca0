#include "pathrec/fixtures.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>
#include <string_view>

#include "pathrec/errors.h"
#include "pathrec/rng.h"

namespace pathrec {

KnowledgeGraph generate_community_graph(std::uint64_t seed) {
  constexpr int kCommunities = 3;
  constexpr int kMembers = 10;
  constexpr int kTriplesPerCommunity = 15;
  Rng rng(seed);
  KnowledgeGraph g;
  std::vector<RelationId> rels;
  for (int r = 0; r < 3; ++r) rels.push_back(g.register_relation("r" + std::to_string(r)));
  for (int e = 0; e < kCommunities * kMembers; ++e) {
    g.register_entity("node", "c" + std::to_string(e / kMembers) + "_" + std::to_string(e));
  }
  for (int c = 0; c < kCommunities; ++c) {
    int added = 0;
    while (added < kTriplesPerCommunity) {
      const auto h = static_cast<std::uint32_t>(c * kMembers + rng.below(kMembers));
      const auto t = static_cast<std::uint32_t>(c * kMembers + rng.below(kMembers));
      const RelationId r = rels[rng.below(rels.size())];
      if (h == t || g.has_triple(EntityId{h}, r, EntityId{t})) continue;
      g.add_triple(EntityId{h}, r, EntityId{t});
      ++added;
    }
  }
  g.freeze();
  return g;
}

namespace {

std::string padded(std::string_view prefix, int i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  }
  return std::string(prefix) + digits;
}

int digits_for(int n) { return static_cast<int>(std::to_string(std::max(n - 1, 0)).size()); }

// Draws `count` distinct entries of `pool` without replacement.
std::vector<int> sample_distinct(Rng& rng, std::vector<int> pool, std::size_t count) {
  rng.shuffle(pool);
  pool.resize(std::min(count, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

PlantedFixture generate_planted_fixture(std::uint64_t seed, int n_users, int n_items,
                                        int n_topics) {
  if (n_users < 2 || n_items < 2 || n_topics < 1 || n_topics > n_items) {
    throw InputError("planted fixture needs n_users >= 2, n_items >= 2, 1 <= n_topics <= n_items");
  }
  constexpr int kProducts = 3;
  constexpr int kTopicWords = 6;
  constexpr int kWordsPerText = 12;
  static constexpr std::string_view kGenericWords[] = {
      "account", "update", "guide", "customer", "service", "online", "review", "plan"};

  Rng rng(derive_seed(seed, "planted"));
  PlantedFixture fx;
  const int item_width = digits_for(n_items);
  const int user_width = digits_for(n_users);

  std::vector<std::vector<int>> by_topic(static_cast<std::size_t>(n_topics));
  for (int i = 0; i < n_items; ++i) {
    const int topic = i % n_topics;
    fx.article_topic.push_back(topic);
    by_topic[static_cast<std::size_t>(topic)].push_back(i);

    ArticleRecord a;
    a.article_key = padded("a", i, item_width);
    a.topics = {"topic" + std::to_string(topic)};
    a.topic_tags = {"ttag" + std::to_string(topic)};
    // Products and product tags cut across topics.
    a.products = {"product" + std::to_string(rng.below(kProducts))};
    a.product_tags = {"ptag" + std::to_string(rng.below(kProducts))};
    std::string text;
    for (int w = 0; w < kWordsPerText; ++w) {
      if (!text.empty()) text += ' ';
      if (rng.uniform() < 0.6) {
        text += "topic" + std::to_string(topic) + "word" + std::to_string(rng.below(kTopicWords));
      } else {
        text += kGenericWords[rng.below(std::size(kGenericWords))];
      }
    }
    a.text = std::move(text);
    fx.articles.push_back(std::move(a));
  }

  std::vector<int> all_items(static_cast<std::size_t>(n_items));
  for (int i = 0; i < n_items; ++i) all_items[static_cast<std::size_t>(i)] = i;

  int day = 0;
  auto timestamp = [&day]() {
    const int d = day++ % 28;
    return std::string("2021-03-") + (d < 9 ? "0" : "") + std::to_string(d + 1);
  };

  for (int u = 0; u < n_users; ++u) {
    const int topic = u % n_topics;
    fx.user_topic.push_back(topic);
    const std::string user_key = padded("s", u, user_width);
    const auto& own = by_topic[static_cast<std::size_t>(topic)];

    // Most of the own topic, at least one item.
    const auto n_own = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(own.size()))));
    std::vector<int> clicks = sample_distinct(rng, own, n_own);

    std::vector<int> others;
    for (int i : all_items) {
      if (fx.article_topic[static_cast<std::size_t>(i)] != topic) others.push_back(i);
    }
    if (!others.empty() && rng.uniform() < 0.5) {
      clicks.push_back(others[rng.below(others.size())]);
    }
    for (int i : clicks) {
      fx.interactions.push_back(
          {user_key, fx.articles[static_cast<std::size_t>(i)].article_key, Response::kClick,
           timestamp()});
    }
    for (int i : sample_distinct(rng, others, 3)) {
      if (std::find(clicks.begin(), clicks.end(), i) != clicks.end()) continue;
      fx.interactions.push_back(
          {user_key, fx.articles[static_cast<std::size_t>(i)].article_key, Response::kNoClick,
           timestamp()});
    }
  }
  return fx;
}

}  // namespace pathrec
