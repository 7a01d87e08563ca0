#ifndef PATHREC_FIXTURES_H_
#define PATHREC_FIXTURES_H_

#include <cstdint>
#include <vector>

#include "pathrec/graph.h"
#include "pathrec/kg_builder.h"

namespace pathrec {

// Three communities of ten "node" entities; 15 intra-community triples each
// over relations r0..r2 chosen at random. Forward edges only, frozen.
KnowledgeGraph generate_community_graph(std::uint64_t seed);

struct PlantedFixture {
  std::vector<InteractionRow> interactions;
  std::vector<ArticleRecord> articles;
  std::vector<int> user_topic;     // latent primary topic per user index
  std::vector<int> article_topic;  // topic per article index
};

// Desk-scale substrate with planted preferences: every article belongs to one
// topic, every user to one primary topic, and users click mostly within their
// topic so that same-topic articles co-occur. Deterministic per seed.
PlantedFixture generate_planted_fixture(std::uint64_t seed, int n_users = 50,
                                        int n_items = 40, int n_topics = 4);

}  // namespace pathrec

#endif  // PATHREC_FIXTURES_H_
