#ifndef PATHREC_EVAL_H_
#define PATHREC_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pathrec/kg_builder.h"

namespace pathrec {

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 1;
};

struct InteractionSplit {
  std::vector<InteractionRow> train;
  std::vector<InteractionRow> test;
};

// Splits each user's distinct clicked articles; llround(fraction * n) of them
// (at least one) stay in train. Every row of a held-out (user, article) pair
// goes to test, everything else to train, preserving input order.
InteractionSplit split_interactions(std::span<const InteractionRow> rows, const SplitSpec& spec);

// Held-out clicked articles per user key.
std::map<std::string, std::set<std::string>> relevant_items(
    std::span<const InteractionRow> test_rows);

using Ranking = std::vector<std::string>;
using ItemSet = std::set<std::string>;

// |top-k intersect relevant| / k. Throws InputError for k < 1.
double precision_at_k(const Ranking& ranked, const ItemSet& relevant, std::size_t k);
// |top-k intersect relevant| / |relevant|. Throws InputError for k < 1 and
// ContractError for an empty relevant set.
double recall_at_k(const Ranking& ranked, const ItemSet& relevant, std::size_t k);
// Sum of precision@i over relevant hits at rank i <= k, divided by
// min(k, |relevant|). Zero for an empty relevant set.
double average_precision_at_k(const Ranking& ranked, const ItemSet& relevant, std::size_t k);
// Mean AP@k over users with a nonempty relevant set; 0 when there are none.
double map_at_k(std::span<const Ranking> ranked, std::span<const ItemSet> relevant,
                std::size_t k);

struct UserMetrics {
  std::string user;
  std::size_t relevant = 0;
  double average_precision = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct MetricReport {
  std::size_t k = 10;
  double map = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<UserMetrics> per_user;  // sorted by user key
};

// Scores every user with at least one relevant item; a user missing from
// `rankings` counts as an empty ranking.
MetricReport evaluate_rankings(const std::map<std::string, Ranking>& rankings,
                               const std::map<std::string, ItemSet>& relevant, std::size_t k);

// {"models": [{"model", "k", "map", "precision", "recall", "per_user": [...]}]}
void write_metric_json(std::ostream& out,
                       std::span<const std::pair<std::string, MetricReport>> reports);
// Fixed-width table with columns Model, MAP@K=k, Precision@K=k, Recall@K=k.
std::string format_metric_table(std::span<const std::pair<std::string, MetricReport>> reports);

}  // namespace pathrec

#endif  // PATHREC_EVAL_H_
