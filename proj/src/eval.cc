#include "pathrec/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "json.hpp"
#include "pathrec/errors.h"
#include "pathrec/rng.h"

namespace pathrec {
namespace {

std::size_t hits_in_top(const Ranking& ranked, const ItemSet& relevant, std::size_t k) {
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) hits += relevant.count(ranked[i]);
  return hits;
}

void require_k(std::size_t k) {
  if (k < 1) throw InputError("k must be at least 1");
}

std::string fixed(double v, int places) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

}  // namespace

InteractionSplit split_interactions(std::span<const InteractionRow> rows, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw InputError("split.train_fraction must lie in (0, 1]");
  }
  std::map<std::string, std::vector<std::string>> clicked;  // user -> distinct articles
  for (const InteractionRow& r : rows) {
    if (r.response != Response::kClick) continue;
    auto& items = clicked[r.subscriber_key];
    if (std::find(items.begin(), items.end(), r.article_key) == items.end()) {
      items.push_back(r.article_key);
    }
  }
  std::set<std::pair<std::string, std::string>> held_out;
  for (auto& [user, items] : clicked) {
    std::sort(items.begin(), items.end());
    Rng rng(derive_seed(spec.seed, user));
    rng.shuffle(items);
    const auto n = static_cast<double>(items.size());
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(spec.train_fraction * n)));
    for (std::size_t i = keep; i < items.size(); ++i) held_out.emplace(user, items[i]);
  }
  InteractionSplit out;
  for (const InteractionRow& r : rows) {
    if (held_out.count({r.subscriber_key, r.article_key})) {
      out.test.push_back(r);
    } else {
      out.train.push_back(r);
    }
  }
  return out;
}

std::map<std::string, std::set<std::string>> relevant_items(
    std::span<const InteractionRow> test_rows) {
  std::map<std::string, std::set<std::string>> out;
  for (const InteractionRow& r : test_rows) {
    if (r.response == Response::kClick) out[r.subscriber_key].insert(r.article_key);
  }
  return out;
}

double precision_at_k(const Ranking& ranked, const ItemSet& relevant, std::size_t k) {
  require_k(k);
  return static_cast<double>(hits_in_top(ranked, relevant, k)) / static_cast<double>(k);
}

double recall_at_k(const Ranking& ranked, const ItemSet& relevant, std::size_t k) {
  require_k(k);
  if (relevant.empty()) throw ContractError("recall@k needs a nonempty relevant set");
  return static_cast<double>(hits_in_top(ranked, relevant, k)) /
         static_cast<double>(relevant.size());
}

double average_precision_at_k(const Ranking& ranked, const ItemSet& relevant, std::size_t k) {
  require_k(k);
  if (relevant.empty()) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!relevant.count(ranked[i])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(std::min(k, relevant.size()));
}

double map_at_k(std::span<const Ranking> ranked, std::span<const ItemSet> relevant,
                std::size_t k) {
  require_k(k);
  if (ranked.size() != relevant.size()) {
    throw InputError("map@k needs one relevant set per ranking");
  }
  double sum = 0.0;
  std::size_t users = 0;
  for (std::size_t u = 0; u < ranked.size(); ++u) {
    if (relevant[u].empty()) continue;
    sum += average_precision_at_k(ranked[u], relevant[u], k);
    ++users;
  }
  return users ? sum / static_cast<double>(users) : 0.0;
}

MetricReport evaluate_rankings(const std::map<std::string, Ranking>& rankings,
                               const std::map<std::string, ItemSet>& relevant, std::size_t k) {
  require_k(k);
  MetricReport report;
  report.k = k;
  const Ranking empty;
  for (const auto& [user, items] : relevant) {
    if (items.empty()) continue;
    const auto it = rankings.find(user);
    const Ranking& ranked = it == rankings.end() ? empty : it->second;
    UserMetrics m;
    m.user = user;
    m.relevant = items.size();
    m.average_precision = average_precision_at_k(ranked, items, k);
    m.precision = precision_at_k(ranked, items, k);
    m.recall = recall_at_k(ranked, items, k);
    report.map += m.average_precision;
    report.precision += m.precision;
    report.recall += m.recall;
    report.per_user.push_back(std::move(m));
  }
  if (!report.per_user.empty()) {
    const auto n = static_cast<double>(report.per_user.size());
    report.map /= n;
    report.precision /= n;
    report.recall /= n;
  }
  return report;
}

void write_metric_json(std::ostream& out,
                       std::span<const std::pair<std::string, MetricReport>> reports) {
  nlohmann::ordered_json doc;
  doc["models"] = nlohmann::ordered_json::array();
  for (const auto& [name, r] : reports) {
    nlohmann::ordered_json m;
    m["model"] = name;
    m["k"] = r.k;
    m["map"] = r.map;
    m["precision"] = r.precision;
    m["recall"] = r.recall;
    m["per_user"] = nlohmann::ordered_json::array();
    for (const UserMetrics& u : r.per_user) {
      m["per_user"].push_back({{"user", u.user},
                               {"relevant", u.relevant},
                               {"ap", u.average_precision},
                               {"precision", u.precision},
                               {"recall", u.recall}});
    }
    doc["models"].push_back(std::move(m));
  }
  out << doc.dump(2) << '\n';
}

std::string format_metric_table(std::span<const std::pair<std::string, MetricReport>> reports) {
  const std::size_t k = reports.empty() ? 10 : reports.front().second.k;
  const std::string ks = std::to_string(k);
  std::size_t name_width = 5;
  for (const auto& [name, r] : reports) name_width = std::max(name_width, name.size());
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const std::string h1 = "MAP@K=" + ks;
  const std::string h2 = "Precision@K=" + ks;
  const std::string h3 = "Recall@K=" + ks;
  std::string out = pad("Model", name_width) + "  " + pad(h1, 10) + "  " + pad(h2, 14) + "  " +
                    h3 + "\n";
  for (const auto& [name, r] : reports) {
    out += pad(name, name_width) + "  " + pad(fixed(r.map, 5), 10) + "  " +
           pad(fixed(r.precision, 5), 14) + "  " + fixed(r.recall, 5) + "\n";
  }
  return out;
}

}  // namespace pathrec
