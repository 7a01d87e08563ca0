#include "pathrec/baselines.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "pathrec/errors.h"
#include "pathrec/rng.h"

namespace pathrec {
namespace {

int index_of(const std::vector<std::string>& sorted, const std::string& key) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), key);
  if (it == sorted.end() || *it != key) return -1;
  return static_cast<int>(it - sorted.begin());
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

ImplicitFeedback::ImplicitFeedback(std::span<const InteractionRow> train,
                                   std::span<const std::string> catalog) {
  std::set<std::string> items(catalog.begin(), catalog.end());
  std::set<std::string> users;
  for (const InteractionRow& r : train) {
    if (r.response != Response::kClick) continue;
    items.insert(r.article_key);
    users.insert(r.subscriber_key);
  }
  items_.assign(items.begin(), items.end());
  users_.assign(users.begin(), users.end());
  clicked_.resize(users_.size());
  popularity_.assign(items_.size(), 0);
  for (const InteractionRow& r : train) {
    if (r.response != Response::kClick) continue;
    auto& row = clicked_[static_cast<std::size_t>(user_index(r.subscriber_key))];
    const auto item = static_cast<std::uint32_t>(item_index(r.article_key));
    const auto it = std::lower_bound(row.begin(), row.end(), item);
    if (it != row.end() && *it == item) continue;
    row.insert(it, item);
    ++popularity_[item];
  }
}

int ImplicitFeedback::user_index(const std::string& key) const { return index_of(users_, key); }
int ImplicitFeedback::item_index(const std::string& key) const { return index_of(items_, key); }

bool ImplicitFeedback::has_click(std::size_t u, std::uint32_t item) const {
  return std::binary_search(clicked_[u].begin(), clicked_[u].end(), item);
}

std::size_t ImplicitFeedback::click_count() const {
  return std::accumulate(popularity_.begin(), popularity_.end(), std::size_t{0});
}

Ranking rank_by_score(const ImplicitFeedback& data, const std::string& user,
                      std::span<const double> scores, std::size_t n) {
  const int u = data.user_index(user);
  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < data.item_count(); ++i) {
    if (u >= 0 && data.has_click(static_cast<std::size_t>(u), i)) continue;
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  Ranking out;
  for (std::size_t i = 0; i < std::min(n, order.size()); ++i) out.push_back(data.items()[order[i]]);
  return out;
}

Ranking popularity_recommend(const ImplicitFeedback& data, const std::string& user,
                             std::size_t n) {
  std::vector<double> scores(data.popularity().begin(), data.popularity().end());
  return rank_by_score(data, user, scores, n);
}

Ranking random_recommend(const ImplicitFeedback& data, const std::string& user, std::size_t n,
                         std::uint64_t seed) {
  const int u = data.user_index(user);
  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < data.item_count(); ++i) {
    if (u >= 0 && data.has_click(static_cast<std::size_t>(u), i)) continue;
    order.push_back(i);
  }
  Rng rng(derive_seed(seed, user));
  rng.shuffle(order);
  Ranking out;
  for (std::size_t i = 0; i < std::min(n, order.size()); ++i) out.push_back(data.items()[order[i]]);
  return out;
}

BprModel bpr_train(const ImplicitFeedback& data, const BprConfig& config) {
  if (config.factors < 1 || config.epochs < 0) throw InputError("invalid BPR config");
  if (data.click_count() == 0) throw InputError("BPR needs at least one click");
  Rng rng(derive_seed(config.seed, "bpr"));
  BprModel m;
  m.user_factors.resize(static_cast<Eigen::Index>(data.user_count()), config.factors);
  m.item_factors.resize(static_cast<Eigen::Index>(data.item_count()), config.factors);
  for (Eigen::Index i = 0; i < m.user_factors.size(); ++i) {
    m.user_factors.data()[i] = rng.uniform(-config.init_scale, config.init_scale);
  }
  for (Eigen::Index i = 0; i < m.item_factors.size(); ++i) {
    m.item_factors.data()[i] = rng.uniform(-config.init_scale, config.init_scale);
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> clicks;
  for (std::size_t u = 0; u < data.user_count(); ++u) {
    for (std::uint32_t i : data.clicked(u)) clicks.emplace_back(static_cast<std::uint32_t>(u), i);
  }
  const double lr = config.learning_rate;
  const double reg = config.regularization;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t s = 0; s < clicks.size(); ++s) {
      const auto [u, i] = clicks[rng.below(clicks.size())];
      if (data.clicked(u).size() == data.item_count()) continue;
      std::uint32_t j = 0;
      do {
        j = static_cast<std::uint32_t>(rng.below(data.item_count()));
      } while (data.has_click(u, j));
      auto pu = m.user_factors.row(u);
      auto qi = m.item_factors.row(i);
      auto qj = m.item_factors.row(j);
      const double g = 1.0 - sigmoid(pu.dot(qi) - pu.dot(qj));
      const Eigen::RowVectorXd pu_old = pu;
      pu += lr * (g * (qi - qj) - reg * pu);
      qi += lr * (g * pu_old - reg * qi);
      qj += lr * (-g * pu_old - reg * qj);
    }
  }
  return m;
}

Ranking bpr_recommend(const BprModel& model, const ImplicitFeedback& data,
                      const std::string& user, std::size_t n) {
  const int u = data.user_index(user);
  if (u < 0) return popularity_recommend(data, user, n);
  const Eigen::VectorXd scores = model.item_factors * model.user_factors.row(u).transpose();
  return rank_by_score(data, user, std::span<const double>(scores.data(), scores.size()), n);
}

ItemKnn::ItemKnn(const ImplicitFeedback& data) : data_(&data) {
  const auto n = static_cast<Eigen::Index>(data.item_count());
  RowMatrix co = RowMatrix::Zero(n, n);
  for (std::size_t u = 0; u < data.user_count(); ++u) {
    for (std::uint32_t a : data.clicked(u)) {
      for (std::uint32_t b : data.clicked(u)) co(a, b) += 1.0;
    }
  }
  cosine_ = RowMatrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const double denom = std::sqrt(co(a, a) * co(b, b));
      if (denom > 0) cosine_(a, b) = co(a, b) / denom;
    }
  }
}

double ItemKnn::similarity(std::uint32_t a, std::uint32_t b) const { return cosine_(a, b); }

std::vector<double> ItemKnn::scores(const std::string& user) const {
  const int u = data_->user_index(user);
  if (u < 0) return {};
  std::vector<double> out(data_->item_count(), 0.0);
  for (std::uint32_t j : data_->clicked(static_cast<std::size_t>(u))) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += cosine_(static_cast<Eigen::Index>(i), j);
  }
  return out;
}

Ranking ItemKnn::recommend(const std::string& user, std::size_t n) const {
  std::vector<double> s = scores(user);
  if (s.empty()) s.assign(data_->item_count(), 0.0);
  return rank_by_score(*data_, user, s, n);
}

}  // namespace pathrec
