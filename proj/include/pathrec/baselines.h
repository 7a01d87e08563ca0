#ifndef PATHREC_BASELINES_H_
#define PATHREC_BASELINES_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathrec/eval.h"
#include "pathrec/embeddings.h"
#include "pathrec/kg_builder.h"

namespace pathrec {

// Binary user x item click matrix over sorted user and item keys.
class ImplicitFeedback {
 public:
  // Items are the union of `catalog` and every clicked article; users are the
  // subscribers with at least one click. Non-click rows are ignored.
  ImplicitFeedback(std::span<const InteractionRow> train,
                   std::span<const std::string> catalog);

  const std::vector<std::string>& users() const { return users_; }
  const std::vector<std::string>& items() const { return items_; }
  std::size_t user_count() const { return users_.size(); }
  std::size_t item_count() const { return items_.size(); }

  // -1 when absent.
  int user_index(const std::string& key) const;
  int item_index(const std::string& key) const;
  // Sorted item indices clicked by user u.
  const std::vector<std::uint32_t>& clicked(std::size_t u) const { return clicked_[u]; }
  bool has_click(std::size_t u, std::uint32_t item) const;
  const std::vector<std::size_t>& popularity() const { return popularity_; }
  std::size_t click_count() const;

 private:
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::vector<std::vector<std::uint32_t>> clicked_;
  std::vector<std::size_t> popularity_;  // clicks per item
};

// Items by score descending, ties by item index; excludes the user's clicks.
Ranking rank_by_score(const ImplicitFeedback& data, const std::string& user,
                      std::span<const double> scores, std::size_t n);

// Click count descending, ties by item key.
Ranking popularity_recommend(const ImplicitFeedback& data, const std::string& user,
                             std::size_t n);
// Unclicked items in an order drawn from (seed, user key).
Ranking random_recommend(const ImplicitFeedback& data, const std::string& user, std::size_t n,
                         std::uint64_t seed);

struct BprConfig {
  int factors = 16;
  int epochs = 50;
  double learning_rate = 0.05;
  double regularization = 0.01;
  double init_scale = 0.1;
  std::uint64_t seed = 1;
};

struct BprModel {
  RowMatrix user_factors;  // users x factors
  RowMatrix item_factors;  // items x factors
};

// SGD on -ln sigmoid(x_ui - x_uj) + reg * (|p_u|^2 + |q_i|^2 + |q_j|^2) over
// sampled (user, clicked, unclicked) triples; one epoch draws as many
// triples as there are clicks. Throws InputError without clicks.
BprModel bpr_train(const ImplicitFeedback& data, const BprConfig& config);
// Unclicked items by dot product; users absent from training fall back to
// popularity order.
Ranking bpr_recommend(const BprModel& model, const ImplicitFeedback& data,
                      const std::string& user, std::size_t n);

// Item-item cosine over the binary click matrix.
class ItemKnn {
 public:
  explicit ItemKnn(const ImplicitFeedback& data);

  double similarity(std::uint32_t a, std::uint32_t b) const;
  // score(u, i) = sum over clicked j of cos(i, j); empty for unknown users.
  std::vector<double> scores(const std::string& user) const;
  Ranking recommend(const std::string& user, std::size_t n) const;

 private:
  const ImplicitFeedback* data_;
  RowMatrix cosine_;
};

}  // namespace pathrec

#endif  // PATHREC_BASELINES_H_
