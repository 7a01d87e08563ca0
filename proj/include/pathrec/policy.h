#ifndef PATHREC_POLICY_H_
#define PATHREC_POLICY_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pathrec/embeddings.h"
#include "pathrec/env.h"
#include "pathrec/rng.h"

namespace pathrec {

// Two-layer scorer: logit(s, a) = w2 . relu(W1 [state(s); action(a)] + b1) + b2.
// The state block is 3*dim wide and the action block dim wide.
struct PolicyParams {
  RowMatrix w1;         // hidden x input
  Eigen::VectorXd b1;   // hidden
  Eigen::VectorXd w2;   // hidden
  double b2 = 0.0;

  static PolicyParams zeros(int embed_dim, int hidden);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
  static PolicyParams random(int embed_dim, int hidden, std::uint64_t seed);

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int embed_dim() const { return input_dim() / 4; }

  // Flat view over every scalar, in the order W1 (row-major), b1, w2, b2.
  std::size_t size() const;
  double& operator[](std::size_t i);
  double operator[](std::size_t i) const;

  PolicyParams zeros_like() const { return zeros(embed_dim(), hidden()); }
  void add_scaled(const PolicyParams& other, double scale);
  bool all_finite() const;
  bool operator==(const PolicyParams& other) const;
};

// [v_user ; v_current ; mean over history of (v_rel + v_entity)], zero third
// block for an empty history.
Eigen::VectorXd encode_state(const EmbeddingTable& table, const AgentState& state);
// v_rel + v_target; STAY contributes a zero relation vector.
Eigen::VectorXd encode_action(const EmbeddingTable& table, const ActionChoice& action);

std::vector<double> action_logits(const PolicyParams& params, const EmbeddingTable& table,
                                  const AgentState& state,
                                  std::span<const ActionChoice> actions);
// Softmax over action_logits. Throws ContractError on an empty action list.
std::vector<double> action_distribution(const PolicyParams& params, const EmbeddingTable& table,
                                        const AgentState& state,
                                        std::span<const ActionChoice> actions);

struct Trajectory {
  std::vector<AgentState> states;                     // s_0 .. s_T
  std::vector<std::vector<ActionChoice>> candidates;  // pruned space at s_0 .. s_{T-1}
  std::vector<std::size_t> chosen;                    // index into candidates[t]
  std::vector<double> log_probs;
  std::vector<double> entropies;
  double reward = 0.0;

  ActionChoice action(std::size_t t) const { return candidates[t][chosen[t]]; }
};

Trajectory sample_trajectory(const PolicyParams& params, const Environment& env, EntityId user,
                             Rng& rng);

// Sum over steps of log pi(a_t | s_t) under params, using the recorded
// candidate sets.
double trajectory_log_likelihood(const PolicyParams& params, const EmbeddingTable& table,
                                 const Trajectory& trajectory);
// Mean over trajectories of R_T * sum_t log pi(a_t | s_t).
double reinforce_objective(const PolicyParams& params, const EmbeddingTable& table,
                           std::span<const Trajectory> trajectories);
// Gradient of reinforce_objective: mean of R_T * sum_t grad log pi, no baseline.
PolicyParams reinforce_gradient(const PolicyParams& params, const EmbeddingTable& table,
                                std::span<const Trajectory> trajectories);

struct PolicyTrainConfig {
  int hidden = 64;
  int epochs = 200;
  double learning_rate = 0.001;
  int batch_size = 64;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct EpochStats {
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
};

struct TrainedPolicy {
  PolicyParams params;
  std::vector<EpochStats> log;
  std::vector<Trajectory> last_epoch;
};

// Gradient ascent with REINFORCE. Each epoch visits every trainable user once
// in shuffled order, one trajectory per user, batch_size trajectories per
// update. Trajectory i of epoch e draws from its own generator seeded by
// (seed, e, i), and gradients are reduced in trajectory order, so the result
// does not depend on `threads`.
TrainedPolicy train_policy(const Environment& env, const PolicyTrainConfig& config);

// Binary layout: "PGPN", version byte, embed dim, hidden (u32 little-endian),
// then little-endian doubles W1 row-major, b1, w2, b2.
void write_policy(const PolicyParams& params, std::ostream& out);
PolicyParams read_policy(std::istream& in);
void save_policy(const PolicyParams& params, const std::string& path);
PolicyParams load_policy(const std::string& path);

// `epoch<TAB>mean_reward<TAB>mean_entropy` per line.
void write_training_log(std::ostream& out, std::span<const EpochStats> log);
// `user<TAB>e_0 -r_1-> e_1 ...<TAB>reward`
std::string format_trajectory(const KnowledgeGraph& graph, const Trajectory& trajectory);

}  // namespace pathrec

#endif  // PATHREC_POLICY_H_
