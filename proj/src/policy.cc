#include "pathrec/policy.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "pathrec/binary_io.h"
#include "pathrec/errors.h"
#include "pathrec/parallel.h"

namespace pathrec {
namespace {

constexpr std::string_view kMagic = "PGPN";
constexpr std::uint8_t kVersion = 1;

Eigen::VectorXd features(const Eigen::VectorXd& state_vec, const EmbeddingTable& table,
                         const ActionChoice& action) {
  const int d = table.dim();
  Eigen::VectorXd x(4 * d);
  x.head(3 * d) = state_vec;
  x.tail(d) = encode_action(table, action);
  return x;
}

// Softmax with the max subtracted first.
std::vector<double> softmax(const std::vector<double>& logits) {
  double top = logits[0];
  for (double v : logits) top = std::max(top, v);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0) h -= v * std::log(v);
  }
  return h;
}

// Adds R * grad log pi(chosen | state) for one step into grad.
void accumulate_step_gradient(const PolicyParams& params, const EmbeddingTable& table,
                              const AgentState& state, std::span<const ActionChoice> actions,
                              std::size_t chosen, double reward, PolicyParams& grad) {
  const Eigen::VectorXd state_vec = encode_state(table, state);
  std::vector<Eigen::VectorXd> xs;
  std::vector<Eigen::VectorXd> pre;
  std::vector<double> logits;
  xs.reserve(actions.size());
  for (const ActionChoice& a : actions) {
    xs.push_back(features(state_vec, table, a));
    pre.push_back(params.w1 * xs.back() + params.b1);
    logits.push_back(params.w2.dot(pre.back().cwiseMax(0.0)) + params.b2);
  }
  const auto probs = softmax(logits);
  for (std::size_t j = 0; j < actions.size(); ++j) {
    const double coeff = reward * ((j == chosen ? 1.0 : 0.0) - probs[j]);
    if (coeff == 0.0) continue;
    const Eigen::VectorXd mask = (pre[j].array() > 0.0).cast<double>().matrix();
    const Eigen::VectorXd back = params.w2.cwiseProduct(mask) * coeff;
    grad.w2 += coeff * pre[j].cwiseMax(0.0);
    grad.b2 += coeff;
    grad.b1 += back;
    grad.w1.noalias() += back * xs[j].transpose();
  }
}

PolicyParams trajectory_gradient(const PolicyParams& params, const EmbeddingTable& table,
                                 const Trajectory& traj) {
  PolicyParams grad = params.zeros_like();
  if (traj.reward == 0.0) return grad;
  for (std::size_t t = 0; t < traj.chosen.size(); ++t) {
    accumulate_step_gradient(params, table, traj.states[t], traj.candidates[t], traj.chosen[t],
                             traj.reward, grad);
  }
  return grad;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

PolicyParams PolicyParams::zeros(int embed_dim, int hidden) {
  if (embed_dim <= 0 || hidden <= 0) throw InputError("policy dims must be positive");
  PolicyParams p;
  p.w1 = RowMatrix::Zero(hidden, 4 * embed_dim);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = Eigen::VectorXd::Zero(hidden);
  p.b2 = 0.0;
  return p;
}

PolicyParams PolicyParams::random(int embed_dim, int hidden, std::uint64_t seed) {
  PolicyParams p = zeros(embed_dim, hidden);
  Rng rng(seed);
  const double b_in = 1.0 / std::sqrt(static_cast<double>(p.input_dim()));
  const double b_hidden = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < p.w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.w1.cols(); ++j) p.w1(i, j) = rng.uniform(-b_in, b_in);
  }
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1[i] = rng.uniform(-b_in, b_in);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2[i] = rng.uniform(-b_hidden, b_hidden);
  p.b2 = rng.uniform(-b_hidden, b_hidden);
  return p;
}

std::size_t PolicyParams::size() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + 1);
}

double& PolicyParams::operator[](std::size_t i) {
  const auto n1 = static_cast<std::size_t>(w1.size());
  if (i < n1) return w1.data()[i];
  i -= n1;
  if (i < static_cast<std::size_t>(b1.size())) return b1[static_cast<Eigen::Index>(i)];
  i -= static_cast<std::size_t>(b1.size());
  if (i < static_cast<std::size_t>(w2.size())) return w2[static_cast<Eigen::Index>(i)];
  i -= static_cast<std::size_t>(w2.size());
  if (i == 0) return b2;
  throw InputError("policy parameter index out of range");
}

double PolicyParams::operator[](std::size_t i) const {
  return const_cast<PolicyParams&>(*this)[i];
}

void PolicyParams::add_scaled(const PolicyParams& other, double scale) {
  w1 += scale * other.w1;
  b1 += scale * other.b1;
  w2 += scale * other.w2;
  b2 += scale * other.b2;
}

bool PolicyParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && std::isfinite(b2);
}

bool PolicyParams::operator==(const PolicyParams& other) const {
  return w1.rows() == other.w1.rows() && w1.cols() == other.w1.cols() && w1 == other.w1 &&
         b1 == other.b1 && w2 == other.w2 && b2 == other.b2;
}

Eigen::VectorXd encode_state(const EmbeddingTable& table, const AgentState& state) {
  const int d = table.dim();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * d);
  v.segment(0, d) = table.entity(state.user).transpose();
  v.segment(d, d) = table.entity(state.current).transpose();
  if (!state.history.empty()) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (const HistoryStep& h : state.history) {
      if (h.rel != kStayRelation) acc += table.relation(h.rel).transpose();
      acc += table.entity(h.entity).transpose();
    }
    v.segment(2 * d, d) = acc / static_cast<double>(state.history.size());
  }
  return v;
}

Eigen::VectorXd encode_action(const EmbeddingTable& table, const ActionChoice& action) {
  Eigen::VectorXd v = table.entity(action.target).transpose();
  if (!action.is_stay()) v += table.relation(action.rel).transpose();
  return v;
}

std::vector<double> action_logits(const PolicyParams& params, const EmbeddingTable& table,
                                  const AgentState& state,
                                  std::span<const ActionChoice> actions) {
  if (params.embed_dim() != table.dim()) {
    throw InputError("policy expects embedding dim " + std::to_string(params.embed_dim()) +
                     ", table has " + std::to_string(table.dim()));
  }
  const Eigen::VectorXd state_vec = encode_state(table, state);
  std::vector<double> logits;
  logits.reserve(actions.size());
  for (const ActionChoice& a : actions) {
    const Eigen::VectorXd hidden =
        (params.w1 * features(state_vec, table, a) + params.b1).cwiseMax(0.0);
    logits.push_back(params.w2.dot(hidden) + params.b2);
  }
  return logits;
}

std::vector<double> action_distribution(const PolicyParams& params, const EmbeddingTable& table,
                                        const AgentState& state,
                                        std::span<const ActionChoice> actions) {
  if (actions.empty()) throw ContractError("action_distribution over an empty action list");
  return softmax(action_logits(params, table, state, actions));
}

Trajectory sample_trajectory(const PolicyParams& params, const Environment& env, EntityId user,
                             Rng& rng) {
  Trajectory traj;
  traj.states.push_back(env.initial_state(user));
  for (int t = 0; t < env.config().horizon; ++t) {
    const AgentState& s = traj.states.back();
    auto actions = env.pruned_actions(s);
    const auto probs = action_distribution(params, env.table(), s, actions);
    const double u = rng.uniform();
    std::size_t pick = probs.size() - 1;
    double cum = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      cum += probs[j];
      if (u < cum) {
        pick = j;
        break;
      }
    }
    traj.log_probs.push_back(std::log(probs[pick]));
    traj.entropies.push_back(entropy(probs));
    traj.chosen.push_back(pick);
    AgentState next = env.advance(s, actions[pick]);
    traj.candidates.push_back(std::move(actions));
    traj.states.push_back(std::move(next));
  }
  traj.reward = env.terminal_reward(traj.states.back());
  return traj;
}

double trajectory_log_likelihood(const PolicyParams& params, const EmbeddingTable& table,
                                 const Trajectory& trajectory) {
  double total = 0.0;
  for (std::size_t t = 0; t < trajectory.chosen.size(); ++t) {
    const auto probs =
        action_distribution(params, table, trajectory.states[t], trajectory.candidates[t]);
    total += std::log(probs[trajectory.chosen[t]]);
  }
  return total;
}

double reinforce_objective(const PolicyParams& params, const EmbeddingTable& table,
                           std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw ContractError("reinforce_objective needs trajectories");
  double total = 0.0;
  for (const Trajectory& traj : trajectories) {
    total += traj.reward * trajectory_log_likelihood(params, table, traj);
  }
  return total / static_cast<double>(trajectories.size());
}

PolicyParams reinforce_gradient(const PolicyParams& params, const EmbeddingTable& table,
                                std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw ContractError("reinforce_gradient needs trajectories");
  PolicyParams grad = params.zeros_like();
  for (const Trajectory& traj : trajectories) {
    grad.add_scaled(trajectory_gradient(params, table, traj), 1.0);
  }
  const double inv = 1.0 / static_cast<double>(trajectories.size());
  grad.add_scaled(grad, inv - 1.0);
  return grad;
}

TrainedPolicy train_policy(const Environment& env, const PolicyTrainConfig& config) {
  if (config.epochs < 0 || config.batch_size <= 0 || config.hidden <= 0 ||
      config.learning_rate < 0) {
    throw InputError("invalid policy training config");
  }
  const std::vector<EntityId> users = env.trainable_users();
  if (users.empty()) {
    throw InputError("no subscriber has an outgoing edge; nothing to train on (no clicks?)");
  }
  TrainedPolicy out;
  out.params = PolicyParams::random(env.table().dim(), config.hidden,
                                    derive_seed(config.seed, "policy-init"));
  Rng shuffler(derive_seed(config.seed, "policy-shuffle"));
  std::vector<EntityId> order = users;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffler.shuffle(order);
    const std::uint64_t epoch_seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch));
    std::vector<Trajectory> epoch_trajs;
    epoch_trajs.reserve(order.size());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min<std::size_t>(config.batch_size, order.size() - start);
      std::vector<Trajectory> batch(n);
      std::vector<PolicyParams> grads(n);
      parallel_for(n, config.threads, [&](std::size_t i) {
        Rng rng(derive_seed(epoch_seed, start + i));
        batch[i] = sample_trajectory(out.params, env, order[start + i], rng);
        grads[i] = trajectory_gradient(out.params, env.table(), batch[i]);
      });
      PolicyParams grad = out.params.zeros_like();
      for (const PolicyParams& g : grads) grad.add_scaled(g, 1.0);
      out.params.add_scaled(grad, config.learning_rate / static_cast<double>(n));
      for (auto& t : batch) epoch_trajs.push_back(std::move(t));
    }
    EpochStats stats{epoch, 0.0, 0.0};
    std::size_t steps = 0;
    for (const Trajectory& t : epoch_trajs) {
      stats.mean_reward += t.reward;
      for (double h : t.entropies) stats.mean_entropy += h;
      steps += t.entropies.size();
    }
    stats.mean_reward /= static_cast<double>(epoch_trajs.size());
    if (steps) stats.mean_entropy /= static_cast<double>(steps);
    out.log.push_back(stats);
    if (epoch + 1 == config.epochs) out.last_epoch = std::move(epoch_trajs);
  }
  return out;
}

void write_policy(const PolicyParams& params, std::ostream& out) {
  binary::write_magic(out, kMagic);
  binary::write_u8(out, kVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(params.embed_dim()));
  binary::write_u32(out, static_cast<std::uint32_t>(params.hidden()));
  for (std::size_t i = 0; i < params.size(); ++i) binary::write_f64(out, params[i]);
}

PolicyParams read_policy(std::istream& in) {
  binary::expect_magic(in, kMagic);
  const auto version = binary::read_u8(in);
  if (version != kVersion) {
    throw InputError("unsupported policy file version " + std::to_string(version));
  }
  const auto dim = binary::read_u32(in);
  const auto hidden = binary::read_u32(in);
  if (dim == 0 || hidden == 0 || dim > 4096 || hidden > 65536) {
    throw InputError("implausible policy dimensions");
  }
  PolicyParams p = PolicyParams::zeros(static_cast<int>(dim), static_cast<int>(hidden));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = binary::read_f64(in);
  return p;
}

void save_policy(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  write_policy(params, out);
  if (!out) throw InputError("failed writing " + path);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_policy(in);
}

void write_training_log(std::ostream& out, std::span<const EpochStats> log) {
  for (const EpochStats& s : log) {
    out << s.epoch << '\t' << format_double(s.mean_reward) << '\t'
        << format_double(s.mean_entropy) << '\n';
  }
}

std::string format_trajectory(const KnowledgeGraph& graph, const Trajectory& trajectory) {
  std::string line = graph.key(trajectory.states.front().user) + "\t";
  line += graph.key(trajectory.states.front().current);
  for (std::size_t t = 0; t < trajectory.chosen.size(); ++t) {
    const ActionChoice a = trajectory.action(t);
    line += " -" + graph.relation_name(a.rel) + "-> " + graph.key(a.target);
  }
  line += "\t" + format_double(trajectory.reward);
  return line;
}

}  // namespace pathrec
