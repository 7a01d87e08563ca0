// pathrec: build the knowledge graph, train, recommend and evaluate.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pathrec/errors.h"
#include "pathrec/pipeline.h"

namespace {

using pathrec::PipelineConfig;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "pipeline config file");
  cmd->add_option("--set", opts.overrides, "override a config key (key=value)");
  cmd->add_option("-t,--threads", opts.threads, "worker threads");
}

PipelineConfig resolve(const CommonOptions& opts) {
  PipelineConfig cfg;
  if (!opts.config_path.empty()) cfg = pathrec::load_config(opts.config_path);
  if (const char* wd = std::getenv("PATHREC_WORKDIR"); wd && *wd) cfg.work_dir = wd;
  for (const std::string& o : opts.overrides) pathrec::apply_override(cfg, o);
  if (opts.threads > 0) cfg.threads = opts.threads;
  cfg.validate();
  return cfg;
}

int build_kg(const CommonOptions& opts) {
  const PipelineConfig cfg = resolve(opts);
  const auto s = pathrec::run_build_kg(cfg);
  for (const std::string& w : s.warnings) std::cerr << "warning: " << w << '\n';
  std::printf("interactions: %zu rows (%zu train, %zu test)\n", s.interaction_rows, s.train_rows,
              s.test_rows);
  std::printf("ckg: %zu entities, %zu triples\n", s.ckg_entities, s.ckg_triples);
  std::printf("ukg: %zu entities, %zu triples\n", s.ukg_entities, s.ukg_triples);
  std::printf("wrote %s\n", (cfg.work_dir / pathrec::files::kStats).string().c_str());
  return 0;
}

int train(const CommonOptions& opts) {
  const PipelineConfig cfg = resolve(opts);
  const auto s = pathrec::run_train(cfg);
  if (!s.embedding_loss.empty()) {
    std::printf("embedding loss: %.6f -> %.6f over %zu epochs\n", s.embedding_loss.front(),
                s.embedding_loss.back(), s.embedding_loss.size());
  }
  if (!s.policy_log.empty()) {
    std::printf("policy mean reward: %.6f -> %.6f over %zu epochs\n",
                s.policy_log.front().mean_reward, s.policy_log.back().mean_reward,
                s.policy_log.size());
  }
  return 0;
}

int recommend(const CommonOptions& opts, const std::vector<std::string>& users) {
  const PipelineConfig cfg = resolve(opts);
  const auto lists = pathrec::run_recommend(cfg, users);
  std::size_t n = 0;
  for (const auto& l : lists) n += l.entries.size();
  std::printf("%zu users, %zu recommendations -> %s\n", lists.size(), n,
              (cfg.work_dir / pathrec::files::kRecommendations).string().c_str());
  return 0;
}

int evaluate(const CommonOptions& opts) {
  const PipelineConfig cfg = resolve(opts);
  const auto reports = pathrec::run_evaluate(cfg);
  std::cout << pathrec::format_metric_table(reports);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable knowledge-graph recommender"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* build_cmd = app.add_subcommand("build-kg", "build the knowledge graphs and split the data");
  add_common(build_cmd, common);
  auto* train_cmd = app.add_subcommand("train", "train embeddings and the path policy");
  add_common(train_cmd, common);
  auto* rec_cmd = app.add_subcommand("recommend", "recommend with reasoning paths");
  add_common(rec_cmd, common);
  std::vector<std::string> users;
  rec_cmd->add_option("-u,--user", users, "restrict to these user keys");
  auto* eval_cmd = app.add_subcommand("evaluate", "score KG-RL and the baselines");
  add_common(eval_cmd, common);
  auto* cfg_cmd = app.add_subcommand("show-config", "print the effective configuration");
  add_common(cfg_cmd, common);

  auto* gen_cmd = app.add_subcommand("gen-fixture", "write a synthetic planted-topic dataset");
  std::string out_dir;
  std::uint64_t gen_seed = 7;
  int gen_users = 50, gen_items = 40, gen_topics = 4;
  gen_cmd->add_option("-o,--out", out_dir, "output directory")->required();
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--users", gen_users, "number of users");
  gen_cmd->add_option("--items", gen_items, "number of articles");
  gen_cmd->add_option("--topics", gen_topics, "number of topics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*build_cmd) return build_kg(common);
    if (*train_cmd) return train(common);
    if (*rec_cmd) return recommend(common, users);
    if (*eval_cmd) return evaluate(common);
    if (*cfg_cmd) {
      std::cout << pathrec::format_config(resolve(common));
      return 0;
    }
    if (*gen_cmd) {
      pathrec::write_planted_fixture(out_dir, gen_seed, gen_users, gen_items, gen_topics);
      std::printf("wrote %s\n", out_dir.c_str());
      return 0;
    }
  } catch (const pathrec::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
