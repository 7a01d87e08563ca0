#ifndef PATHREC_PIPELINE_H_
#define PATHREC_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pathrec/baselines.h"
#include "pathrec/embeddings.h"
#include "pathrec/env.h"
#include "pathrec/eval.h"
#include "pathrec/pdr.h"
#include "pathrec/policy.h"

namespace pathrec {

struct PipelineConfig {
  std::filesystem::path interactions;
  std::filesystem::path articles;
  std::filesystem::path work_dir = "pathrec_work";
  std::uint64_t seed = 1;
  int threads = 1;
  std::size_t terms_k = 5;
  EmbeddingConfig embedding;
  EnvConfig env;
  PolicyTrainConfig policy;
  BeamConfig beam;
  SplitSpec split;
  std::size_t eval_k = 10;
  BprConfig bpr;

  // Throws InputError on any inconsistent value.
  void validate() const;
};

// Sets one `key=value` pair; throws InputError for unknown keys or values
// that do not parse.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);
// Applies a `key=value` string as given to --set.
void apply_override(PipelineConfig& config, const std::string& assignment);

// One `key = value` per line, `#` starts a comment. Relative input paths are
// resolved against `base_dir`.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
// Every key with its effective value, one per line, in parse_config syntax.
std::string format_config(const PipelineConfig& config);

// Per-stage seeds, all derived from the master seed.
std::uint64_t stage_seed(const PipelineConfig& config, std::string_view stage);

namespace files {
inline constexpr const char* kTrainRows = "train.csv";
inline constexpr const char* kTestRows = "test.csv";
inline constexpr const char* kCkg = "ckg.triples";
inline constexpr const char* kUkg = "ukg.triples";
inline constexpr const char* kStats = "kg_stats.json";
inline constexpr const char* kEmbeddings = "emb.bin";
inline constexpr const char* kEmbeddingLog = "emb_loss.log";
inline constexpr const char* kPolicy = "policy.bin";
inline constexpr const char* kPolicyLog = "policy_train.log";
inline constexpr const char* kTrajectories = "trajectories.log";
inline constexpr const char* kRecommendations = "recommendations.jsonl";
inline constexpr const char* kExplanations = "explanations";
inline constexpr const char* kMetricsJson = "metrics.json";
inline constexpr const char* kMetricsText = "metrics.txt";
}  // namespace files

struct BuildKgSummary {
  std::size_t interaction_rows = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t ckg_entities = 0;
  std::size_t ckg_triples = 0;
  std::size_t ukg_entities = 0;
  std::size_t ukg_triples = 0;
  std::vector<std::string> warnings;
};

struct TrainSummary {
  std::vector<double> embedding_loss;
  std::vector<EpochStats> policy_log;
};

// Reads the CSVs, splits them and writes the train/test rows, both graphs
// and kg_stats.json. Throws InputError when no interaction survives parsing.
BuildKgSummary run_build_kg(const PipelineConfig& config);
// Trains embeddings on ckg.triples, then the policy.
TrainSummary run_train(const PipelineConfig& config);
// Recommendations for every subscriber (sorted by key) or only `users`.
// Throws InputError naming the first unknown user key.
std::vector<RecommendationList> run_recommend(const PipelineConfig& config,
                                              const std::vector<std::string>& users);
// KG-RL, BPR, kNN, random and popularity on the held-out rows.
std::vector<std::pair<std::string, MetricReport>> run_evaluate(const PipelineConfig& config);

// Writes interactions.csv and articles.csv into `out_dir`.
void write_planted_fixture(const std::filesystem::path& out_dir, std::uint64_t seed, int users,
                           int items, int topics);

}  // namespace pathrec

#endif  // PATHREC_PIPELINE_H_
