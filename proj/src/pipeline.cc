#include "pathrec/pipeline.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "pathrec/errors.h"
#include "pathrec/fixtures.h"
#include "pathrec/graph.h"
#include "pathrec/kg_builder.h"
#include "pathrec/rng.h"

namespace pathrec {
namespace fs = std::filesystem;
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InputError("config " + key + ": cannot parse '" + value + "'");
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw InputError("config " + key + ": empty list");
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

template <typename T, typename Field>
Setter number(Field field) {
  return [field](PipelineConfig& c, const std::string& k, const std::string& v) {
    field(c) = parse_number<T>(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"interactions", [](PipelineConfig& c, const std::string&,
                          const std::string& v) { c.interactions = v; }},
      {"articles", [](PipelineConfig& c, const std::string&,
                      const std::string& v) { c.articles = v; }},
      {"work_dir", [](PipelineConfig& c, const std::string&,
                      const std::string& v) { c.work_dir = v; }},
      {"seed", number<std::uint64_t>([](PipelineConfig& c) -> auto& { return c.seed; })},
      {"threads", number<int>([](PipelineConfig& c) -> auto& { return c.threads; })},
      {"kg.terms_k", number<std::size_t>([](PipelineConfig& c) -> auto& { return c.terms_k; })},
      {"emb.model", [](PipelineConfig& c, const std::string&,
                       const std::string& v) { c.embedding.model = parse_model_kind(v); }},
      {"emb.dim", number<int>([](PipelineConfig& c) -> auto& { return c.embedding.dim; })},
      {"emb.epochs", number<int>([](PipelineConfig& c) -> auto& { return c.embedding.epochs; })},
      {"emb.learning_rate",
       number<double>([](PipelineConfig& c) -> auto& { return c.embedding.learning_rate; })},
      {"emb.margin", number<double>([](PipelineConfig& c) -> auto& { return c.embedding.margin; })},
      {"emb.negatives",
       number<int>([](PipelineConfig& c) -> auto& { return c.embedding.negatives_per_positive; })},
      {"emb.batch_size",
       number<int>([](PipelineConfig& c) -> auto& { return c.embedding.batch_size; })},
      {"env.alpha", number<int>([](PipelineConfig& c) -> auto& { return c.env.alpha; })},
      {"env.horizon", number<int>([](PipelineConfig& c) -> auto& { return c.env.horizon; })},
      {"env.history_k", number<int>([](PipelineConfig& c) -> auto& { return c.env.history_k; })},
      {"env.max_hops", number<int>([](PipelineConfig& c) -> auto& { return c.env.max_hops; })},
      {"policy.hidden", number<int>([](PipelineConfig& c) -> auto& { return c.policy.hidden; })},
      {"policy.epochs", number<int>([](PipelineConfig& c) -> auto& { return c.policy.epochs; })},
      {"policy.learning_rate",
       number<double>([](PipelineConfig& c) -> auto& { return c.policy.learning_rate; })},
      {"policy.batch_size",
       number<int>([](PipelineConfig& c) -> auto& { return c.policy.batch_size; })},
      {"beam.widths", [](PipelineConfig& c, const std::string& k,
                         const std::string& v) { c.beam.widths = parse_int_list(k, v); }},
      {"beam.top_n", number<int>([](PipelineConfig& c) -> auto& { return c.beam.top_n; })},
      {"beam.min_hops", number<int>([](PipelineConfig& c) -> auto& { return c.beam.min_hops; })},
      {"split.train_fraction",
       number<double>([](PipelineConfig& c) -> auto& { return c.split.train_fraction; })},
      {"eval.k", number<std::size_t>([](PipelineConfig& c) -> auto& { return c.eval_k; })},
      {"bpr.factors", number<int>([](PipelineConfig& c) -> auto& { return c.bpr.factors; })},
      {"bpr.epochs", number<int>([](PipelineConfig& c) -> auto& { return c.bpr.epochs; })},
      {"bpr.learning_rate",
       number<double>([](PipelineConfig& c) -> auto& { return c.bpr.learning_rate; })},
      {"bpr.regularization",
       number<double>([](PipelineConfig& c) -> auto& { return c.bpr.regularization; })},
  };
  return table;
}

fs::path in_work(const PipelineConfig& c, const char* name) { return c.work_dir / name; }

void require_file(const fs::path& p, const std::string& hint) {
  if (!fs::is_regular_file(p)) throw InputError("missing " + p.string() + " (" + hint + ")");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  return out;
}

std::vector<InteractionRow> read_rows(const fs::path& p) {
  auto parsed = read_interactions_file(p.string());
  if (!parsed.issues.empty()) {
    throw InputError(p.string() + " line " + std::to_string(parsed.issues.front().row) + ": " +
                     parsed.issues.front().message);
  }
  return std::move(parsed.rows);
}

nlohmann::ordered_json graph_stats(const KnowledgeGraph& g) {
  nlohmann::ordered_json s;
  s["entities"] = g.entity_count();
  s["relations"] = g.relation_count();
  s["triples"] = g.triple_count();
  s["entities_by_kind"] = nlohmann::ordered_json::object();
  for (const auto& [kind, n] : g.kind_counts()) s["entities_by_kind"][kind] = n;
  std::map<std::string, std::size_t> per_rel;
  for (const Triple& t : g.triples()) ++per_rel[g.relation_name(t.rel)];
  s["triples_by_relation"] = nlohmann::ordered_json::object();
  for (const auto& [rel, n] : per_rel) s["triples_by_relation"][rel] = n;
  return s;
}

std::string file_safe(const std::string& key) {
  std::string out = key;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  if (out == "." || out == "..") out = "_";
  return out;
}

struct TrainedArtifacts {
  KnowledgeGraph graph;
  EmbeddingTable table;
  PolicyParams params;
};

TrainedArtifacts load_artifacts(const PipelineConfig& config) {
  const fs::path ckg = in_work(config, files::kCkg);
  const fs::path emb = in_work(config, files::kEmbeddings);
  const fs::path pol = in_work(config, files::kPolicy);
  require_file(ckg, "run build-kg first");
  require_file(emb, "run train first");
  require_file(pol, "run train first");
  TrainedArtifacts a{load_triples(ckg.string()), load_embeddings(emb.string()),
                     load_policy(pol.string())};
  return a;
}

std::vector<EntityId> subscribers_by_key(const KnowledgeGraph& g) {
  auto users = g.entities_of_kind(kinds::kSubscriber);
  std::sort(users.begin(), users.end(),
            [&g](EntityId a, EntityId b) { return g.key(a) < g.key(b); });
  return users;
}

}  // namespace

void PipelineConfig::validate() const {
  if (threads < 1) throw InputError("threads must be at least 1");
  if (terms_k < 1) throw InputError("kg.terms_k must be at least 1");
  if (embedding.dim < 1 || embedding.epochs < 0 || embedding.batch_size < 1 ||
      embedding.negatives_per_positive < 1 || !(embedding.learning_rate >= 0)) {
    throw InputError("invalid emb.* settings");
  }
  env.validate();
  if (policy.hidden < 1 || policy.epochs < 0 || policy.batch_size < 1 ||
      !(policy.learning_rate >= 0)) {
    throw InputError("invalid policy.* settings");
  }
  BeamConfig b = beam;
  b.max_hops = env.max_hops;
  b.validate();
  if (!(split.train_fraction > 0 && split.train_fraction <= 1)) {
    throw InputError("split.train_fraction must lie in (0, 1]");
  }
  if (eval_k < 1) throw InputError("eval.k must be at least 1");
  if (bpr.factors < 1 || bpr.epochs < 0) throw InputError("invalid bpr.* settings");
}

void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw InputError("unknown config key '" + key + "'");
  it->second(config, key, value);
  config.beam.max_hops = config.env.max_hops;
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw InputError("expected key=value, got '" + assignment + "'");
  }
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

PipelineConfig parse_config(std::istream& in, const fs::path& base_dir) {
  PipelineConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(c, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!c.interactions.empty() && c.interactions.is_relative()) {
    c.interactions = base_dir / c.interactions;
  }
  if (!c.articles.empty() && c.articles.is_relative()) c.articles = base_dir / c.articles;
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

std::string format_config(const PipelineConfig& c) {
  std::ostringstream out;
  std::string widths;
  for (int w : c.beam.widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  out << "interactions = " << c.interactions.string() << '\n'
      << "articles = " << c.articles.string() << '\n'
      << "work_dir = " << c.work_dir.string() << '\n'
      << "seed = " << c.seed << '\n'
      << "threads = " << c.threads << '\n'
      << "kg.terms_k = " << c.terms_k << '\n'
      << "emb.model = " << model_kind_name(c.embedding.model) << '\n'
      << "emb.dim = " << c.embedding.dim << '\n'
      << "emb.epochs = " << c.embedding.epochs << '\n'
      << "emb.learning_rate = " << format_double(c.embedding.learning_rate) << '\n'
      << "emb.margin = " << format_double(c.embedding.margin) << '\n'
      << "emb.negatives = " << c.embedding.negatives_per_positive << '\n'
      << "emb.batch_size = " << c.embedding.batch_size << '\n'
      << "env.alpha = " << c.env.alpha << '\n'
      << "env.horizon = " << c.env.horizon << '\n'
      << "env.history_k = " << c.env.history_k << '\n'
      << "env.max_hops = " << c.env.max_hops << '\n'
      << "policy.hidden = " << c.policy.hidden << '\n'
      << "policy.epochs = " << c.policy.epochs << '\n'
      << "policy.learning_rate = " << format_double(c.policy.learning_rate) << '\n'
      << "policy.batch_size = " << c.policy.batch_size << '\n'
      << "beam.widths = " << widths << '\n'
      << "beam.top_n = " << c.beam.top_n << '\n'
      << "beam.min_hops = " << c.beam.min_hops << '\n'
      << "split.train_fraction = " << format_double(c.split.train_fraction) << '\n'
      << "eval.k = " << c.eval_k << '\n'
      << "bpr.factors = " << c.bpr.factors << '\n'
      << "bpr.epochs = " << c.bpr.epochs << '\n'
      << "bpr.learning_rate = " << format_double(c.bpr.learning_rate) << '\n'
      << "bpr.regularization = " << format_double(c.bpr.regularization) << '\n';
  return out.str();
}

std::uint64_t stage_seed(const PipelineConfig& config, std::string_view stage) {
  return derive_seed(config.seed, stage);
}

BuildKgSummary run_build_kg(const PipelineConfig& config) {
  config.validate();
  if (config.interactions.empty()) throw InputError("config: interactions path is not set");
  if (config.articles.empty()) throw InputError("config: articles path is not set");
  require_file(config.interactions, "interactions csv");
  require_file(config.articles, "articles csv");

  BuildKgSummary summary;
  const auto rows = read_interactions_file(config.interactions.string());
  const auto articles = read_articles_file(config.articles.string());
  for (const RowIssue& i : rows.issues) {
    summary.warnings.push_back(config.interactions.filename().string() + " line " +
                               std::to_string(i.row) + ": " + i.message);
  }
  for (const RowIssue& i : articles.issues) {
    summary.warnings.push_back(config.articles.filename().string() + " line " +
                               std::to_string(i.row) + ": " + i.message);
  }
  if (rows.rows.empty()) throw InputError("no interactions in " + config.interactions.string());

  SplitSpec spec = config.split;
  spec.seed = stage_seed(config, "split");
  const InteractionSplit split = split_interactions(rows.rows, spec);
  const CkgBuild ckg = build_ckg(split.train, articles.rows, config.terms_k);
  const KnowledgeGraph ukg = build_ukg(articles.rows, config.terms_k);
  for (const RowIssue& i : ckg.issues) {
    summary.warnings.push_back("ckg item " + std::to_string(i.row) + ": " + i.message);
  }

  fs::create_directories(config.work_dir);
  {
    auto out = open_out(in_work(config, files::kTrainRows));
    write_interactions(out, split.train);
  }
  {
    auto out = open_out(in_work(config, files::kTestRows));
    write_interactions(out, split.test);
  }
  save_triples(ckg.graph, in_work(config, files::kCkg).string());
  save_triples(ukg, in_work(config, files::kUkg).string());

  nlohmann::ordered_json stats;
  stats["interactions"] = {{"rows", rows.rows.size()},
                           {"skipped", rows.issues.size()},
                           {"train_rows", split.train.size()},
                           {"test_rows", split.test.size()}};
  stats["articles"] = {{"rows", articles.rows.size()}, {"skipped", articles.issues.size()}};
  stats["ckg"] = graph_stats(ckg.graph);
  stats["ukg"] = graph_stats(ukg);
  stats["warnings"] = summary.warnings;
  {
    auto out = open_out(in_work(config, files::kStats));
    out << stats.dump(2) << '\n';
  }

  summary.interaction_rows = rows.rows.size();
  summary.train_rows = split.train.size();
  summary.test_rows = split.test.size();
  summary.ckg_entities = ckg.graph.entity_count();
  summary.ckg_triples = ckg.graph.triple_count();
  summary.ukg_entities = ukg.entity_count();
  summary.ukg_triples = ukg.triple_count();
  return summary;
}

TrainSummary run_train(const PipelineConfig& config) {
  config.validate();
  const fs::path ckg_path = in_work(config, files::kCkg);
  require_file(ckg_path, "run build-kg first");
  KnowledgeGraph graph = load_triples(ckg_path.string());
  graph.freeze();

  EmbeddingConfig ec = config.embedding;
  ec.seed = stage_seed(config, "emb");
  TrainedEmbeddings emb = train_embeddings(graph, ec);
  save_embeddings(emb.table, in_work(config, files::kEmbeddings).string());
  {
    auto out = open_out(in_work(config, files::kEmbeddingLog));
    for (std::size_t e = 0; e < emb.loss_trace.size(); ++e) {
      out << e << '\t' << format_double(emb.loss_trace[e]) << '\n';
    }
  }

  Environment env(graph, emb.table, config.env);
  PolicyTrainConfig pc = config.policy;
  pc.seed = stage_seed(config, "policy");
  pc.threads = config.threads;
  TrainedPolicy policy = train_policy(env, pc);
  save_policy(policy.params, in_work(config, files::kPolicy).string());
  {
    auto out = open_out(in_work(config, files::kPolicyLog));
    write_training_log(out, policy.log);
  }
  {
    auto out = open_out(in_work(config, files::kTrajectories));
    for (const Trajectory& t : policy.last_epoch) out << format_trajectory(graph, t) << '\n';
  }
  return {std::move(emb.loss_trace), std::move(policy.log)};
}

std::vector<RecommendationList> run_recommend(const PipelineConfig& config,
                                              const std::vector<std::string>& users) {
  config.validate();
  TrainedArtifacts a = load_artifacts(config);
  a.graph.freeze();
  Environment env(a.graph, a.table, config.env);

  std::vector<EntityId> targets;
  if (users.empty()) {
    targets = subscribers_by_key(a.graph);
  } else {
    for (const std::string& key : users) {
      const auto id = a.graph.find_entity(kinds::kSubscriber, key);
      if (!id) throw InputError("unknown user '" + key + "'");
      targets.push_back(*id);
    }
  }
  BeamConfig beam = config.beam;
  beam.max_hops = config.env.max_hops;
  auto lists = recommend_all(targets, a.params, env, beam, config.threads);

  {
    auto out = open_out(in_work(config, files::kRecommendations));
    write_recommendations_jsonl(out, a.graph, lists);
  }
  for (const RecommendationList& list : lists) {
    const fs::path dir =
        config.work_dir / files::kExplanations / file_safe(a.graph.key(list.user));
    if (list.entries.empty()) continue;
    fs::create_directories(dir);
    for (const RecommendationEntry& e : list.entries) {
      auto out = open_out(dir / (file_safe(a.graph.key(e.item)) + ".dot"));
      out << render_explanation(a.graph, e.explanation).dot;
    }
  }
  return lists;
}

std::vector<std::pair<std::string, MetricReport>> run_evaluate(const PipelineConfig& config) {
  config.validate();
  TrainedArtifacts a = load_artifacts(config);
  a.graph.freeze();
  const fs::path train_path = in_work(config, files::kTrainRows);
  const fs::path test_path = in_work(config, files::kTestRows);
  require_file(train_path, "run build-kg first");
  require_file(test_path, "run build-kg first");
  const auto train = read_rows(train_path);
  const auto test = read_rows(test_path);
  const auto relevant = relevant_items(test);
  if (relevant.empty()) {
    throw InputError("no test users: the held-out split has no clicks (split.train_fraction = " +
                     format_double(config.split.train_fraction) + ")");
  }

  Environment env(a.graph, a.table, config.env);
  BeamConfig beam = config.beam;
  beam.max_hops = config.env.max_hops;
  beam.top_n = static_cast<int>(std::max<std::size_t>(config.eval_k, 1));

  std::vector<std::string> user_keys;
  std::vector<EntityId> user_ids;
  for (const auto& [user, items] : relevant) {
    const auto id = a.graph.find_entity(kinds::kSubscriber, user);
    if (!id) continue;
    user_keys.push_back(user);
    user_ids.push_back(*id);
  }
  const auto lists = recommend_all(user_ids, a.params, env, beam, config.threads);

  std::vector<std::string> catalog;
  for (EntityId i : a.graph.entities_of_kind(kinds::kArticle)) catalog.push_back(a.graph.key(i));
  const ImplicitFeedback data(train, catalog);
  BprConfig bc = config.bpr;
  bc.seed = stage_seed(config, "bpr");
  const BprModel bpr = bpr_train(data, bc);
  const ItemKnn knn(data);
  const std::uint64_t random_seed = stage_seed(config, "random");

  std::map<std::string, Ranking> kg, bpr_r, knn_r, rnd, pop;
  for (std::size_t i = 0; i < user_keys.size(); ++i) {
    auto& ranked = kg[user_keys[i]];
    for (const RecommendationEntry& e : lists[i].entries) ranked.push_back(a.graph.key(e.item));
  }
  for (const auto& [user, items] : relevant) {
    bpr_r[user] = bpr_recommend(bpr, data, user, config.eval_k);
    knn_r[user] = knn.recommend(user, config.eval_k);
    rnd[user] = random_recommend(data, user, config.eval_k, random_seed);
    pop[user] = popularity_recommend(data, user, config.eval_k);
  }
  std::vector<std::pair<std::string, MetricReport>> reports{
      {"KG-RL", evaluate_rankings(kg, relevant, config.eval_k)},
      {"BPR", evaluate_rankings(bpr_r, relevant, config.eval_k)},
      {"Item-kNN", evaluate_rankings(knn_r, relevant, config.eval_k)},
      {"Popularity", evaluate_rankings(pop, relevant, config.eval_k)},
      {"Random", evaluate_rankings(rnd, relevant, config.eval_k)},
  };
  {
    auto out = open_out(in_work(config, files::kMetricsJson));
    write_metric_json(out, reports);
  }
  {
    auto out = open_out(in_work(config, files::kMetricsText));
    out << format_metric_table(reports);
  }
  return reports;
}

void write_planted_fixture(const fs::path& out_dir, std::uint64_t seed, int users, int items,
                           int topics) {
  const PlantedFixture fx = generate_planted_fixture(seed, users, items, topics);
  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "interactions.csv");
    write_interactions(out, fx.interactions);
  }
  {
    auto out = open_out(out_dir / "articles.csv");
    write_articles(out, fx.articles);
  }
}

}  // namespace pathrec
