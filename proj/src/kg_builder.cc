#include "pathrec/kg_builder.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "pathrec/csv.h"
#include "pathrec/errors.h"

namespace pathrec {
namespace {

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> kWords = {
      "about", "above", "after", "again", "against", "all", "and", "any", "are", "aren",
      "because", "been", "before", "being", "below", "between", "both", "but", "can",
      "could", "did", "didn", "does", "doesn", "doing", "don", "down", "during", "each",
      "few", "for", "from", "further", "had", "has", "have", "having", "her", "here",
      "hers", "herself", "him", "himself", "his", "how", "into", "isn", "its", "itself",
      "just", "more", "most", "mustn", "myself", "nor", "not", "now", "off", "once",
      "only", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
      "should", "some", "such", "than", "that", "the", "their", "theirs", "them",
      "themselves", "then", "there", "these", "they", "this", "those", "through", "too",
      "under", "until", "very", "was", "wasn", "were", "weren", "what", "when", "where",
      "which", "while", "who", "whom", "why", "will", "with", "won", "would", "you",
      "your", "yours", "yourself", "yourselves"};
  return kWords;
}

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view cell) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= cell.size()) {
    auto end = cell.find(';', start);
    if (end == std::string_view::npos) end = cell.size();
    std::string item = trim(cell.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ';';
    out += items[i];
  }
  return out;
}

bool looks_like_iso_date(std::string_view s) {
  if (s.size() < 10) return false;
  for (std::size_t i = 0; i < 10; ++i) {
    const bool dash = i == 4 || i == 7;
    if (dash ? s[i] != '-' : !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return s.size() == 10 || s[10] == 'T' || s[10] == ' ';
}

std::vector<std::size_t> column_positions(const CsvTable& table,
                                          std::span<const std::string_view> names,
                                          std::string_view file_kind) {
  std::vector<std::size_t> pos;
  for (std::string_view name : names) {
    auto it = std::find_if(table.header.begin(), table.header.end(),
                           [&](const std::string& h) { return trim(h) == name; });
    if (it == table.header.end()) {
      throw InputError(std::string(file_kind) + " csv is missing column '" + std::string(name) +
                       "'");
    }
    pos.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  return pos;
}

std::string_view relation_for_list(int which) {
  switch (which) {
    case 0: return relations::kHasTopic;
    case 1: return relations::kHasProduct;
    case 2: return relations::kHasTopicTag;
    default: return relations::kHasProductTag;
  }
}

std::string_view kind_for_list(int which) {
  switch (which) {
    case 0: return kinds::kTopic;
    case 1: return kinds::kProduct;
    case 2: return kinds::kTopicTag;
    default: return kinds::kProductTag;
  }
}

void add_and_record(KnowledgeGraph& graph, const Triple& t, IngestReport& report) {
  const std::size_t before = graph.triple_count();
  graph.add_triple(t);
  if (graph.triple_count() != before) report.triples.push_back(t);
}

void register_ckg_relations(KnowledgeGraph& graph) {
  for (std::string_view r : {relations::kHasResponse, relations::kHasTopic,
                             relations::kHasProduct, relations::kHasTopicTag,
                             relations::kHasProductTag, relations::kHasTerm}) {
    graph.register_relation(r);
  }
}

}  // namespace

std::string_view response_name(Response r) {
  return r == Response::kClick ? "click" : "no_click";
}

ParsedTable<InteractionRow> parse_interactions(std::istream& in) {
  const CsvTable table = read_csv(in);
  ParsedTable<InteractionRow> out;
  if (table.header.empty()) return out;
  static constexpr std::string_view kColumns[] = {"subscriber_id", "article_id", "response"};
  const auto pos = column_positions(table, kColumns, "interactions");
  std::optional<std::size_t> ts_pos;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (trim(table.header[i]) == "timestamp") ts_pos = i;
  }
  for (const CsvRecord& rec : table.records) {
    if (rec.fields.size() != table.header.size()) {
      out.issues.push_back({rec.line, "expected " + std::to_string(table.header.size()) +
                                          " fields, got " + std::to_string(rec.fields.size())});
      continue;
    }
    InteractionRow row;
    row.subscriber_key = trim(rec.fields[pos[0]]);
    row.article_key = trim(rec.fields[pos[1]]);
    const std::string response = trim(rec.fields[pos[2]]);
    if (ts_pos) row.timestamp = trim(rec.fields[*ts_pos]);
    if (row.subscriber_key.empty() || row.article_key.empty()) {
      out.issues.push_back({rec.line, "empty subscriber_id or article_id"});
      continue;
    }
    if (response == "click") {
      row.response = Response::kClick;
    } else if (response == "no_click") {
      row.response = Response::kNoClick;
    } else {
      out.issues.push_back({rec.line, "unknown response '" + response + "'"});
      continue;
    }
    if (!row.timestamp.empty() && !looks_like_iso_date(row.timestamp)) {
      out.issues.push_back({rec.line, "timestamp '" + row.timestamp + "' is not ISO-8601"});
      continue;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

ParsedTable<ArticleRecord> parse_articles(std::istream& in) {
  const CsvTable table = read_csv(in);
  ParsedTable<ArticleRecord> out;
  if (table.header.empty()) return out;
  static constexpr std::string_view kColumns[] = {"article_id", "topics",       "products",
                                                  "topic_tags", "product_tags", "text"};
  const auto pos = column_positions(table, kColumns, "articles");
  for (const CsvRecord& rec : table.records) {
    if (rec.fields.size() != table.header.size()) {
      out.issues.push_back({rec.line, "expected " + std::to_string(table.header.size()) +
                                          " fields, got " + std::to_string(rec.fields.size())});
      continue;
    }
    ArticleRecord a;
    a.article_key = trim(rec.fields[pos[0]]);
    if (a.article_key.empty()) {
      out.issues.push_back({rec.line, "empty article_id"});
      continue;
    }
    a.topics = split_list(rec.fields[pos[1]]);
    a.products = split_list(rec.fields[pos[2]]);
    a.topic_tags = split_list(rec.fields[pos[3]]);
    a.product_tags = split_list(rec.fields[pos[4]]);
    a.text = rec.fields[pos[5]];
    out.rows.push_back(std::move(a));
  }
  return out;
}

ParsedTable<InteractionRow> read_interactions_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return parse_interactions(in);
}

ParsedTable<ArticleRecord> read_articles_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return parse_articles(in);
}

void write_interactions(std::ostream& out, std::span<const InteractionRow> rows) {
  const std::vector<std::string> header = {"subscriber_id", "article_id", "response",
                                           "timestamp"};
  write_csv_record(out, header);
  for (const auto& r : rows) {
    const std::vector<std::string> fields = {r.subscriber_key, r.article_key,
                                             std::string(response_name(r.response)),
                                             r.timestamp};
    write_csv_record(out, fields);
  }
}

void write_articles(std::ostream& out, std::span<const ArticleRecord> articles) {
  const std::vector<std::string> header = {"article_id", "topics",       "products",
                                           "topic_tags", "product_tags", "text"};
  write_csv_record(out, header);
  for (const auto& a : articles) {
    const std::vector<std::string> fields = {a.article_key,        join_list(a.topics),
                                             join_list(a.products), join_list(a.topic_tags),
                                             join_list(a.product_tags), a.text};
    write_csv_record(out, fields);
  }
}

IngestReport ingest_interactions(KnowledgeGraph& graph, std::span<const InteractionRow> rows) {
  IngestReport report;
  const RelationId has_response = graph.register_relation(relations::kHasResponse);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const InteractionRow& row = rows[i];
    if (row.subscriber_key.empty() || row.article_key.empty()) {
      report.issues.push_back({i + 1, "empty subscriber or article key"});
      continue;
    }
    const EntityId user = graph.register_entity(kinds::kSubscriber, row.subscriber_key);
    const EntityId item = graph.register_entity(kinds::kArticle, row.article_key);
    if (row.response == Response::kClick) add_and_record(graph, {user, has_response, item}, report);
  }
  return report;
}

IngestReport ingest_article_metadata(KnowledgeGraph& graph,
                                     std::span<const ArticleRecord> articles) {
  IngestReport report;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    const ArticleRecord& a = articles[i];
    if (a.article_key.empty()) {
      report.issues.push_back({i + 1, "empty article key"});
      continue;
    }
    const EntityId article = graph.register_entity(kinds::kArticle, a.article_key);
    const std::vector<std::string>* lists[] = {&a.topics, &a.products, &a.topic_tags,
                                               &a.product_tags};
    for (int which = 0; which < 4; ++which) {
      const RelationId rel = graph.register_relation(relation_for_list(which));
      for (const std::string& value : *lists[which]) {
        if (value.empty()) continue;
        const EntityId target = graph.register_entity(kind_for_list(which), value);
        add_and_record(graph, {article, rel, target}, report);
      }
    }
  }
  return report;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 3 && !stopwords().contains(current)) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::map<std::string, std::vector<TermScore>> tfidf_top_terms(
    const std::map<std::string, std::string>& corpus, std::size_t k) {
  if (k == 0) throw InputError("tfidf_top_terms: k must be at least 1");
  std::map<std::string, std::vector<TermScore>> out;
  if (corpus.empty()) return out;

  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::map<std::string, std::size_t> token_totals;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& [key, text] : corpus) {
    auto& doc = counts[key];
    const auto tokens = tokenize(text);
    token_totals[key] = tokens.size();
    for (const auto& t : tokens) ++doc[t];
    for (const auto& [term, _] : doc) ++df[term];
  }

  const double n_docs = static_cast<double>(corpus.size());
  for (const auto& [key, doc] : counts) {
    std::vector<TermScore> scores;
    scores.reserve(doc.size());
    const double total = static_cast<double>(token_totals[key]);
    for (const auto& [term, count] : doc) {
      const double tf = static_cast<double>(count) / total;
      const double idf = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[term]))) + 1.0;
      scores.push_back({term, tf * idf});
    }
    std::sort(scores.begin(), scores.end(), [](const TermScore& a, const TermScore& b) {
      if (a.tfidf != b.tfidf) return a.tfidf > b.tfidf;
      return a.term < b.term;
    });
    if (scores.size() > k) scores.resize(k);
    out.emplace(key, std::move(scores));
  }
  return out;
}

std::map<std::string, std::string> article_corpus(std::span<const ArticleRecord> articles) {
  std::map<std::string, std::string> corpus;
  for (const auto& a : articles) {
    if (a.article_key.empty()) continue;
    auto [it, inserted] = corpus.try_emplace(a.article_key, a.text);
    if (!inserted && !a.text.empty()) {
      if (!it->second.empty()) it->second += ' ';
      it->second += a.text;
    }
  }
  return corpus;
}

IngestReport ingest_terms(KnowledgeGraph& graph, std::span<const ArticleRecord> articles,
                          std::size_t k) {
  IngestReport report;
  const RelationId has_term = graph.register_relation(relations::kHasTerm);
  for (std::size_t i = 0; i < articles.size(); ++i) {
    if (articles[i].article_key.empty()) {
      report.issues.push_back({i + 1, "empty article key"});
      continue;
    }
    graph.register_entity(kinds::kArticle, articles[i].article_key);
  }
  for (const auto& [key, terms] : tfidf_top_terms(article_corpus(articles), k)) {
    const EntityId article = graph.register_entity(kinds::kArticle, key);
    for (const TermScore& ts : terms) {
      const EntityId term = graph.register_entity(kinds::kTerm, ts.term);
      add_and_record(graph, {article, has_term, term}, report);
    }
  }
  return report;
}

KnowledgeGraph build_ukg(std::span<const ArticleRecord> articles, std::size_t k) {
  KnowledgeGraph graph;
  ingest_terms(graph, articles, k);
  graph.augment_reverse_edges();
  graph.freeze();
  return graph;
}

CkgBuild build_ckg(std::span<const InteractionRow> rows, std::span<const ArticleRecord> articles,
                   std::size_t k) {
  CkgBuild build;
  register_ckg_relations(build.graph);
  auto interactions = ingest_interactions(build.graph, rows);
  auto metadata = ingest_article_metadata(build.graph, articles);
  auto terms = ingest_terms(build.graph, articles, k);
  for (auto* report : {&interactions, &metadata}) {
    build.issues.insert(build.issues.end(), report->issues.begin(), report->issues.end());
  }
  build.graph.augment_reverse_edges();
  build.graph.freeze();
  return build;
}

}  // namespace pathrec
