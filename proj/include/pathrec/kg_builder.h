#ifndef PATHREC_KG_BUILDER_H_
#define PATHREC_KG_BUILDER_H_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathrec/graph.h"

namespace pathrec {

namespace relations {
inline constexpr std::string_view kHasResponse = "has_response";
inline constexpr std::string_view kHasTopic = "has_topic";
inline constexpr std::string_view kHasProduct = "has_product";
inline constexpr std::string_view kHasTopicTag = "has_topic_tag";
inline constexpr std::string_view kHasProductTag = "has_product_tag";
inline constexpr std::string_view kHasTerm = "has_term";
}  // namespace relations

enum class Response { kClick, kNoClick };

struct InteractionRow {
  std::string subscriber_key;
  std::string article_key;
  Response response = Response::kClick;
  std::string timestamp;  // ISO-8601 date, may be empty
};

struct ArticleRecord {
  std::string article_key;
  std::string text;
  std::vector<std::string> topics;
  std::vector<std::string> products;
  std::vector<std::string> topic_tags;
  std::vector<std::string> product_tags;
};

struct TermScore {
  std::string term;
  double tfidf = 0.0;
};

// `row` is the CSV line number when parsing files, else the 1-based position
// in the input list.
struct RowIssue {
  std::size_t row = 0;
  std::string message;
};

template <typename Row>
struct ParsedTable {
  std::vector<Row> rows;
  std::vector<RowIssue> issues;
};

std::string_view response_name(Response r);

// interactions.csv: subscriber_id,article_id,response,timestamp
ParsedTable<InteractionRow> parse_interactions(std::istream& in);
// articles.csv: article_id,topics,products,topic_tags,product_tags,text
// List cells are ';'-separated.
ParsedTable<ArticleRecord> parse_articles(std::istream& in);
ParsedTable<InteractionRow> read_interactions_file(const std::string& path);
ParsedTable<ArticleRecord> read_articles_file(const std::string& path);

void write_interactions(std::ostream& out, std::span<const InteractionRow> rows);
void write_articles(std::ostream& out, std::span<const ArticleRecord> articles);

struct IngestReport {
  std::vector<Triple> triples;  // newly added, in insertion order
  std::vector<RowIssue> issues;
  std::size_t skipped() const { return issues.size(); }
};

// Registers the subscriber and article of every valid row; only clicks add a
// has_response edge. Invalid rows are reported and skipped.
IngestReport ingest_interactions(KnowledgeGraph& graph, std::span<const InteractionRow> rows);
IngestReport ingest_article_metadata(KnowledgeGraph& graph,
                                     std::span<const ArticleRecord> articles);

// Lowercase, split on non-alphanumeric bytes, drop tokens shorter than three
// characters and English stopwords.
std::vector<std::string> tokenize(std::string_view text);

// tf = count / tokens in doc, idf = ln((1 + N) / (1 + df)) + 1. Each list is
// sorted by score descending, then term ascending, and holds at most k terms.
std::map<std::string, std::vector<TermScore>> tfidf_top_terms(
    const std::map<std::string, std::string>& corpus, std::size_t k);

// Text per article key; duplicate records have their text concatenated.
std::map<std::string, std::string> article_corpus(std::span<const ArticleRecord> articles);

// Adds article -has_term-> term edges for the top-k terms of every article.
IngestReport ingest_terms(KnowledgeGraph& graph, std::span<const ArticleRecord> articles,
                          std::size_t k);

// Text-only graph: articles and their top-k TF-IDF terms, reverse-augmented
// and frozen.
KnowledgeGraph build_ukg(std::span<const ArticleRecord> articles, std::size_t k);

struct CkgBuild {
  KnowledgeGraph graph;
  std::vector<RowIssue> issues;
};

// Interactions, article metadata and top-k terms over one entity table,
// reverse-augmented and frozen.
CkgBuild build_ckg(std::span<const InteractionRow> rows, std::span<const ArticleRecord> articles,
                   std::size_t k);

}  // namespace pathrec

#endif  // PATHREC_KG_BUILDER_H_
