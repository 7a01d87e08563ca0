#include "pathrec/embeddings.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>

#include "json.hpp"

#include "pathrec/binary_io.h"
#include "pathrec/errors.h"
#include "pathrec/rng.h"

namespace pathrec {
namespace {

constexpr std::string_view kMagic = "KGEB";
constexpr std::uint8_t kVersion = 1;

void require_kind(const EmbeddingTable& table, ModelKind kind, const char* op) {
  if (table.kind() != kind) {
    throw ContractError(std::string(op) + " called on a " + model_kind_name(table.kind()) +
                        " table");
  }
}

// W_r[a][c] = sum_b core[a,b,c] r[b]
RowMatrix contract_relation(const EmbeddingTable& table, RelationId rel) {
  const int d = table.dim();
  const auto r = table.relation(rel);
  RowMatrix w = RowMatrix::Zero(d, d);
  const auto& core = table.core();
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const double rb = r[b];
      const double* slice = &core[(static_cast<std::size_t>(a) * d + b) * d];
      for (int c = 0; c < d; ++c) w(a, c) += slice[c] * rb;
    }
  }
  return w;
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::optional<Triple> corrupt(const KnowledgeGraph& graph, const Triple& pos, Rng& rng) {
  constexpr int kMaxTries = 20;
  const auto n = graph.entity_count();
  for (int i = 0; i < kMaxTries; ++i) {
    Triple c = pos;
    const bool head = rng.uniform() < 0.5;
    const EntityId e{static_cast<std::uint32_t>(rng.below(n))};
    (head ? c.head : c.tail) = e;
    if (!graph.has_triple(c)) return c;
  }
  return std::nullopt;
}

void normalize_entities(EmbeddingTable& table) {
  auto& m = table.entity_matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm > 0) m.row(i) /= norm;
  }
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
  return kind == ModelKind::kTransE ? "transe" : "tucker";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "transe") return ModelKind::kTransE;
  if (name == "tucker") return ModelKind::kTucker;
  throw InputError("unknown embedding model '" + name + "' (expected transe or tucker)");
}

EmbeddingTable::EmbeddingTable(ModelKind kind, int dim, std::size_t n_entities,
                               std::size_t n_relations)
    : kind_(kind),
      dim_(dim),
      entities_(RowMatrix::Zero(static_cast<Eigen::Index>(n_entities), dim)),
      relations_(RowMatrix::Zero(static_cast<Eigen::Index>(n_relations), dim)) {
  if (dim <= 0) throw InputError("embedding dim must be positive");
  if (kind == ModelKind::kTucker) core_.assign(static_cast<std::size_t>(dim) * dim * dim, 0.0);
}

Eigen::Ref<const Eigen::RowVectorXd> EmbeddingTable::entity(EntityId e) const {
  if (e.index >= entity_count()) {
    throw InputError("no embedding for entity id " + std::to_string(e.index));
  }
  return entities_.row(e.index);
}

Eigen::Ref<Eigen::RowVectorXd> EmbeddingTable::entity(EntityId e) {
  if (e.index >= entity_count()) {
    throw InputError("no embedding for entity id " + std::to_string(e.index));
  }
  return entities_.row(e.index);
}

Eigen::Ref<const Eigen::RowVectorXd> EmbeddingTable::relation(RelationId r) const {
  if (r.index >= relation_count()) {
    throw InputError("no embedding for relation id " + std::to_string(r.index));
  }
  return relations_.row(r.index);
}

Eigen::Ref<Eigen::RowVectorXd> EmbeddingTable::relation(RelationId r) {
  if (r.index >= relation_count()) {
    throw InputError("no embedding for relation id " + std::to_string(r.index));
  }
  return relations_.row(r.index);
}

bool EmbeddingTable::all_finite() const {
  if (!entities_.allFinite() || !relations_.allFinite()) return false;
  for (double v : core_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  return kind_ == other.kind_ && dim_ == other.dim_ && entities_ == other.entities_ &&
         relations_ == other.relations_ && core_ == other.core_;
}

double transe_score(const EmbeddingTable& table, EntityId h, RelationId r, EntityId t) {
  require_kind(table, ModelKind::kTransE, "transe_score");
  return -(table.entity(h) + table.relation(r) - table.entity(t)).norm();
}

double tucker_score(const EmbeddingTable& table, EntityId h, RelationId r, EntityId t) {
  require_kind(table, ModelKind::kTucker, "tucker_score");
  const auto vh = table.entity(h);
  const auto vt = table.entity(t);
  const RowMatrix w = contract_relation(table, r);
  return vh.dot(vt * w.transpose());
}

double triple_score(const EmbeddingTable& table, const Triple& t) {
  return table.kind() == ModelKind::kTransE ? transe_score(table, t.head, t.rel, t.tail)
                                            : tucker_score(table, t.head, t.rel, t.tail);
}

double user_affinity(const EmbeddingTable& table, EntityId user, RelationId response,
                     EntityId e) {
  return (table.entity(user) + table.relation(response)).dot(table.entity(e));
}

Eigen::RowVectorXd& SparseGradient::entity(EntityId e, int dim) {
  auto [it, inserted] = entities.try_emplace(e.index);
  if (inserted) it->second = Eigen::RowVectorXd::Zero(dim);
  return it->second;
}

Eigen::RowVectorXd& SparseGradient::relation(RelationId r, int dim) {
  auto [it, inserted] = relations.try_emplace(r.index);
  if (inserted) it->second = Eigen::RowVectorXd::Zero(dim);
  return it->second;
}

double transe_margin_loss(const EmbeddingTable& table, const Triple& pos, const Triple& neg,
                          double margin) {
  return std::max(0.0, margin - triple_score(table, pos) + triple_score(table, neg));
}

double transe_margin_loss_grad(const EmbeddingTable& table, const Triple& pos,
                               const Triple& neg, double margin, double scale,
                               SparseGradient& grad) {
  require_kind(table, ModelKind::kTransE, "transe_margin_loss_grad");
  const int d = table.dim();
  const Eigen::RowVectorXd diff_pos =
      table.entity(pos.head) + table.relation(pos.rel) - table.entity(pos.tail);
  const Eigen::RowVectorXd diff_neg =
      table.entity(neg.head) + table.relation(neg.rel) - table.entity(neg.tail);
  const double dist_pos = diff_pos.norm();
  const double dist_neg = diff_neg.norm();
  const double loss = margin + dist_pos - dist_neg;
  if (loss <= 0) return 0.0;
  // d||x||/dx = x / ||x||, taken as zero at the origin.
  if (dist_pos > 0) {
    const Eigen::RowVectorXd u = diff_pos * (scale / dist_pos);
    grad.entity(pos.head, d) += u;
    grad.relation(pos.rel, d) += u;
    grad.entity(pos.tail, d) -= u;
  }
  if (dist_neg > 0) {
    const Eigen::RowVectorXd u = diff_neg * (scale / dist_neg);
    grad.entity(neg.head, d) -= u;
    grad.relation(neg.rel, d) -= u;
    grad.entity(neg.tail, d) += u;
  }
  return loss;
}

void tucker_score_grad(const EmbeddingTable& table, const Triple& t, double scale,
                       SparseGradient& grad) {
  require_kind(table, ModelKind::kTucker, "tucker_score_grad");
  const int d = table.dim();
  const auto vh = table.entity(t.head);
  const auto vr = table.relation(t.rel);
  const auto vt = table.entity(t.tail);
  const RowMatrix w = contract_relation(table, t.rel);
  grad.entity(t.head, d) += scale * (vt * w.transpose());
  grad.entity(t.tail, d) += scale * (vh * w);

  const auto& core = table.core();
  Eigen::RowVectorXd dr = Eigen::RowVectorXd::Zero(d);
  if (grad.core.empty()) grad.core.assign(core.size(), 0.0);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const std::size_t base = (static_cast<std::size_t>(a) * d + b) * d;
      double acc = 0.0;
      const double hr = vh[a] * vr[b] * scale;
      for (int c = 0; c < d; ++c) {
        acc += core[base + c] * vt[c];
        grad.core[base + c] += hr * vt[c];
      }
      dr[b] += vh[a] * acc;
    }
  }
  grad.relation(t.rel, d) += scale * dr;
}

double tucker_bce_loss(const EmbeddingTable& table, const Triple& t, double label) {
  const double s = tucker_score(table, t.head, t.rel, t.tail);
  return softplus(s) - label * s;
}

double tucker_bce_loss_grad(const EmbeddingTable& table, const Triple& t, double label,
                            double scale, SparseGradient& grad) {
  const double s = tucker_score(table, t.head, t.rel, t.tail);
  tucker_score_grad(table, t, scale * (sigmoid(s) - label), grad);
  return softplus(s) - label * s;
}

void apply_gradient(EmbeddingTable& table, const SparseGradient& grad, double learning_rate) {
  for (const auto& [row, g] : grad.entities) table.entity(EntityId{row}) -= learning_rate * g;
  for (const auto& [row, g] : grad.relations) table.relation(RelationId{row}) -= learning_rate * g;
  if (!grad.core.empty()) {
    auto& core = table.core();
    for (std::size_t i = 0; i < core.size(); ++i) core[i] -= learning_rate * grad.core[i];
  }
}

EmbeddingTable init_embeddings(const KnowledgeGraph& graph, const EmbeddingConfig& config) {
  EmbeddingTable table(config.model, config.dim, graph.entity_count(), graph.relation_count());
  Rng rng(derive_seed(config.seed, "init"));
  const double bound = 0.5 / std::sqrt(static_cast<double>(config.dim));
  auto fill = [&](RowMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
    }
  };
  fill(table.entity_matrix());
  fill(table.relation_matrix());
  for (double& v : table.core()) v = rng.uniform(-bound, bound);
  if (config.model == ModelKind::kTransE) normalize_entities(table);
  return table;
}

TrainedEmbeddings train_embeddings(const KnowledgeGraph& graph, const EmbeddingConfig& config) {
  if (graph.triple_count() == 0) throw InputError("cannot train embeddings on an empty graph");
  if (!graph.frozen()) throw ContractError("train_embeddings requires a frozen graph");
  if (config.dim <= 0 || config.epochs <= 0 || config.batch_size <= 0 ||
      config.learning_rate < 0 || config.margin <= 0 || config.negatives_per_positive <= 0) {
    throw InputError("embedding training config values must be positive");
  }

  TrainedEmbeddings out{init_embeddings(graph, config), {}};
  EmbeddingTable& table = out.table;
  const std::vector<Triple> triples(graph.triples().begin(), graph.triples().end());
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, "train"));
  const bool transe = config.model == ModelKind::kTransE;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_terms = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<std::pair<Triple, Triple>> pairs;
      for (std::size_t i = start; i < end; ++i) {
        const Triple& pos = triples[order[i]];
        for (int n = 0; n < config.negatives_per_positive; ++n) {
          if (auto neg = corrupt(graph, pos, rng)) pairs.emplace_back(pos, *neg);
        }
      }
      SparseGradient grad;
      if (transe) {
        if (pairs.empty()) continue;
        const double scale = 1.0 / static_cast<double>(pairs.size());
        for (const auto& [pos, neg] : pairs) {
          epoch_loss += transe_margin_loss_grad(table, pos, neg, config.margin, scale, grad);
        }
        epoch_terms += pairs.size();
      } else {
        const std::size_t n_terms = (end - start) + pairs.size();
        const double scale = 1.0 / static_cast<double>(n_terms);
        for (std::size_t i = start; i < end; ++i) {
          epoch_loss += tucker_bce_loss_grad(table, triples[order[i]], 1.0, scale, grad);
        }
        for (const auto& pair : pairs) {
          epoch_loss += tucker_bce_loss_grad(table, pair.second, 0.0, scale, grad);
        }
        epoch_terms += n_terms;
      }
      apply_gradient(table, grad, config.learning_rate);
    }
    if (transe) normalize_entities(table);
    out.loss_trace.push_back(epoch_terms ? epoch_loss / static_cast<double>(epoch_terms) : 0.0);
  }
  return out;
}

void write_embeddings(const EmbeddingTable& table, std::ostream& out) {
  binary::write_magic(out, kMagic);
  binary::write_u8(out, kVersion);
  binary::write_u8(out, static_cast<std::uint8_t>(table.kind()));
  binary::write_u32(out, static_cast<std::uint32_t>(table.dim()));
  binary::write_u32(out, static_cast<std::uint32_t>(table.entity_count()));
  binary::write_u32(out, static_cast<std::uint32_t>(table.relation_count()));
  for (const RowMatrix* m : {&table.entity_matrix(), &table.relation_matrix()}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) binary::write_f64(out, (*m)(i, j));
    }
  }
  for (double v : table.core()) binary::write_f64(out, v);
}

EmbeddingTable read_embeddings(std::istream& in) {
  binary::expect_magic(in, kMagic);
  const auto version = binary::read_u8(in);
  if (version != kVersion) {
    throw InputError("unsupported embedding file version " + std::to_string(version));
  }
  const auto kind_byte = binary::read_u8(in);
  if (kind_byte > 1) throw InputError("unknown embedding model byte");
  const auto dim = binary::read_u32(in);
  const auto n_ent = binary::read_u32(in);
  const auto n_rel = binary::read_u32(in);
  if (dim == 0 || dim > 4096) throw InputError("implausible embedding dim");
  EmbeddingTable table(static_cast<ModelKind>(kind_byte), static_cast<int>(dim), n_ent, n_rel);
  for (RowMatrix* m : {&table.entity_matrix(), &table.relation_matrix()}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = binary::read_f64(in);
    }
  }
  for (double& v : table.core()) v = binary::read_f64(in);
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  write_embeddings(table, out);
  if (!out) throw InputError("failed writing " + path);
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_embeddings(in);
}

std::string embeddings_to_json(const EmbeddingTable& table, const KnowledgeGraph& graph) {
  nlohmann::ordered_json doc;
  doc["model"] = model_kind_name(table.kind());
  doc["dim"] = table.dim();
  auto row_to_json = [](const auto& row) {
    return std::vector<double>(row.data(), row.data() + row.size());
  };
  auto& ents = doc["entities"] = nlohmann::ordered_json::object();
  for (std::uint32_t e = 0; e < table.entity_count() && e < graph.entity_count(); ++e) {
    ents[graph.kind(EntityId{e}) + ":" + graph.key(EntityId{e})] =
        row_to_json(table.entity(EntityId{e}));
  }
  auto& rels = doc["relations"] = nlohmann::ordered_json::object();
  for (std::uint32_t r = 0; r < table.relation_count() && r < graph.relation_count(); ++r) {
    rels[graph.relation_name(RelationId{r})] = row_to_json(table.relation(RelationId{r}));
  }
  if (!table.core().empty()) doc["core"] = table.core();
  return doc.dump(2);
}

}  // namespace pathrec
