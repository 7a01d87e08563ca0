#ifndef PATHREC_EMBEDDINGS_H_
#define PATHREC_EMBEDDINGS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pathrec/graph.h"

namespace pathrec {

enum class ModelKind : std::uint8_t { kTransE = 0, kTucker = 1 };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense vectors for every entity and relation id of one graph. TuckER tables
// also carry a dim x dim x dim core tensor stored row-major as [head][rel][tail].
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(ModelKind kind, int dim, std::size_t n_entities, std::size_t n_relations);

  ModelKind kind() const { return kind_; }
  int dim() const { return dim_; }
  std::size_t entity_count() const { return static_cast<std::size_t>(entities_.rows()); }
  std::size_t relation_count() const { return static_cast<std::size_t>(relations_.rows()); }

  // Throws InputError for ids outside the table.
  Eigen::Ref<const Eigen::RowVectorXd> entity(EntityId e) const;
  Eigen::Ref<Eigen::RowVectorXd> entity(EntityId e);
  Eigen::Ref<const Eigen::RowVectorXd> relation(RelationId r) const;
  Eigen::Ref<Eigen::RowVectorXd> relation(RelationId r);

  RowMatrix& entity_matrix() { return entities_; }
  const RowMatrix& entity_matrix() const { return entities_; }
  RowMatrix& relation_matrix() { return relations_; }
  const RowMatrix& relation_matrix() const { return relations_; }
  std::vector<double>& core() { return core_; }
  const std::vector<double>& core() const { return core_; }
  double core_at(int a, int b, int c) const {
    return core_[(static_cast<std::size_t>(a) * dim_ + b) * dim_ + c];
  }

  bool all_finite() const;
  bool operator==(const EmbeddingTable& other) const;

 private:
  ModelKind kind_ = ModelKind::kTransE;
  int dim_ = 0;
  RowMatrix entities_;
  RowMatrix relations_;
  std::vector<double> core_;
};

struct EmbeddingConfig {
  ModelKind model = ModelKind::kTransE;
  int dim = 300;
  int epochs = 100;
  double learning_rate = 0.01;
  double margin = 1.0;  // TransE only
  int negatives_per_positive = 4;
  int batch_size = 128;
  std::uint64_t seed = 1;
};

struct TrainedEmbeddings {
  EmbeddingTable table;
  std::vector<double> loss_trace;  // mean loss per epoch
};

// -||h + r - t||_2; higher is more plausible.
double transe_score(const EmbeddingTable& table, EntityId h, RelationId r, EntityId t);
// sum_abc core[a,b,c] h[a] r[b] t[c]
double tucker_score(const EmbeddingTable& table, EntityId h, RelationId r, EntityId t);
// Dispatches on the table's model kind.
double triple_score(const EmbeddingTable& table, const Triple& t);

// f(u, e) = <v_u + v_response, v_e>: the user-conditioned preference signal
// used for action pruning and terminal rewards.
double user_affinity(const EmbeddingTable& table, EntityId user, RelationId response,
                     EntityId e);

// Gradient restricted to the rows a loss term touches. Row maps are ordered so
// applying a gradient is deterministic.
struct SparseGradient {
  std::map<std::uint32_t, Eigen::RowVectorXd> entities;
  std::map<std::uint32_t, Eigen::RowVectorXd> relations;
  std::vector<double> core;  // dense, TuckER only

  Eigen::RowVectorXd& entity(EntityId e, int dim);
  Eigen::RowVectorXd& relation(RelationId r, int dim);
};

// max(0, margin - score(pos) + score(neg)).
double transe_margin_loss(const EmbeddingTable& table, const Triple& pos, const Triple& neg,
                          double margin);
// Returns the loss and adds scale * d(loss)/d(params) into grad.
double transe_margin_loss_grad(const EmbeddingTable& table, const Triple& pos,
                               const Triple& neg, double margin, double scale,
                               SparseGradient& grad);

// Adds scale * d(tucker_score)/d(params) into grad.
void tucker_score_grad(const EmbeddingTable& table, const Triple& t, double scale,
                       SparseGradient& grad);
// Binary cross-entropy of sigmoid(tucker_score) against label in {0, 1}.
double tucker_bce_loss(const EmbeddingTable& table, const Triple& t, double label);
double tucker_bce_loss_grad(const EmbeddingTable& table, const Triple& t, double label,
                            double scale, SparseGradient& grad);

// table -= learning_rate * grad
void apply_gradient(EmbeddingTable& table, const SparseGradient& grad, double learning_rate);

// Seeded uniform init in [-0.5/sqrt(dim), 0.5/sqrt(dim)]; TransE entity rows
// are then normalized to unit length.
EmbeddingTable init_embeddings(const KnowledgeGraph& graph, const EmbeddingConfig& config);

// Mini-batch SGD. TransE: margin ranking loss with one corrupted head or tail
// per negative; entity rows renormalized after every epoch. TuckER: binary
// cross-entropy on positives and sampled negatives. Corruptions that form a
// true triple are resampled.
TrainedEmbeddings train_embeddings(const KnowledgeGraph& graph, const EmbeddingConfig& config);

// Binary layout: "KGEB", version, model kind, dim, entity count, relation
// count (u32 little-endian each), then little-endian doubles: entity rows,
// relation rows, and the TuckER core.
void write_embeddings(const EmbeddingTable& table, std::ostream& out);
EmbeddingTable read_embeddings(std::istream& in);
void save_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);

// Debug export keyed by entity/relation labels.
std::string embeddings_to_json(const EmbeddingTable& table, const KnowledgeGraph& graph);

}  // namespace pathrec

#endif  // PATHREC_EMBEDDINGS_H_
