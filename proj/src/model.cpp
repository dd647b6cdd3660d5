#include "semsr/model.hpp"

#include <cmath>

namespace semsr {

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::base: return "base";
    case Variant::sem_i: return "sem-i";
    case Variant::sem_f: return "sem-f";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "base") return Variant::base;
  if (text == "sem-i") return Variant::sem_i;
  if (text == "sem-f") return Variant::sem_f;
  throw UsageError("unknown variant '" + std::string(text) + "' (expected base, sem-i or sem-f)");
}

Model::Model(const Model& other)
    : config(other.config),
      items(other.items),
      backbone(other.backbone ? other.backbone->clone() : nullptr),
      semantic_attention(other.semantic_attention),
      fuse_session(other.fuse_session),
      fuse_items(other.fuse_items) {}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * unit_uniform(rng) - 1.0);
  return m;
}

}  // namespace

Model Model::create(const ModelConfig& config, Matrix item_table, std::uint64_t seed) {
  if (config.n == 0 || config.d1 == 0) throw UsageError("model needs n >= 1 and d1 >= 1");
  if (config.fused() && (config.d2 == 0 || config.d == 0)) throw UsageError("sem-f needs d2 >= 1 and d >= 1");
  if (!(config.scale > 0.0)) throw UsageError("scale must be positive");
  Model m;
  m.config = config;
  m.items = std::move(item_table);
  std::mt19937_64 rng(derive_seed(seed, "params"));
  m.backbone = make_backbone(config.backbone, config.d1, rng);
  if (config.fused()) {
    const auto d1 = static_cast<Eigen::Index>(config.d1);
    const auto d2 = static_cast<Eigen::Index>(config.d2);
    const auto d = static_cast<Eigen::Index>(config.d);
    m.semantic_attention = AttentionParams::random(config.d2, rng, 1.0 / std::sqrt(static_cast<double>(d2)));
    const double fan = 1.0 / std::sqrt(static_cast<double>(d1 + d2));
    m.fuse_session = uniform_matrix(d, d1 + d2, fan, rng);
    m.fuse_items = uniform_matrix(d, d1 + d2, fan, rng);
  }
  m.validate();
  return m;
}

Model Model::zeros_like() const {
  Model z;
  z.config = config;
  z.items = Matrix::Zero(items.rows(), items.cols());
  z.backbone = backbone->zeros_like();
  if (config.fused()) {
    z.semantic_attention = AttentionParams::zeros(semantic_attention.width());
    z.fuse_session = Matrix::Zero(fuse_session.rows(), fuse_session.cols());
    z.fuse_items = Matrix::Zero(fuse_items.rows(), fuse_items.cols());
  }
  return z;
}

std::vector<TensorRef> Model::tensors() {
  std::vector<TensorRef> out;
  out.push_back(tensor_ref("item_embedding", items));
  backbone->append_tensors("backbone.", out);
  if (config.fused()) {
    semantic_attention.append_tensors("semantic.", out);
    out.push_back(tensor_ref("W4", fuse_session));
    out.push_back(tensor_ref("W5", fuse_items));
  }
  return out;
}

void Model::validate() const {
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto d1 = static_cast<Eigen::Index>(config.d1);
  if (items.rows() != n || items.cols() != d1) {
    throw UsageError("item table is " + std::to_string(items.rows()) + "x" + std::to_string(items.cols()) +
                     ", expected " + std::to_string(n) + "x" + std::to_string(d1));
  }
  if (!backbone || backbone->width() != config.d1) throw UsageError("backbone width does not match d1");
  if (config.fused()) {
    const auto d2 = static_cast<Eigen::Index>(config.d2);
    const auto d = static_cast<Eigen::Index>(config.d);
    semantic_attention.validate("semantic");
    if (semantic_attention.width() != config.d2) throw UsageError("semantic attention width does not match d2");
    if (fuse_session.rows() != d || fuse_session.cols() != d1 + d2 || fuse_items.rows() != d ||
        fuse_items.cols() != d1 + d2) {
      throw UsageError("fusion matrices must be d x (d1 + d2)");
    }
  }
}

void Model::require_finite_params() const {
  for (const auto& t : const_cast<Model&>(*this).tensors()) {
    for (double v : t.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite value in tensor '" + t.name + "'");
    }
  }
}

Matrix initial_item_table(const ModelConfig& config, const SemanticTable* semantic, std::optional<InitMode> init,
                          std::uint64_t seed) {
  const InitMode mode = init.value_or(config.variant == Variant::sem_i ? InitMode::semantic_projected : InitMode::random);
  if (mode == InitMode::random) return init_random_table(config.n, config.d1, derive_seed(seed, "items"));
  if (!semantic) throw UsageError("semantic initialization needs a semantic table");
  if (semantic->rows() != config.n) throw UsageError("semantic table rows do not match the catalog size");
  return init_projected_table(*semantic, fit_projection(*semantic, config.d1));
}

Matrix normalized_item_rows(const Matrix& items) {
  Matrix out = items;
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= std::max(out.row(i).norm(), 1e-12);
  return out;
}

Matrix fused_item_rows(const Model& model, const Matrix& semantic) {
  const auto d1 = static_cast<Eigen::Index>(model.config.d1);
  const auto d2 = static_cast<Eigen::Index>(model.config.d2);
  if (semantic.cols() != d2 || semantic.rows() != model.items.rows()) {
    throw UsageError("semantic table shape does not match the model");
  }
  Matrix fused = model.items * model.fuse_items.leftCols(d1).transpose();
  fused.noalias() += semantic * model.fuse_items.rightCols(d2).transpose();
  return fused;
}

Scorer::Scorer(const Model& model, const SemanticTable* semantic) : model_(model), semantic_(semantic) {
  model.validate();
  model.require_finite_params();
  if (model.config.fused()) {
    if (!semantic) throw UsageError("sem-f scoring needs the semantic table");
    item_matrix_ = fused_item_rows(model, semantic->values());
    require_finite("fused_items", item_matrix_);
  } else {
    item_matrix_ = normalized_item_rows(model.items);
  }
}

Vector Scorer::logits(Prefix prefix) const {
  if (prefix.empty()) throw DataError("cannot score an empty prefix");
  const Vector session_m = model_.backbone->encode(prefix, model_.items);
  require_finite("session_embedding_m", session_m);
  Vector out;
  if (model_.config.fused()) {
    const Vector session_l = encode_semantic_session(prefix, semantic_->values(), model_.semantic_attention).session;
    require_finite("session_embedding_l", session_l);
    Vector cat(session_m.size() + session_l.size());
    cat << session_m, session_l;
    const Vector session = model_.fuse_session * cat;
    out = item_matrix_ * session;
  } else {
    out = model_.config.scale * (item_matrix_ * session_m);
  }
  require_finite("logits", out);
  return out;
}

Vector Scorer::probabilities(Prefix prefix) const { return softmax(logits(prefix)); }

RankedList Scorer::recommend(Prefix prefix, std::size_t k) const { return top_k(logits(prefix), k); }

Vector score_all(Prefix prefix, const Model& model, const SemanticTable* semantic) {
  return Scorer(model, semantic).probabilities(prefix);
}

}  // namespace semsr
