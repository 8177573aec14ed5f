#include "unprompt/pretrain.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "unprompt/error.hpp"
#include "unprompt/numerics.hpp"
#include "unprompt/optimizer.hpp"

namespace unprompt {

void AugmentationConfig::validate() const {
    if (!(edge_removal_prob >= 0.0 && edge_removal_prob <= 1.0))
        throw Error(ErrorKind::Config, "edge_removal_prob must lie in [0, 1]");
    if (!(attr_mask_prob >= 0.0 && attr_mask_prob <= 1.0))
        throw Error(ErrorKind::Config, "attr_mask_prob must lie in [0, 1]");
}

void PretrainConfig::validate() const {
    if (epochs < 0) throw Error(ErrorKind::Config, "pretrain epochs must be non-negative");
    if (!(temperature > 0.0)) throw Error(ErrorKind::Config, "temperature must be positive");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "pretrain learning rate must be positive");
}

CorruptedView augment(const SparseMatrix& adjacency, const Matrix& attributes, const AugmentationConfig& cfg,
                      Rng& rng) {
    cfg.validate();
    std::vector<Edge> kept;
    for (Index u = 0; u < adjacency.outerSize(); ++u)
        for (SparseMatrix::InnerIterator it(adjacency, u); it; ++it)
            if (u < it.col() && !rng.bernoulli(cfg.edge_removal_prob)) kept.emplace_back(u, it.col());

    CorruptedView view;
    view.adjacency = build_adjacency(adjacency.rows(), kept);
    view.kept_columns.resize(attributes.cols());
    view.attributes = attributes;
    for (Index j = 0; j < attributes.cols(); ++j) {
        view.kept_columns(j) = !rng.bernoulli(cfg.attr_mask_prob);
        if (!view.kept_columns(j)) view.attributes.col(j).setZero();
    }
    return view;
}

CorruptedView augment(const AttributedGraph& g, const UnifiedAttributes& unified, const AugmentationConfig& cfg,
                      Rng& rng) {
    return augment(g.adjacency, unified.values, cfg, rng);
}

namespace {

struct SoftmaxRows {
    Vector loss;    // per-anchor ℓ
    Matrix p_pos;   // probabilities over the cross-view row (includes the positive)
    Matrix p_self;  // probabilities over the same-view row, zero diagonal
};

// Row i of the anchor: logits cross.row(i) and self.row(i) without entry i.
SoftmaxRows infonce_rows(const Matrix& cross, Matrix self) {
    self.diagonal().setConstant(-std::numeric_limits<double>::infinity());
    const Vector shift = cross.rowwise().maxCoeff().cwiseMax(self.rowwise().maxCoeff());
    SoftmaxRows out;
    out.p_pos = (cross.colwise() - shift).array().exp().matrix();
    out.p_self = (self.colwise() - shift).array().exp().matrix();
    const Vector total = out.p_pos.rowwise().sum() + out.p_self.rowwise().sum();
    const Vector inv = total.cwiseInverse();
    out.p_pos = inv.asDiagonal() * out.p_pos;
    out.p_self = inv.asDiagonal() * out.p_self;
    out.loss = (shift - cross.diagonal()).array() + total.array().log();
    return out;
}

Matrix elu(const Matrix& x) {
    return x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Matrix elu_derivative(const Matrix& x) {
    return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
}

}  // namespace

ContrastiveResult contrastive_loss_with_grad(const Matrix& view1, const Matrix& view2, double temperature) {
    if (view1.rows() != view2.rows() || view1.cols() != view2.cols())
        throw Error(ErrorKind::Shape, "contrastive_loss: views have different shapes");
    if (!(temperature > 0.0)) throw Error(ErrorKind::Config, "temperature must be positive");
    const Index n = view1.rows();
    ContrastiveResult out;
    if (n == 0) {
        out.grad_view1 = Matrix::Zero(0, view1.cols());
        out.grad_view2 = Matrix::Zero(0, view2.cols());
        return out;
    }

    const auto u = normalize_rows(view1);
    const auto v = normalize_rows(view2);
    const Matrix s12 = u.unit * v.unit.transpose() / temperature;
    const Matrix s11 = u.unit * u.unit.transpose() / temperature;
    const Matrix s22 = v.unit * v.unit.transpose() / temperature;

    const SoftmaxRows a = infonce_rows(s12, s11);
    const SoftmaxRows b = infonce_rows(s12.transpose(), s22);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    out.loss = scale * (a.loss.sum() + b.loss.sum());

    Matrix g12 = a.p_pos + b.p_pos.transpose();
    g12.diagonal().array() -= 2.0;
    g12 *= scale;
    const Matrix g11 = scale * a.p_self;
    const Matrix g22 = scale * b.p_self;

    const Matrix grad_u = (g12 * v.unit + (g11 + g11.transpose()) * u.unit) / temperature;
    const Matrix grad_v = (g12.transpose() * u.unit + (g22 + g22.transpose()) * v.unit) / temperature;
    out.grad_view1 = normalize_rows_backward(u, grad_u);
    out.grad_view2 = normalize_rows_backward(v, grad_v);
    return out;
}

double contrastive_loss(const Matrix& view1, const Matrix& view2, double temperature) {
    return contrastive_loss_with_grad(view1, view2, temperature).loss;
}

ProjectionHead ProjectionHead::init(Index in_width, Index width, Rng& rng) {
    const double b1 = 1.0 / std::sqrt(static_cast<double>(in_width));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(width));
    return {rng.uniform_matrix(in_width, width, -b1, b1), Matrix::Zero(1, width),
            rng.uniform_matrix(width, width, -b2, b2), Matrix::Zero(1, width)};
}

Matrix ProjectionHead::apply(const Matrix& x) const {
    const Matrix hidden = elu((x * w1).rowwise() + b1.row(0));
    return (hidden * w2).rowwise() + b2.row(0);
}

PretrainGradients pretrain_objective(const RowNormalizedAdjacency& original_adj, const Matrix& original_attrs,
                                     const RowNormalizedAdjacency& corrupted_adj, const Matrix& corrupted_attrs,
                                     const Matrix& weight, const ProjectionHead& head, double temperature) {
    // The encoder output has rank at most d′, so W·w1 is formed first.
    const Matrix mixed_corrupted = sparse_matmul(corrupted_adj, corrupted_attrs);
    const Matrix mixed_original = sparse_matmul(original_adj, original_attrs);
    const Matrix fused = weight * head.w1;

    const Matrix pre_c = (mixed_corrupted * fused).rowwise() + head.b1.row(0);
    const Matrix pre_o = (mixed_original * fused).rowwise() + head.b1.row(0);
    const Matrix hid_c = elu(pre_c);
    const Matrix hid_o = elu(pre_o);
    const Matrix out_c = (hid_c * head.w2).rowwise() + head.b2.row(0);
    const Matrix out_o = (hid_o * head.w2).rowwise() + head.b2.row(0);

    const auto c = contrastive_loss_with_grad(out_c, out_o, temperature);

    PretrainGradients g;
    g.loss = c.loss;
    g.head.w2 = hid_c.transpose() * c.grad_view1 + hid_o.transpose() * c.grad_view2;
    g.head.b2 = c.grad_view1.colwise().sum() + c.grad_view2.colwise().sum();
    const Matrix d_pre_c = ((c.grad_view1 * head.w2.transpose()).array() * elu_derivative(pre_c).array()).matrix();
    const Matrix d_pre_o = ((c.grad_view2 * head.w2.transpose()).array() * elu_derivative(pre_o).array()).matrix();
    const Matrix mixed_grad = mixed_corrupted.transpose() * d_pre_c + mixed_original.transpose() * d_pre_o;
    g.head.w1 = weight.transpose() * mixed_grad;
    g.head.b1 = d_pre_c.colwise().sum() + d_pre_o.colwise().sum();
    g.weight = mixed_grad * head.w1.transpose();
    return g;
}

PretrainResult pretrain(const AttributedGraph& g, const UnifiedAttributes& unified, const AugmentationConfig& aug,
                        const PretrainConfig& cfg, const Matrix& initial_weight, Rng& rng,
                        const EpochCallback& on_epoch) {
    aug.validate();
    cfg.validate();
    if (initial_weight.rows() != unified.values.cols())
        throw Error(ErrorKind::Shape, "initial weight rows must equal d_prime");

    const Index hidden = initial_weight.cols();
    const Index width = cfg.head_width > 0 ? cfg.head_width : hidden;
    Rng head_rng = rng.fork(0x4845414455ull);
    PretrainResult result{initial_weight, {}, ProjectionHead::init(hidden, width, head_rng)};
    if (cfg.epochs == 0) return result;
    ProjectionHead& head = result.head;
    const RowNormalizedAdjacency original_adj = row_normalize(g.adjacency);

    Adam adam(cfg.learning_rate);
    result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const CorruptedView view = augment(g, unified, aug, rng);
        const RowNormalizedAdjacency corrupted_adj = row_normalize(view.adjacency);
        const auto grads = pretrain_objective(original_adj, unified.values, corrupted_adj, view.attributes,
                                              result.weight, head, cfg.temperature);
        if (!std::isfinite(grads.loss) || !grads.weight.allFinite())
            throw Error(ErrorKind::NonFinite, "pretraining diverged at epoch " + std::to_string(epoch) +
                                                  " (loss " + std::to_string(grads.loss) + ")");
        result.loss_history.push_back(grads.loss);
        if (on_epoch) on_epoch(epoch, grads.loss);

        adam.next_step();
        adam.update(0, result.weight, grads.weight);
        adam.update(1, head.w1, grads.head.w1);
        adam.update(2, head.b1, grads.head.b1);
        adam.update(3, head.w2, grads.head.w2);
        adam.update(4, head.b2, grads.head.b2);
    }
    return result;
}

}  // namespace unprompt
