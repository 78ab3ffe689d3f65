// Copyright 2026 The CATEX Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "catex/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "catex/error.hpp"

namespace catex {

namespace {

// log(1 + e^z) without overflow.
double softplus(double z)
{
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z)
{
    return 1.0 / (1.0 + std::exp(-z));
}

void add_scaled(std::vector<double>& y, std::span<const float> x, double scale)
{
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += scale * static_cast<double>(x[i]);
    }
}

void check_batch(const LabeledFeatureSet& batch, const ModelState& state, const char* what)
{
    CATEX_CHECK(batch.labels.size() == batch.size(), ErrorCode::ShapeMismatch,
                std::string(what) + ": label count differs from row count");
    CATEX_CHECK(batch.size() == 0 || batch.dim() == state.feature_dim(), ErrorCode::DimensionMismatch,
                std::string(what) + ": feature dimension " + std::to_string(batch.dim()) + ", model expects "
                    + std::to_string(state.feature_dim()));
    for (std::uint32_t y : batch.labels) {
        CATEX_CHECK(y < state.num_categories(), ErrorCode::LabelOutOfRange,
                    std::string(what) + ": label " + std::to_string(y) + " with "
                        + std::to_string(state.num_categories()) + " categories");
    }
}

// Index of the most similar spurious feature of `category`; lowest index on ties.
std::size_t best_spurious(const ModelState& state, std::uint32_t category, std::span<const float> x, double& sim)
{
    const auto& feats = state.spurious_features[category];
    std::size_t best = 0;
    sim = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < feats.size(); ++i) {
        const double s = dot(std::span<const double>(feats[i]), x);
        if (s > sim) {
            sim = s;
            best = i;
        }
    }
    return best;
}

} // namespace

void TrainConfig::validate() const
{
    CATEX_CHECK(lr0 > 0.0, ErrorCode::BadConfig, "lr0 must be positive");
    CATEX_CHECK(momentum >= 0.0 && momentum < 1.0, ErrorCode::BadConfig, "momentum must lie in [0, 1)");
    CATEX_CHECK(batch_size >= 1, ErrorCode::BadConfig, "batch_size must be at least 1");
    CATEX_CHECK(logit_scale > 0.0, ErrorCode::BadConfig, "logit_scale must be positive");
    CATEX_CHECK(ood_loss_weight >= 0.0, ErrorCode::BadConfig, "ood_loss_weight must be non-negative");
    CATEX_CHECK(ortho_weight >= 0.0, ErrorCode::BadConfig, "ortho_weight must be non-negative");
    CATEX_CHECK(num_spurious >= 1, ErrorCode::BadConfig, "num_spurious must be at least 1");
    CATEX_CHECK(context_len >= 1, ErrorCode::BadConfig, "context_len must be at least 1");
    CATEX_CHECK(word_dim >= 1, ErrorCode::BadConfig, "word_dim must be at least 1");
    CATEX_CHECK(init_std > 0.0, ErrorCode::BadConfig, "init_std must be positive");
    synthesis.validate();
}

LossResult loss_id_features(const LabeledFeatureSet& batch, const ModelState& state, double logit_scale)
{
    CATEX_CHECK(batch.size() > 0, ErrorCode::EmptyBatch, "loss_id needs at least one sample");
    check_batch(batch, state, "loss_id");

    const std::uint32_t C = state.num_categories();
    const std::size_t ns = state.num_spurious();
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    LossResult out;
    out.grads = state.zero_feature_gradients();
    std::vector<double> perc(C);
    std::vector<double> spur(C * ns);

    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto x = batch.features.row(n);
        const std::uint32_t y = batch.labels[n];

        double top = -std::numeric_limits<double>::infinity();
        for (std::uint32_t k = 0; k < C; ++k) {
            perc[k] = logit_scale * dot(std::span<const double>(state.perceptual_features[k]), x);
            top = std::max(top, perc[k]);
            if (k == y) {
                continue;
            }
            for (std::size_t i = 0; i < ns; ++i) {
                spur[k * ns + i] = logit_scale * dot(std::span<const double>(state.spurious_features[k][i]), x);
                top = std::max(top, spur[k * ns + i]);
            }
        }

        // The denominator runs over every perceptual term and the spurious
        // terms of the other categories only.
        double z = 0.0;
        for (std::uint32_t k = 0; k < C; ++k) {
            z += std::exp(perc[k] - top);
            if (k == y) {
                continue;
            }
            for (std::size_t i = 0; i < ns; ++i) {
                z += std::exp(spur[k * ns + i] - top);
            }
        }
        out.value += ((top - perc[y]) + std::log(z)) * inv_n;

        for (std::uint32_t k = 0; k < C; ++k) {
            const double p = std::exp(perc[k] - top) / z - (k == y ? 1.0 : 0.0);
            add_scaled(out.grads.categories[k].perceptual, x, p * logit_scale * inv_n);
            if (k == y) {
                continue;
            }
            for (std::size_t i = 0; i < ns; ++i) {
                const double q = std::exp(spur[k * ns + i] - top) / z;
                add_scaled(out.grads.categories[k].spurious[i], x, q * logit_scale * inv_n);
            }
        }
    }
    return out;
}

LossResult loss_ood_features(const LabeledFeatureSet& id_batch, const LabeledFeatureSet& spurious_batch,
                             const ModelState& state, double logit_scale)
{
    check_batch(id_batch, state, "loss_ood (ID)");
    check_batch(spurious_batch, state, "loss_ood (spurious)");

    LossResult out;
    out.grads = state.zero_feature_gradients();

    // ID samples should prefer the perceptual feature of their own category.
    if (id_batch.size() > 0) {
        const double inv_n = 1.0 / static_cast<double>(id_batch.size());
        for (std::size_t n = 0; n < id_batch.size(); ++n) {
            const auto x = id_batch.features.row(n);
            const std::uint32_t y = id_batch.labels[n];
            double sp = 0.0;
            const std::size_t i = best_spurious(state, y, x, sp);
            const double margin = logit_scale * (dot(std::span<const double>(state.perceptual_features[y]), x) - sp);
            out.value += softplus(-margin) * inv_n;
            const double g = -sigmoid(-margin) * logit_scale * inv_n;
            add_scaled(out.grads.categories[y].perceptual, x, g);
            add_scaled(out.grads.categories[y].spurious[i], x, -g);
        }
    }

    // Syntheses should prefer the spurious feature of their generating category.
    if (spurious_batch.size() > 0) {
        const double inv_n = 1.0 / static_cast<double>(spurious_batch.size());
        for (std::size_t n = 0; n < spurious_batch.size(); ++n) {
            const auto z = spurious_batch.features.row(n);
            const std::uint32_t y = spurious_batch.labels[n];
            double sp = 0.0;
            const std::size_t i = best_spurious(state, y, z, sp);
            const double margin = logit_scale * (sp - dot(std::span<const double>(state.perceptual_features[y]), z));
            out.value += softplus(-margin) * inv_n;
            const double g = -sigmoid(-margin) * logit_scale * inv_n;
            add_scaled(out.grads.categories[y].spurious[i], z, g);
            add_scaled(out.grads.categories[y].perceptual, z, -g);
        }
    }
    return out;
}

LossResult ortho_penalty_features(const ModelState& state)
{
    LossResult out;
    out.grads = state.zero_feature_gradients();
    const std::uint32_t C = state.num_categories();
    if (C == 0 || state.num_spurious() < 2) {
        return out;
    }
    const double inv_c = 1.0 / static_cast<double>(C);
    for (std::uint32_t k = 0; k < C; ++k) {
        const auto& feats = state.spurious_features[k];
        auto& grads = out.grads.categories[k].spurious;
        for (std::size_t i = 0; i < feats.size(); ++i) {
            for (std::size_t j = i + 1; j < feats.size(); ++j) {
                const double c = dot(std::span<const double>(feats[i]), std::span<const double>(feats[j]));
                out.value += c * c * inv_c;
                for (std::size_t t = 0; t < feats[i].size(); ++t) {
                    grads[i][t] += 2.0 * c * feats[j][t] * inv_c;
                    grads[j][t] += 2.0 * c * feats[i][t] * inv_c;
                }
            }
        }
    }
    return out;
}

LossResult loss_id(const LabeledFeatureSet& batch, const ModelState& state, double logit_scale)
{
    LossResult r = loss_id_features(batch, state, logit_scale);
    r.grads = backprop_features(state, r.grads);
    return r;
}

LossResult loss_ood(const LabeledFeatureSet& id_batch, const LabeledFeatureSet& spurious_batch,
                    const ModelState& state, double logit_scale)
{
    LossResult r = loss_ood_features(id_batch, spurious_batch, state, logit_scale);
    r.grads = backprop_features(state, r.grads);
    return r;
}

LossResult ortho_penalty(const ModelState& state)
{
    LossResult r = ortho_penalty_features(state);
    r.grads = backprop_features(state, r.grads);
    return r;
}

double empirical_risk(const LabeledFeatureSet& id_set, const LabeledFeatureSet& ood_set, const ModelState& state,
                      const ScoreOptions& opts)
{
    CATEX_CHECK(id_set.size() > 0, ErrorCode::EmptySet, "empirical_risk needs ID samples");
    CATEX_CHECK(ood_set.size() > 0, ErrorCode::EmptySet, "empirical_risk needs OOD samples");

    auto prefers = [&](std::span<const float> x, bool spurious_side) {
        const ScoreReport rep = score(x, state, opts);
        const std::uint32_t k = rep.predicted;
        return spurious_side ? rep.similarity[k] < rep.spurious[k] : rep.similarity[k] > rep.spurious[k];
    };

    std::size_t id_errors = 0;
    for (std::size_t i = 0; i < id_set.size(); ++i) {
        id_errors += prefers(id_set.features.row(i), true) ? 1 : 0;
    }
    std::size_t ood_errors = 0;
    for (std::size_t i = 0; i < ood_set.size(); ++i) {
        ood_errors += prefers(ood_set.features.row(i), false) ? 1 : 0;
    }
    return static_cast<double>(id_errors) / static_cast<double>(id_set.size())
         + static_cast<double>(ood_errors) / static_cast<double>(ood_set.size());
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0)
{
    if (total_steps == 0) {
        return lr0;
    }
    const double frac = static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
    return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * frac));
}

void sgd_step(ModelState& state, const Gradients& grads, double lr, double momentum)
{
    CATEX_CHECK(grads.categories.size() == state.contexts.size(), ErrorCode::ShapeMismatch,
                "gradients for " + std::to_string(grads.categories.size()) + " categories, model has "
                    + std::to_string(state.contexts.size()));
    if (state.velocity.categories.size() != state.contexts.size()) {
        state.velocity = state.zero_word_gradients();
    }

    auto update = [&](Matrix& words, std::vector<double>& velocity, const std::vector<double>& g) {
        CATEX_CHECK(g.size() == words.data().size() && velocity.size() == g.size(), ErrorCode::ShapeMismatch,
                    "gradient shape does not match the context words");
        auto w = words.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            velocity[i] = momentum * velocity[i] + g[i];
            w[i] = static_cast<float>(static_cast<double>(w[i]) - lr * velocity[i]);
        }
    };

    for (std::size_t k = 0; k < state.contexts.size(); ++k) {
        ContextPair& ctx = state.contexts[k];
        const ContextGrad& g = grads.categories[k];
        ContextGrad& v = state.velocity.categories[k];
        CATEX_CHECK(g.spurious.size() == ctx.spurious.size(), ErrorCode::ShapeMismatch,
                    "spurious gradient count mismatch");
        update(ctx.perceptual, v.perceptual, g.perceptual);
        for (std::size_t i = 0; i < ctx.spurious.size(); ++i) {
            update(ctx.spurious[i], v.spurious[i], g.spurious[i]);
        }
        state.refresh_cache(k);
    }
}

LossResult joint_objective(const LabeledFeatureSet& id_batch, const LabeledFeatureSet& spurious_batch,
                           const ModelState& state, const TrainConfig& cfg, StepLosses* parts)
{
    LossResult id = loss_id_features(id_batch, state, cfg.logit_scale);
    LossResult ood = loss_ood_features(id_batch, spurious_batch, state, cfg.logit_scale);

    LossResult total;
    total.grads = std::move(id.grads);
    total.grads.add(ood.grads, cfg.ood_loss_weight);
    total.value = id.value + cfg.ood_loss_weight * ood.value;

    double ortho_value = 0.0;
    if (cfg.ortho_weight > 0.0 && state.num_spurious() >= 2) {
        LossResult ortho = ortho_penalty_features(state);
        total.grads.add(ortho.grads, cfg.ortho_weight);
        ortho_value = ortho.value;
        total.value += cfg.ortho_weight * ortho.value;
    }
    total.grads = backprop_features(state, total.grads);

    if (parts != nullptr) {
        *parts = StepLosses{id.value, ood.value, ortho_value, total.value};
    }
    return total;
}

std::string format_progress(const EpochStats& stats)
{
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch=%zu loss_id=%.6f loss_ood=%.6f lr=%.8g", stats.epoch, stats.loss_id,
                  stats.loss_ood, stats.lr);
    return buf;
}

EncoderParams make_encoder(const TrainConfig& cfg, std::size_t feature_dim)
{
    Rng rng = Rng(cfg.encoder_seed).derive(1);
    return EncoderParams::mean_pool_linear(cfg.word_dim, feature_dim, rng);
}

std::vector<float> make_mask_embedding(const TrainConfig& cfg)
{
    Rng rng = Rng(cfg.encoder_seed).derive(2);
    std::vector<float> mask(cfg.word_dim);
    for (auto& x : mask) {
        x = static_cast<float>(0.02 * rng.normal());
    }
    return mask;
}

Matrix random_class_embeddings(std::size_t num_categories, const TrainConfig& cfg, Rng& rng)
{
    Matrix out(num_categories, cfg.word_dim);
    for (auto& x : out.data()) {
        x = static_cast<float>(cfg.init_std * rng.normal());
    }
    return out;
}

Matrix project_class_embeddings(const Matrix& raw, const TrainConfig& cfg)
{
    if (raw.cols() == cfg.word_dim) {
        return raw;
    }
    CATEX_CHECK(raw.cols() > 0, ErrorCode::DimensionMismatch, "class embeddings have zero width");
    Rng rng = Rng(cfg.encoder_seed).derive(3);
    Matrix proj(raw.cols(), cfg.word_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(raw.cols()));
    for (auto& x : proj.data()) {
        x = static_cast<float>(scale * rng.normal());
    }
    Matrix out(raw.rows(), cfg.word_dim);
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        for (std::size_t c = 0; c < cfg.word_dim; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < raw.cols(); ++i) {
                acc += static_cast<double>(raw(r, i)) * proj(i, c);
            }
            out(r, c) = static_cast<float>(acc);
        }
    }
    return out;
}

Matrix anchor_class_embeddings(const EncoderParams& encoder, const Matrix& anchors, double scale)
{
    const std::size_t d = encoder.feature_dim();
    const std::size_t dw = encoder.word_dim();
    CATEX_CHECK(anchors.cols() == d, ErrorCode::DimensionMismatch,
                "anchor width " + std::to_string(anchors.cols()) + ", encoder produces " + std::to_string(d));
    if (encoder.kind() == EncoderKind::Identity) {
        Matrix out = anchors;
        for (auto& v : out.data()) {
            v = static_cast<float>(scale * v);
        }
        return out;
    }

    Eigen::MatrixXd w(dw, d);
    for (std::size_t i = 0; i < dw; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = encoder.weights()(i, j);
        }
    }
    Eigen::MatrixXd rhs(d, anchors.rows());
    for (std::size_t k = 0; k < anchors.rows(); ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            rhs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = scale * anchors(k, j);
        }
    }
    const Eigen::LLT<Eigen::MatrixXd> gram(w.transpose() * w);
    CATEX_CHECK(gram.info() == Eigen::Success, ErrorCode::RankDeficient, "encoder Gram matrix is not positive definite");
    const Eigen::MatrixXd emb = w * gram.solve(rhs);

    Matrix out(anchors.rows(), dw);
    for (std::size_t k = 0; k < anchors.rows(); ++k) {
        for (std::size_t i = 0; i < dw; ++i) {
            out(k, i) = static_cast<float>(emb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
        }
    }
    return out;
}

ModelState init_task_model(const TrainConfig& cfg, std::size_t feature_dim, const Matrix& class_embeddings,
                           Rng& rng)
{
    cfg.validate();
    ModelShape shape;
    shape.context_len = cfg.context_len;
    shape.num_spurious = cfg.num_spurious;
    shape.init_std = cfg.init_std;
    return init_model(make_encoder(cfg, feature_dim), make_mask_embedding(cfg),
                      project_class_embeddings(class_embeddings, cfg), shape, rng);
}

ModelState train_model(ModelState state, const LabeledFeatureSet& id_set, const TrainConfig& cfg, Rng& rng,
                       const EpochObserver& observer)
{
    cfg.validate();
    state.validate();
    if (cfg.epochs == 0) {
        return state;
    }
    CATEX_CHECK(id_set.size() > 0, ErrorCode::EmptySet, "training set is empty");
    CATEX_CHECK(id_set.num_categories == state.num_categories(), ErrorCode::ShapeMismatch,
                "training set has " + std::to_string(id_set.num_categories) + " categories, model has "
                    + std::to_string(state.num_categories()));
    check_batch(id_set, state, "training set");

    const auto pools = build_pools(id_set, cfg.synthesis.k);
    const std::size_t n = id_set.size();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * steps_per_epoch;
    const Rng synthesis_root = rng.derive(0x5e57);

    std::vector<std::size_t> order(n);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
            LabeledFeatureSet batch;
            batch.num_categories = id_set.num_categories;
            batch.features = Matrix(0, id_set.dim());
            const std::size_t end = std::min(n, (b + 1) * cfg.batch_size);
            for (std::size_t i = b * cfg.batch_size; i < end; ++i) {
                batch.add(id_set.features.row(order[i]), id_set.labels[order[i]]);
            }

            LabeledFeatureSet spurious;
            spurious.num_categories = id_set.num_categories;
            spurious.features = Matrix(0, id_set.dim());
            for (std::uint32_t k = 0; k < state.num_categories(); ++k) {
                if (pools[k].points.rows() < 2) {
                    continue;
                }
                Rng stream = synthesis_root.derive(step, k);
                const LabeledFeatureSet syn = synthesize_spurious(state, pools[k], k, cfg.synthesis, stream);
                for (std::size_t i = 0; i < syn.size(); ++i) {
                    spurious.add(syn.features.row(i), syn.labels[i]);
                }
            }

            const double lr = cosine_lr(step, total_steps, cfg.lr0);
            StepLosses parts;
            const LossResult objective = joint_objective(batch, spurious, state, cfg, &parts);
            sgd_step(state, objective.grads, lr, cfg.momentum);

            stats.loss_id += parts.loss_id / static_cast<double>(steps_per_epoch);
            stats.loss_ood += parts.loss_ood / static_cast<double>(steps_per_epoch);
            stats.lr = lr;
            stats.syntheses += spurious.size();
        }
        if (observer) {
            observer(stats);
        }
    }
    return state;
}

ModelState train_task(const LabeledFeatureSet& id_set, const TrainConfig& cfg, Rng& rng,
                      const EpochObserver& observer)
{
    CATEX_CHECK(id_set.num_categories >= 1, ErrorCode::EmptySet, "training set declares no categories");
    CATEX_CHECK(id_set.size() == 0 || id_set.dim() >= 1, ErrorCode::ShapeMismatch, "zero feature dimension");
    const std::size_t dim = id_set.dim();
    CATEX_CHECK(dim >= 1, ErrorCode::EmptySet, "training set is empty");
    const Matrix classes = random_class_embeddings(id_set.num_categories, cfg, rng);
    ModelState state = init_task_model(cfg, dim, classes, rng);
    return train_model(std::move(state), id_set, cfg, rng, observer);
}

} // namespace catex
