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


#include "catex/model.hpp"

#include <string>

#include "catex/error.hpp"

namespace catex {

namespace {

void axpy(std::vector<double>& y, const std::vector<double>& x, double scale)
{
    CATEX_CHECK(y.size() == x.size(), ErrorCode::ShapeMismatch, "gradient length mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += scale * x[i];
    }
}

double sumsq(const std::vector<double>& v)
{
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return acc;
}

} // namespace

void Gradients::add(const Gradients& other, double scale)
{
    CATEX_CHECK(categories.size() == other.categories.size(), ErrorCode::ShapeMismatch,
                "gradient category count mismatch");
    for (std::size_t k = 0; k < categories.size(); ++k) {
        axpy(categories[k].perceptual, other.categories[k].perceptual, scale);
        CATEX_CHECK(categories[k].spurious.size() == other.categories[k].spurious.size(),
                    ErrorCode::ShapeMismatch, "spurious gradient count mismatch");
        for (std::size_t i = 0; i < categories[k].spurious.size(); ++i) {
            axpy(categories[k].spurious[i], other.categories[k].spurious[i], scale);
        }
    }
}

double Gradients::squared_norm() const
{
    double acc = 0.0;
    for (const auto& c : categories) {
        acc += sumsq(c.perceptual);
        for (const auto& s : c.spurious) {
            acc += sumsq(s);
        }
    }
    return acc;
}

void ModelState::refresh_cache(std::size_t category)
{
    const ContextPair& ctx = contexts.at(category);
    perceptual_features[category] = encoder.encode(ctx.perceptual, ctx.class_embedding);
    auto& spurious = spurious_features[category];
    spurious.resize(ctx.spurious.size());
    for (std::size_t i = 0; i < ctx.spurious.size(); ++i) {
        spurious[i] = encoder.encode(ctx.spurious[i], ctx.class_embedding);
    }
}

void ModelState::refresh_cache()
{
    perceptual_features.resize(contexts.size());
    spurious_features.resize(contexts.size());
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        refresh_cache(k);
    }
}

bool ModelState::cache_coherent() const
{
    if (perceptual_features.size() != contexts.size() || spurious_features.size() != contexts.size()) {
        return false;
    }
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        const ContextPair& ctx = contexts[k];
        if (perceptual_features[k] != encoder.encode(ctx.perceptual, ctx.class_embedding)) {
            return false;
        }
        if (spurious_features[k].size() != ctx.spurious.size()) {
            return false;
        }
        for (std::size_t i = 0; i < ctx.spurious.size(); ++i) {
            if (spurious_features[k][i] != encoder.encode(ctx.spurious[i], ctx.class_embedding)) {
                return false;
            }
        }
    }
    return true;
}

Gradients ModelState::zero_word_gradients() const
{
    Gradients g;
    g.categories.resize(contexts.size());
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        const ContextPair& ctx = contexts[k];
        g.categories[k].perceptual.assign(ctx.perceptual.data().size(), 0.0);
        g.categories[k].spurious.resize(ctx.spurious.size());
        for (std::size_t i = 0; i < ctx.spurious.size(); ++i) {
            g.categories[k].spurious[i].assign(ctx.spurious[i].data().size(), 0.0);
        }
    }
    return g;
}

Gradients ModelState::zero_feature_gradients() const
{
    Gradients g;
    g.categories.resize(contexts.size());
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        g.categories[k].perceptual.assign(feature_dim(), 0.0);
        g.categories[k].spurious.assign(contexts[k].spurious.size(), std::vector<double>(feature_dim(), 0.0));
    }
    return g;
}

void ModelState::validate() const
{
    CATEX_CHECK(mask_embedding.size() == word_dim(), ErrorCode::ShapeMismatch,
                "mask embedding has dimension " + std::to_string(mask_embedding.size()));
    const std::size_t m = context_len();
    const std::size_t ns = num_spurious();
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        const ContextPair& ctx = contexts[k];
        const std::string where = "category " + std::to_string(k);
        CATEX_CHECK(ctx.perceptual.rows() == m && m >= 1, ErrorCode::ShapeMismatch, where + ": context length");
        CATEX_CHECK(ctx.perceptual.cols() == word_dim(), ErrorCode::ShapeMismatch, where + ": word dimension");
        CATEX_CHECK(ctx.spurious.size() == ns && ns >= 1, ErrorCode::ShapeMismatch, where + ": spurious count");
        for (const auto& s : ctx.spurious) {
            CATEX_CHECK(s.rows() == m && s.cols() == word_dim(), ErrorCode::ShapeMismatch,
                        where + ": spurious context shape");
        }
        CATEX_CHECK(ctx.class_embedding.size() == word_dim(), ErrorCode::ShapeMismatch,
                    where + ": class embedding dimension");
    }
}

ModelState init_model(EncoderParams encoder, std::vector<float> mask_embedding, const Matrix& class_embeddings,
                      const ModelShape& shape, Rng& rng)
{
    CATEX_CHECK(shape.context_len >= 1, ErrorCode::InvalidSpec, "context_len must be at least 1");
    CATEX_CHECK(shape.num_spurious >= 1, ErrorCode::InvalidSpec, "num_spurious must be at least 1");
    CATEX_CHECK(class_embeddings.rows() == 0 || class_embeddings.cols() == encoder.word_dim(),
                ErrorCode::DimensionMismatch, "class embeddings do not match the encoder word dimension");

    ModelState state;
    state.encoder = std::move(encoder);
    state.mask_embedding = std::move(mask_embedding);
    const std::size_t dw = state.word_dim();

    auto draw = [&](std::size_t rows) {
        Matrix words(rows, dw);
        for (auto& x : words.data()) {
            x = static_cast<float>(shape.init_std * rng.normal());
        }
        return words;
    };

    for (std::size_t k = 0; k < class_embeddings.rows(); ++k) {
        ContextPair ctx;
        ctx.category_id = static_cast<std::uint32_t>(k);
        ctx.perceptual = draw(shape.context_len);
        for (std::size_t i = 0; i < shape.num_spurious; ++i) {
            ctx.spurious.push_back(draw(shape.context_len));
        }
        const auto row = class_embeddings.row(k);
        ctx.class_embedding.assign(row.begin(), row.end());
        state.contexts.push_back(std::move(ctx));
    }
    state.validate();
    state.refresh_cache();
    state.velocity = state.zero_word_gradients();
    return state;
}

Gradients backprop_features(const ModelState& state, const Gradients& feature_grads)
{
    CATEX_CHECK(feature_grads.categories.size() == state.contexts.size(), ErrorCode::ShapeMismatch,
                "feature gradient category count mismatch");
    Gradients out = state.zero_word_gradients();
    for (std::size_t k = 0; k < state.contexts.size(); ++k) {
        const ContextPair& ctx = state.contexts[k];
        const ContextGrad& fg = feature_grads.categories[k];
        if (sumsq(fg.perceptual) > 0.0) {
            out.categories[k].perceptual = state.encoder.encode_grad(ctx.perceptual, ctx.class_embedding, fg.perceptual);
        }
        for (std::size_t i = 0; i < ctx.spurious.size(); ++i) {
            if (sumsq(fg.spurious[i]) > 0.0) {
                out.categories[k].spurious[i] =
                    state.encoder.encode_grad(ctx.spurious[i], ctx.class_embedding, fg.spurious[i]);
            }
        }
    }
    return out;
}

} // namespace catex
