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


#include "catex/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catex/error.hpp"

namespace catex {

namespace {

// Modified Gram-Schmidt over the columns; true when every column keeps a
// non-negligible residual.
bool full_column_rank(const Matrix& w)
{
    const std::size_t rows = w.rows();
    const std::size_t cols = w.cols();
    if (rows < cols) {
        return false;
    }
    std::vector<std::vector<double>> basis;
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<double> v(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            v[r] = w(r, c);
        }
        const double original = norm(std::span<const double>(v));
        for (const auto& b : basis) {
            const double proj = dot(std::span<const double>(v), std::span<const double>(b));
            for (std::size_t r = 0; r < rows; ++r) {
                v[r] -= proj * b[r];
            }
        }
        const double residual = norm(std::span<const double>(v));
        if (original == 0.0 || residual < 1e-8 * original) {
            return false;
        }
        for (auto& x : v) {
            x /= residual;
        }
        basis.push_back(std::move(v));
    }
    return true;
}

} // namespace

EncoderParams EncoderParams::mean_pool_linear(std::size_t word_dim, std::size_t feature_dim, Rng& rng)
{
    CATEX_CHECK(word_dim > 0 && feature_dim > 0, ErrorCode::InvalidSpec, "encoder dimensions must be positive");
    Matrix w(word_dim, feature_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(word_dim));
    for (auto& x : w.data()) {
        x = static_cast<float>(scale * rng.normal());
    }
    return from_weights(EncoderKind::MeanPoolLinear, std::move(w));
}

EncoderParams EncoderParams::identity(std::size_t dim)
{
    CATEX_CHECK(dim > 0, ErrorCode::InvalidSpec, "encoder dimension must be positive");
    Matrix w(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        w(i, i) = 1.0f;
    }
    return EncoderParams(EncoderKind::Identity, std::move(w));
}

EncoderParams EncoderParams::from_weights(EncoderKind kind, Matrix weights)
{
    switch (kind) {
    case EncoderKind::MeanPoolLinear:
        CATEX_CHECK(full_column_rank(weights), ErrorCode::RankDeficient,
                    "MeanPoolLinear weights of shape " + std::to_string(weights.rows()) + "x"
                        + std::to_string(weights.cols()) + " are not full column rank");
        return EncoderParams(kind, std::move(weights));
    case EncoderKind::Identity: {
        CATEX_CHECK(weights.rows() == weights.cols() && weights.rows() > 0, ErrorCode::ShapeMismatch,
                    "Identity encoder needs square weights");
        for (std::size_t r = 0; r < weights.rows(); ++r) {
            for (std::size_t c = 0; c < weights.cols(); ++c) {
                CATEX_CHECK(weights(r, c) == (r == c ? 1.0f : 0.0f), ErrorCode::ShapeMismatch,
                            "Identity encoder weights are not the identity");
            }
        }
        return EncoderParams(kind, std::move(weights));
    }
    }
    throw Error(ErrorCode::InvalidSpec, "unknown encoder kind " + std::to_string(static_cast<int>(kind)));
}

void EncoderParams::check_inputs(const Matrix& words, std::span<const float> class_embedding) const
{
    CATEX_CHECK(words.rows() >= 1, ErrorCode::ShapeMismatch, "context must hold at least one word");
    CATEX_CHECK(words.cols() == word_dim(), ErrorCode::DimensionMismatch,
                "word dimension " + std::to_string(words.cols()) + ", encoder expects " + std::to_string(word_dim()));
    CATEX_CHECK(class_embedding.size() == word_dim(), ErrorCode::DimensionMismatch,
                "class embedding dimension " + std::to_string(class_embedding.size()) + ", encoder expects "
                    + std::to_string(word_dim()));
}

std::vector<double> EncoderParams::pooled(const Matrix& words, std::span<const float> class_embedding) const
{
    const std::size_t dw = word_dim();
    std::vector<double> p(class_embedding.begin(), class_embedding.end());
    for (std::size_t j = 0; j < words.rows(); ++j) {
        const auto w = words.row(j);
        for (std::size_t i = 0; i < dw; ++i) {
            p[i] += w[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(words.rows() + 1);
    for (auto& x : p) {
        x *= inv;
    }
    return p;
}

std::vector<double> EncoderParams::project(std::span<const double> p) const
{
    if (kind_ == EncoderKind::Identity) {
        return {p.begin(), p.end()};
    }
    std::vector<double> u(feature_dim(), 0.0);
    for (std::size_t i = 0; i < word_dim(); ++i) {
        const auto w = weights_.row(i);
        for (std::size_t j = 0; j < u.size(); ++j) {
            u[j] += p[i] * w[j];
        }
    }
    return u;
}

std::vector<double> EncoderParams::encode(const Matrix& words, std::span<const float> class_embedding) const
{
    check_inputs(words, class_embedding);
    const auto u = project(pooled(words, class_embedding));
    return normalize(std::span<const double>(u));
}

std::vector<double> EncoderParams::encode_grad(const Matrix& words, std::span<const float> class_embedding,
                                               std::span<const double> upstream) const
{
    check_inputs(words, class_embedding);
    CATEX_CHECK(upstream.size() == feature_dim(), ErrorCode::DimensionMismatch,
                "upstream gradient dimension " + std::to_string(upstream.size()));

    const auto u = project(pooled(words, class_embedding));
    const double len = norm(std::span<const double>(u));
    CATEX_CHECK(len >= 1e-12, ErrorCode::ZeroVector, "pooled context encodes to the zero vector");

    // Through normalization: the tangent-space projection of upstream, over |u|.
    double radial = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        radial += upstream[j] * u[j];
    }
    radial /= len;
    std::vector<double> du(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        du[j] = (upstream[j] - radial * u[j] / len) / len;
    }

    // Through the linear map.
    std::vector<double> dp(word_dim(), 0.0);
    if (kind_ == EncoderKind::Identity) {
        dp = du;
    } else {
        for (std::size_t i = 0; i < word_dim(); ++i) {
            const auto w = weights_.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < du.size(); ++j) {
                acc += w[j] * du[j];
            }
            dp[i] = acc;
        }
    }

    // Through the mean: every word receives the same share.
    const double inv = 1.0 / static_cast<double>(words.rows() + 1);
    std::vector<double> grad(words.rows() * word_dim());
    for (std::size_t j = 0; j < words.rows(); ++j) {
        for (std::size_t i = 0; i < word_dim(); ++i) {
            grad[j * word_dim() + i] = dp[i] * inv;
        }
    }
    return grad;
}

Matrix perturb_context(const ContextPair& ctx, const Perturbation& p, std::span<const ContextPair> all_contexts,
                       std::span<const float> mask_embedding, Rng& rng)
{
    const std::size_t m = ctx.perceptual.rows();
    CATEX_CHECK(p.position < m, ErrorCode::InvalidPosition,
                "position " + std::to_string(p.position) + " outside context of length " + std::to_string(m));

    Matrix out = ctx.perceptual;
    auto target = out.row(p.position);
    switch (p.kind) {
    case PerturbKind::Mask:
        CATEX_CHECK(mask_embedding.size() == target.size(), ErrorCode::DimensionMismatch,
                    "mask embedding dimension " + std::to_string(mask_embedding.size()));
        std::copy(mask_embedding.begin(), mask_embedding.end(), target.begin());
        break;
    case PerturbKind::Noise:
        CATEX_CHECK(p.sigma >= 0.0, ErrorCode::InvalidSpec, "noise sigma must be non-negative");
        for (auto& x : target) {
            x = static_cast<float>(p.sigma * rng.normal());
        }
        break;
    case PerturbKind::Swap: {
        CATEX_CHECK(p.donor_category < all_contexts.size(), ErrorCode::UnknownDonor,
                    "donor category " + std::to_string(p.donor_category) + " not among "
                        + std::to_string(all_contexts.size()) + " contexts");
        const Matrix& donor = all_contexts[p.donor_category].perceptual;
        CATEX_CHECK(p.donor_position < donor.rows(), ErrorCode::InvalidPosition,
                    "donor position " + std::to_string(p.donor_position) + " outside donor context");
        CATEX_CHECK(donor.cols() == out.cols(), ErrorCode::DimensionMismatch, "donor word dimension differs");
        const auto src = donor.row(p.donor_position);
        std::copy(src.begin(), src.end(), target.begin());
        break;
    }
    }
    return out;
}

Perturbation random_perturbation(std::size_t context_len, std::uint32_t self, std::uint32_t num_categories,
                                 const PerturbationConfig& cfg, Rng& rng)
{
    CATEX_CHECK(context_len > 0, ErrorCode::InvalidSpec, "empty context");
    std::vector<PerturbKind> kinds;
    if (cfg.allow_mask) kinds.push_back(PerturbKind::Mask);
    if (cfg.allow_noise) kinds.push_back(PerturbKind::Noise);
    if (cfg.allow_swap) kinds.push_back(PerturbKind::Swap);
    CATEX_CHECK(!kinds.empty(), ErrorCode::InvalidSpec, "no perturbation kind enabled");

    Perturbation p;
    p.kind = kinds[rng.uniform_index(kinds.size())];
    p.position = rng.uniform_index(context_len);
    p.sigma = cfg.noise_sigma;
    if (p.kind == PerturbKind::Swap) {
        if (num_categories > 1) {
            const auto pick = static_cast<std::uint32_t>(rng.uniform_index(num_categories - 1));
            p.donor_category = pick >= self ? pick + 1 : pick;
        } else {
            p.donor_category = self;
        }
        p.donor_position = rng.uniform_index(context_len);
    }
    return p;
}

} // namespace catex
