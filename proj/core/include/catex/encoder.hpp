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


#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "catex/embedding.hpp"
#include "catex/rng.hpp"

namespace catex {

enum class EncoderKind : std::uint8_t {
    MeanPoolLinear = 0,
    Identity = 1,
};

/// Frozen text encoder: a word sequence plus a class embedding is mean-pooled,
/// mapped through a fixed linear layer and projected onto the unit sphere.
/// Weights are immutable once built; no operation here ever updates them.
class EncoderParams {
public:
    EncoderParams() = default;

    /// Random Gaussian weights of shape word_dim x feature_dim. Requires
    /// word_dim >= feature_dim so the map can have full column rank.
    static EncoderParams mean_pool_linear(std::size_t word_dim, std::size_t feature_dim, Rng& rng);
    static EncoderParams identity(std::size_t dim);

    /// Rebuilds from stored weights; validates rank for MeanPoolLinear and
    /// that Identity weights are in fact the identity.
    static EncoderParams from_weights(EncoderKind kind, Matrix weights);

    EncoderKind kind() const noexcept { return kind_; }
    std::size_t word_dim() const noexcept { return weights_.rows(); }
    std::size_t feature_dim() const noexcept { return weights_.cols(); }
    const Matrix& weights() const noexcept { return weights_; }

    /// Unit text feature for `words` (m x word_dim) and the class embedding.
    std::vector<double> encode(const Matrix& words, std::span<const float> class_embedding) const;

    /// d(upstream . encode(words)) / d(words), row-major m x word_dim.
    /// The class embedding is treated as a constant.
    std::vector<double> encode_grad(const Matrix& words, std::span<const float> class_embedding,
                                    std::span<const double> upstream) const;

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

private:
    EncoderParams(EncoderKind kind, Matrix weights) : kind_(kind), weights_(std::move(weights)) {}

    void check_inputs(const Matrix& words, std::span<const float> class_embedding) const;
    std::vector<double> pooled(const Matrix& words, std::span<const float> class_embedding) const;
    std::vector<double> project(std::span<const double> pooled) const;

    EncoderKind kind_ = EncoderKind::Identity;
    Matrix weights_;
};

/// Learnable perceptual and spurious word sequences of one category.
struct ContextPair {
    Matrix perceptual;            // m x d_w
    std::vector<Matrix> spurious; // N_s entries, each m x d_w
    std::vector<float> class_embedding;
    std::uint32_t category_id = 0;

    std::size_t context_len() const noexcept { return perceptual.rows(); }
    std::size_t num_spurious() const noexcept { return spurious.size(); }

    friend bool operator==(const ContextPair&, const ContextPair&) = default;
};

enum class PerturbKind : std::uint8_t { Mask, Noise, Swap };

struct Perturbation {
    PerturbKind kind = PerturbKind::Mask;
    std::size_t position = 0;
    double sigma = 0.02;                 // Noise only
    std::uint32_t donor_category = 0;    // Swap only, index into all_contexts
    std::size_t donor_position = 0;      // Swap only
};

struct PerturbationConfig {
    bool allow_mask = true;
    bool allow_noise = true;
    bool allow_swap = true;
    double noise_sigma = 0.02;
};

/// Copy of ctx.perceptual with exactly the word at p.position replaced.
Matrix perturb_context(const ContextPair& ctx, const Perturbation& p,
                       std::span<const ContextPair> all_contexts,
                       std::span<const float> mask_embedding, Rng& rng);

/// Uniform position, uniform kind among the allowed ones. Swap donors are
/// drawn from the other categories (or `self` when it is the only one).
Perturbation random_perturbation(std::size_t context_len, std::uint32_t self,
                                 std::uint32_t num_categories, const PerturbationConfig& cfg,
                                 Rng& rng);

} // namespace catex
