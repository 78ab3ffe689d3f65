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
#include <vector>

#include "catex/encoder.hpp"
#include "catex/rng.hpp"

namespace catex {

/// Per-category values shaped like the learnable words (or like the text
/// features, when used for feature-space gradients).
struct ContextGrad {
    std::vector<double> perceptual;
    std::vector<std::vector<double>> spurious;
};

struct Gradients {
    std::vector<ContextGrad> categories;

    void add(const Gradients& other, double scale);
    double squared_norm() const;
};

/// Frozen encoder, learnable contexts, cached text features and SGD velocity.
///
/// Text features are a cache of encode(context) kept in 64-bit; they are
/// refreshed by refresh_cache() and must match the contexts after every
/// optimizer step.
struct ModelState {
    EncoderParams encoder;
    std::vector<float> mask_embedding;
    std::vector<ContextPair> contexts;

    std::vector<std::vector<double>> perceptual_features;            // C x d
    std::vector<std::vector<std::vector<double>>> spurious_features; // C x N_s x d

    Gradients velocity;

    std::uint32_t num_categories() const noexcept { return static_cast<std::uint32_t>(contexts.size()); }
    std::size_t word_dim() const noexcept { return encoder.word_dim(); }
    std::size_t feature_dim() const noexcept { return encoder.feature_dim(); }
    std::size_t context_len() const noexcept { return contexts.empty() ? 0 : contexts.front().context_len(); }
    std::size_t num_spurious() const noexcept { return contexts.empty() ? 0 : contexts.front().num_spurious(); }

    void refresh_cache();
    void refresh_cache(std::size_t category);
    bool cache_coherent() const;

    /// Zero gradients shaped like the learnable words.
    Gradients zero_word_gradients() const;
    /// Zero gradients shaped like the cached text features.
    Gradients zero_feature_gradients() const;

    /// Checks every context against the encoder and the shared m / N_s.
    void validate() const;
};

struct ModelShape {
    std::size_t context_len = 16;
    std::size_t num_spurious = 1;
    double init_std = 0.02;
};

/// Contexts drawn from Gaussian(0, init_std^2); one class embedding row per
/// category (rows of `class_embeddings`, word_dim wide). Velocity starts at 0.
ModelState init_model(EncoderParams encoder, std::vector<float> mask_embedding, const Matrix& class_embeddings,
                      const ModelShape& shape, Rng& rng);

/// Back-propagates feature-space gradients (shaped like zero_feature_gradients)
/// into word-space gradients through the frozen encoder.
Gradients backprop_features(const ModelState& state, const Gradients& feature_grads);

} // namespace catex
