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


#include "catex/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "catex/error.hpp"

namespace catex {

void SynthesisConfig::validate() const
{
    CATEX_CHECK(k >= 1, ErrorCode::InvalidSpec, "synth.k must be at least 1");
    CATEX_CHECK(boundary_fraction > 0.0 && boundary_fraction <= 1.0, ErrorCode::InvalidSpec,
                "synth.boundary_fraction must lie in (0, 1]");
    CATEX_CHECK(sample_sigma > 0.0, ErrorCode::InvalidSpec, "synth.sigma must be positive");
    CATEX_CHECK(candidates_per_boundary >= 1, ErrorCode::InvalidSpec, "synth.candidates must be at least 1");
    CATEX_CHECK(max_accepted_per_category >= 1, ErrorCode::InvalidSpec, "synth.max_accepted must be at least 1");
    CATEX_CHECK(rounds >= 1, ErrorCode::InvalidSpec, "synthesis rounds must be at least 1");
}

std::vector<double> knn_distances(const Matrix& points, std::size_t k)
{
    const std::size_t n = points.rows();
    CATEX_CHECK(n >= 2, ErrorCode::TooFewPoints, "kNN distances need at least 2 points, got " + std::to_string(n));
    CATEX_CHECK(k >= 1, ErrorCode::InvalidSpec, "k must be at least 1");
    k = std::min(k, n - 1);

    std::vector<double> sq(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = points.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto b = points.row(j);
            double acc = 0.0;
            for (std::size_t c = 0; c < a.size(); ++c) {
                const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
                acc += diff * diff;
            }
            sq[i * n + j] = acc;
            sq[j * n + i] = acc;
        }
    }

    std::vector<double> out(n);
    std::vector<double> others(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                others[w++] = sq[i * n + j];
            }
        }
        std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1), others.end());
        out[i] = std::sqrt(others[k - 1]);
    }
    return out;
}

Matrix sample_candidates(const Matrix& points, std::span<const double> distances, const SynthesisConfig& cfg,
                         Rng& rng)
{
    cfg.validate();
    const std::size_t n = points.rows();
    CATEX_CHECK(n >= 1, ErrorCode::TooFewPoints, "no points to sample around");
    CATEX_CHECK(distances.size() == n, ErrorCode::LengthMismatch,
                std::to_string(distances.size()) + " distances for " + std::to_string(n) + " points");

    const auto boundary = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(cfg.boundary_fraction * static_cast<double>(n) - 1e-9)), 1, n);

    // Largest distance first; ties broken by index so the choice is deterministic.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distances[a] > distances[b]; });

    Matrix out;
    std::vector<float> draw(points.cols());
    for (std::size_t b = 0; b < boundary; ++b) {
        const auto source = points.row(order[b]);
        for (std::size_t c = 0; c < cfg.candidates_per_boundary; ++c) {
            for (int attempt = 0;; ++attempt) {
                for (std::size_t i = 0; i < draw.size(); ++i) {
                    draw[i] = static_cast<float>(source[i] + cfg.sample_sigma * rng.normal());
                }
                if (norm(std::span<const float>(draw)) >= 1e-12 || attempt == 1) {
                    break;
                }
            }
            out.append_row(normalize(std::span<const float>(draw)));
        }
    }
    return out;
}

std::vector<std::size_t> guide_filter_indices(const Matrix& candidates, std::span<const double> original_feature,
                                              std::span<const double> perturbed_feature)
{
    CATEX_CHECK(original_feature.size() == perturbed_feature.size(), ErrorCode::DimensionMismatch,
                "original and perturbed features differ in dimension");
    CATEX_CHECK(candidates.rows() == 0 || candidates.cols() == original_feature.size(),
                ErrorCode::DimensionMismatch,
                "candidate dimension " + std::to_string(candidates.cols()) + ", features have "
                    + std::to_string(original_feature.size()));
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < candidates.rows(); ++i) {
        const auto z = candidates.row(i);
        if (dot(perturbed_feature, z) > dot(original_feature, z)) {
            keep.push_back(i);
        }
    }
    return keep;
}

Matrix guide_filter(const Matrix& candidates, std::span<const double> original_feature,
                    std::span<const double> perturbed_feature)
{
    Matrix out(0, candidates.cols());
    for (std::size_t i : guide_filter_indices(candidates, original_feature, perturbed_feature)) {
        out.append_row(candidates.row(i));
    }
    return out;
}

std::vector<CategoryPool> build_pools(const LabeledFeatureSet& id_set, std::size_t k)
{
    std::vector<CategoryPool> pools(id_set.num_categories);
    for (std::uint32_t c = 0; c < id_set.num_categories; ++c) {
        CategoryPool& pool = pools[c];
        pool.points = Matrix(0, id_set.dim());
        for (std::size_t i : id_set.indices_of(c)) {
            pool.points.append_row(id_set.features.row(i));
        }
        if (pool.points.rows() >= 2) {
            pool.knn = knn_distances(pool.points, k);
        }
    }
    return pools;
}

SynthesisTrace synthesize_spurious_traced(const ModelState& state, const CategoryPool& pool, std::uint32_t category,
                                          const SynthesisConfig& cfg, Rng& rng)
{
    cfg.validate();
    CATEX_CHECK(category < state.num_categories(), ErrorCode::InvalidSpec,
                "category " + std::to_string(category) + " out of range");
    CATEX_CHECK(pool.points.rows() >= 2 && pool.knn.size() == pool.points.rows(), ErrorCode::TooFewPoints,
                "category " + std::to_string(category) + " has " + std::to_string(pool.points.rows())
                    + " ID features; synthesis needs at least 2");
    CATEX_CHECK(pool.points.cols() == state.feature_dim(), ErrorCode::DimensionMismatch,
                "ID feature dimension does not match the model");

    const ContextPair& ctx = state.contexts[category];
    const auto& original = state.perceptual_features[category];

    SynthesisTrace trace;
    trace.syntheses.features = Matrix(0, state.feature_dim());
    trace.syntheses.num_categories = state.num_categories();

    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        SynthesisRound round;
        round.candidates = sample_candidates(pool.points, pool.knn, cfg, rng);
        round.perturbation =
            random_perturbation(ctx.context_len(), category, state.num_categories(), cfg.perturbation, rng);
        const Matrix perturbed = perturb_context(ctx, round.perturbation, state.contexts, state.mask_embedding, rng);
        round.perturbed_feature = state.encoder.encode(perturbed, ctx.class_embedding);
        round.accepted = guide_filter(round.candidates, original, round.perturbed_feature);

        for (std::size_t i = 0; i < round.accepted.rows()
             && trace.syntheses.size() < cfg.max_accepted_per_category;
             ++i) {
            trace.syntheses.add(round.accepted.row(i), category);
        }
        trace.rounds.push_back(std::move(round));
    }
    return trace;
}

LabeledFeatureSet synthesize_spurious(const ModelState& state, const CategoryPool& pool, std::uint32_t category,
                                      const SynthesisConfig& cfg, Rng& rng)
{
    return synthesize_spurious_traced(state, pool, category, cfg, rng).syntheses;
}

} // namespace catex
