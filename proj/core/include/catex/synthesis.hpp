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
#include "catex/encoder.hpp"
#include "catex/model.hpp"
#include "catex/rng.hpp"

namespace catex {

struct SynthesisConfig {
    std::size_t k = 20;                   // clamped to n - 1 per category
    double boundary_fraction = 0.05;      // at least one point is always used
    double sample_sigma = 0.1;
    std::size_t candidates_per_boundary = 10;
    std::size_t max_accepted_per_category = 64;
    std::size_t rounds = 1;               // sample -> filter rounds per iteration
    PerturbationConfig perturbation;

    void validate() const;
};

/// Euclidean distance from each point to its k-th nearest other point.
/// k is clamped to n - 1; throws TooFewPoints when n < 2.
std::vector<double> knn_distances(const Matrix& points, std::size_t k);

/// Gaussian candidates around the ceil(boundary_fraction * n) points with the
/// largest kNN distance, projected back onto the unit sphere.
Matrix sample_candidates(const Matrix& points, std::span<const double> distances, const SynthesisConfig& cfg,
                         Rng& rng);

/// Indices of candidates z with <perturbed, z> > <original, z>, in input order.
std::vector<std::size_t> guide_filter_indices(const Matrix& candidates, std::span<const double> original_feature,
                                              std::span<const double> perturbed_feature);

Matrix guide_filter(const Matrix& candidates, std::span<const double> original_feature,
                    std::span<const double> perturbed_feature);

/// ID features of one category together with their (fixed) kNN distances.
/// Features never change during training, so the distances are computed once.
struct CategoryPool {
    Matrix points;
    std::vector<double> knn;
};

std::vector<CategoryPool> build_pools(const LabeledFeatureSet& id_set, std::size_t k);

/// One sample -> perturb -> filter round, kept for inspection.
struct SynthesisRound {
    Perturbation perturbation;
    std::vector<double> perturbed_feature;
    Matrix candidates;
    Matrix accepted;
};

struct SynthesisTrace {
    std::vector<SynthesisRound> rounds;
    LabeledFeatureSet syntheses;
};

/// Spurious syntheses for `category`, labelled with that category. Perturbed
/// encodings are constants here: nothing produced feeds back into gradients.
/// An empty result means the category is skipped for this iteration.
SynthesisTrace synthesize_spurious_traced(const ModelState& state, const CategoryPool& pool,
                                          std::uint32_t category, const SynthesisConfig& cfg, Rng& rng);

LabeledFeatureSet synthesize_spurious(const ModelState& state, const CategoryPool& pool, std::uint32_t category,
                                      const SynthesisConfig& cfg, Rng& rng);

} // namespace catex
