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
#include "catex/model.hpp"

namespace catex {

struct ScoreOptions {
    /// Scale applied to cosine similarities inside the perceptual/spurious
    /// two-way softmax. 1 gives the unscaled formula.
    double logit_scale = 100.0;
    /// Scale of the softmax over integrated scores used by the OOD score.
    double softmax_scale = 100.0;
    /// Baseline mode: gamma is fixed to 1 so r equals the raw similarity.
    bool perceptual_only = false;
};

struct ScoreReport {
    std::vector<double> similarity;      // s_k = <w^p_k, x>
    std::vector<double> spurious;        // max over spurious features of <w^s_k, x>
    std::vector<double> gamma;           // regularizer in (0, 1)
    std::vector<double> integrated;      // r_k = s_k * gamma_k
    std::uint32_t predicted = 0;         // argmax r, lowest index on ties
    double ood_score = 0.0;              // -max softmax(softmax_scale * r), in (-1, -1/C]

    /// Higher means more in-distribution: the maximum softmax probability.
    double id_score() const noexcept { return -ood_score; }
};

/// Binary softmax weight of a against b: e^{ta} / (e^{ta} + e^{tb}).
double pair_weight(double a, double b, double scale) noexcept;

ScoreReport score(std::span<const float> x, const ModelState& state, const ScoreOptions& opts = {});
std::uint32_t classify(std::span<const float> x, const ModelState& state, const ScoreOptions& opts = {});
double ood_score(std::span<const float> x, const ModelState& state, const ScoreOptions& opts = {});

/// -max softmax(scale * r) over the given integrated scores.
double ood_score_from(std::span<const double> integrated, double scale);

/// How the K perturbed descriptions of a class combine into one gamma.
enum class ZeroShotAggregate {
    MeanGamma,            // mean of the K pairwise weights
    NearestPerturbation,  // weight against the perturbation most similar to x
};

/// Training-free regularization with description features (C x d) and
/// perturbed description features (C*K x d, K consecutive rows per class).
std::vector<double> zero_shot_regularize(const Matrix& descriptions, const Matrix& perturbed,
                                         std::span<const float> x, double logit_scale = 100.0,
                                         ZeroShotAggregate aggregate = ZeroShotAggregate::MeanGamma);

} // namespace catex
