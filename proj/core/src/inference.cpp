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


#include "catex/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "catex/error.hpp"

namespace catex {

double pair_weight(double a, double b, double scale) noexcept
{
    return 1.0 / (1.0 + std::exp(scale * (b - a)));
}

double ood_score_from(std::span<const double> integrated, double scale)
{
    CATEX_CHECK(!integrated.empty(), ErrorCode::EmptySet, "no categories to score");
    const double top = *std::max_element(integrated.begin(), integrated.end());
    std::vector<double> terms(integrated.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
        terms[k] = std::exp(scale * (integrated[k] - top));
    }
    // Summing in a fixed (ascending) order makes the score independent of the
    // category order, so merged models agree bit-exactly whatever the order.
    std::sort(terms.begin(), terms.end());
    double denom = 0.0;
    for (double t : terms) {
        denom += t;
    }
    return -1.0 / denom;
}

ScoreReport score(std::span<const float> x, const ModelState& state, const ScoreOptions& opts)
{
    const std::uint32_t C = state.num_categories();
    CATEX_CHECK(C >= 1, ErrorCode::EmptySet, "model has no categories");
    CATEX_CHECK(x.size() == state.feature_dim(), ErrorCode::DimensionMismatch,
                "feature dimension " + std::to_string(x.size()) + ", model expects "
                    + std::to_string(state.feature_dim()));

    ScoreReport rep;
    rep.similarity.resize(C);
    rep.spurious.resize(C);
    rep.gamma.resize(C);
    rep.integrated.resize(C);
    for (std::uint32_t k = 0; k < C; ++k) {
        const double s = dot(std::span<const double>(state.perceptual_features[k]), x);
        double sp = -std::numeric_limits<double>::infinity();
        for (const auto& w : state.spurious_features[k]) {
            sp = std::max(sp, dot(std::span<const double>(w), x));
        }
        rep.similarity[k] = s;
        rep.spurious[k] = sp;
        rep.gamma[k] = opts.perceptual_only ? 1.0 : pair_weight(s, sp, opts.logit_scale);
        rep.integrated[k] = opts.perceptual_only ? s : s * rep.gamma[k];
    }
    rep.predicted = static_cast<std::uint32_t>(
        std::max_element(rep.integrated.begin(), rep.integrated.end()) - rep.integrated.begin());
    rep.ood_score = ood_score_from(rep.integrated, opts.softmax_scale);
    return rep;
}

std::uint32_t classify(std::span<const float> x, const ModelState& state, const ScoreOptions& opts)
{
    return score(x, state, opts).predicted;
}

double ood_score(std::span<const float> x, const ModelState& state, const ScoreOptions& opts)
{
    return score(x, state, opts).ood_score;
}

std::vector<double> zero_shot_regularize(const Matrix& descriptions, const Matrix& perturbed,
                                         std::span<const float> x, double logit_scale, ZeroShotAggregate aggregate)
{
    const std::size_t C = descriptions.rows();
    CATEX_CHECK(C >= 1, ErrorCode::EmptySet, "no description features");
    CATEX_CHECK(perturbed.rows() >= C && perturbed.rows() % C == 0, ErrorCode::ShapeMismatch,
                std::to_string(perturbed.rows()) + " perturbed rows for " + std::to_string(C) + " classes");
    CATEX_CHECK(descriptions.cols() == x.size() && perturbed.cols() == x.size(), ErrorCode::DimensionMismatch,
                "description, perturbed and sample dimensions differ");

    const std::size_t K = perturbed.rows() / C;
    std::vector<double> out(C);
    for (std::size_t k = 0; k < C; ++k) {
        const double s = dot(descriptions.row(k), x);
        double gamma = 0.0;
        if (aggregate == ZeroShotAggregate::MeanGamma) {
            for (std::size_t j = 0; j < K; ++j) {
                gamma += pair_weight(s, dot(perturbed.row(k * K + j), x), logit_scale);
            }
            gamma /= static_cast<double>(K);
        } else {
            double nearest = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < K; ++j) {
                nearest = std::max(nearest, dot(perturbed.row(k * K + j), x));
            }
            gamma = pair_weight(s, nearest, logit_scale);
        }
        out[k] = s * gamma;
    }
    return out;
}

} // namespace catex
