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


#include "catex/synthetic.hpp"

#include <cmath>
#include <vector>

#include "catex/error.hpp"

namespace catex {

namespace {

std::vector<double> gaussian_vector(std::size_t dim, Rng& rng)
{
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = rng.normal();
    }
    return v;
}

std::vector<double> random_direction(std::size_t dim, Rng& rng)
{
    return normalize(std::span<const double>(gaussian_vector(dim, rng)));
}

std::vector<float> to_float(std::span<const double> v)
{
    return {v.begin(), v.end()};
}

// Rotate `mean` by `angle` radians toward `toward`. When the two are
// (nearly) parallel a random tangent is used instead.
std::vector<double> rotate_toward(std::span<const double> mean, std::span<const double> toward, double angle,
                                  Rng& rng)
{
    std::vector<double> tangent(toward.begin(), toward.end());
    for (int attempt = 0;; ++attempt) {
        const double along = dot(std::span<const double>(tangent), mean);
        for (std::size_t i = 0; i < tangent.size(); ++i) {
            tangent[i] -= along * mean[i];
        }
        if (norm(std::span<const double>(tangent)) >= 1e-6) {
            break;
        }
        tangent = gaussian_vector(mean.size(), rng);
    }
    tangent = normalize(std::span<const double>(tangent));

    std::vector<double> out(mean.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::cos(angle) * mean[i] + std::sin(angle) * tangent[i];
    }
    return normalize(std::span<const double>(out));
}

// `tail_fraction` of the samples are centred on a copy of `mean` tilted a
// uniform fraction of `tail_angle` toward the shared background pole.
void draw_cluster(std::span<const double> mean, std::span<const double> pole, double tail_fraction,
                  const SyntheticSpec& spec, std::uint32_t label, LabeledFeatureSet& out, Rng& rng)
{
    const double sigma = 1.0 / std::sqrt(spec.concentration);
    std::vector<double> sample(mean.size());
    for (std::uint32_t s = 0; s < spec.samples_per_cluster; ++s) {
        std::vector<double> centre(mean.begin(), mean.end());
        if (tail_fraction > 0.0 && rng.uniform() < tail_fraction) {
            centre = rotate_toward(mean, pole, spec.tail_angle * rng.uniform(), rng);
        }
        for (std::size_t i = 0; i < sample.size(); ++i) {
            sample[i] = centre[i] + sigma * rng.normal();
        }
        out.add(normalize(std::span<const float>(to_float(sample))), label);
    }
}

} // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec, Rng& rng)
{
    CATEX_CHECK(spec.dim >= 2, ErrorCode::InvalidSpec, "dim must be at least 2");
    CATEX_CHECK(spec.num_id_categories > 0, ErrorCode::InvalidSpec, "num_id_categories must be positive");
    CATEX_CHECK(spec.samples_per_cluster > 0, ErrorCode::InvalidSpec, "samples_per_cluster must be positive");
    CATEX_CHECK(spec.concentration > 0.0 && std::isfinite(spec.concentration), ErrorCode::InvalidSpec,
                "concentration must be positive");
    CATEX_CHECK(std::isfinite(spec.spurious_offset) && spec.spurious_offset >= 0.0, ErrorCode::InvalidSpec,
                "spurious_offset must be a non-negative angle");
    CATEX_CHECK(spec.tail_fraction >= 0.0 && spec.tail_fraction <= 1.0, ErrorCode::InvalidSpec,
                "tail_fraction must lie in [0, 1]");
    CATEX_CHECK(std::isfinite(spec.tail_angle) && spec.tail_angle >= 0.0, ErrorCode::InvalidSpec,
                "tail_angle must be a non-negative angle");

    SyntheticData data;
    data.id_set.num_categories = spec.num_id_categories;
    data.ood_set.num_categories = spec.num_id_categories;

    const auto pole = random_direction(spec.dim, rng);
    std::vector<std::vector<double>> id_means;
    for (std::uint32_t k = 0; k < spec.num_id_categories; ++k) {
        id_means.push_back(random_direction(spec.dim, rng));
        data.id_means.append_row(to_float(id_means.back()));
    }
    for (std::uint32_t j = 0; j < spec.num_ood_clusters; ++j) {
        const auto mean = rotate_toward(id_means[j % spec.num_id_categories], pole, spec.spurious_offset, rng);
        data.ood_means.append_row(to_float(mean));
    }

    for (std::uint32_t k = 0; k < spec.num_id_categories; ++k) {
        draw_cluster(id_means[k], pole, spec.tail_fraction, spec, k, data.id_set, rng);
    }
    for (std::uint32_t j = 0; j < spec.num_ood_clusters; ++j) {
        const auto row = data.ood_means.row(j);
        const std::vector<double> mean(row.begin(), row.end());
        draw_cluster(mean, pole, 0.0, spec, kUnlabeled, data.ood_set, rng);
    }
    return data;
}

} // namespace catex
