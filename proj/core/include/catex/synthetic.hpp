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

#include <cstdint>

#include "catex/embedding.hpp"
#include "catex/rng.hpp"

namespace catex {

/// Mixture-on-sphere benchmark. ID cluster k is drawn around a random unit
/// direction. A random "background" pole is shared by the whole benchmark:
/// OOD cluster j is ID cluster (j mod C) tilted `spurious_offset` radians
/// toward the pole, and a `tail_fraction` of every ID cluster leans up to
/// `tail_angle` radians the same way (atypical samples that share background
/// features with the near-OOD data). tail_fraction = 0 gives plain clusters.
struct SyntheticSpec {
    std::uint32_t num_id_categories = 8;
    std::uint32_t num_ood_clusters = 4;
    std::uint32_t dim = 32;
    std::uint32_t samples_per_cluster = 100;
    /// Per-coordinate noise is Gaussian with variance 1/concentration before
    /// projecting back to the sphere (normalized-Gaussian vMF approximation).
    double concentration = 200.0;
    double spurious_offset = 0.6;
    double tail_fraction = 0.2;
    double tail_angle = 0.6;
};

struct SyntheticData {
    LabeledFeatureSet id_set;
    LabeledFeatureSet ood_set;
    Matrix id_means;
    Matrix ood_means;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec, Rng& rng);

} // namespace catex
