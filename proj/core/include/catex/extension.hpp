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
#include <span>
#include <vector>

#include "catex/metrics.hpp"
#include "catex/model.hpp"

namespace catex {

/// Concatenates independently trained models that share one frozen encoder.
/// Category i of model j becomes category offset_j + i. Contexts, cached
/// features and velocity are deep-copied; nothing is renormalized.
/// Throws EncoderMismatch when encoders differ and ShapeMismatch when context
/// shapes or mask embeddings differ.
ModelState merge_models(std::span<const ModelState> models);

/// Union of labelled sets with labels shifted by the cumulative category count.
LabeledFeatureSet concat_labeled(std::span<const LabeledFeatureSet> sets);

struct CurvePoint {
    std::size_t cumulative_categories = 0;
    double accuracy = 0.0;
    double fpr95 = 0.0;
    double auroc = 0.0;
};

/// For j = 1..J: merge the first j models, evaluate on the union of the first
/// j ID sets against the OOD sets (averaged over OOD sets).
std::vector<CurvePoint> incremental_eval(std::span<const ModelState> models,
                                         std::span<const LabeledFeatureSet> id_sets,
                                         std::span<const NamedFeatureSet> ood_sets, const EvalOptions& opts = {});

} // namespace catex
