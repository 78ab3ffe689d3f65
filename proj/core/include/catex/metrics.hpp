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
#include <string>
#include <vector>

#include "catex/embedding.hpp"
#include "catex/inference.hpp"
#include "catex/model.hpp"

namespace catex {

// Scores passed to the detection metrics are ID-ness scores: higher means
// more likely in-distribution.

struct FprResult {
    double fpr = 0.0;
    double threshold = 0.0;
};

/// threshold = ceil(tpr * n_id)-th largest ID score; fpr counts OOD scores
/// >= threshold (ties at the threshold are false positives).
FprResult fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr = 0.95);

/// P(id > ood) + 0.5 P(id == ood), by rank sum with mid-ranks for ties.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

double accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels);

struct MetricsReport {
    std::string name;
    double fpr_at_tpr = 0.0;
    double tpr_level = 0.95;
    double threshold = 0.0;
    double auroc = 0.0;
    double accuracy = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
};

struct NamedFeatureSet {
    std::string name;
    LabeledFeatureSet set;
};

struct EvaluationReport {
    double id_accuracy = 0.0;
    std::vector<MetricsReport> ood;
    MetricsReport average;  // unweighted mean over the OOD sets
};

struct EvalOptions {
    ScoreOptions scoring;
    double tpr = 0.95;
};

/// Predictions and ID-ness scores for every row of `set`.
struct ScoredSet {
    std::vector<std::uint32_t> predictions;
    std::vector<double> id_scores;
};

ScoredSet score_set(const ModelState& state, const LabeledFeatureSet& set, const ScoreOptions& opts = {});

/// Per-OOD-set FPR/AUROC plus the ID accuracy. ID labels must be present.
EvaluationReport evaluate(const ModelState& state, const LabeledFeatureSet& id_set,
                          std::span<const NamedFeatureSet> ood_sets, const EvalOptions& opts = {});

} // namespace catex
