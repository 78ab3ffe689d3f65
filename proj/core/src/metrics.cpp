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


#include "catex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catex/error.hpp"

namespace catex {

FprResult fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr)
{
    CATEX_CHECK(!id_scores.empty(), ErrorCode::EmptySet, "fpr_at_tpr needs ID scores");
    CATEX_CHECK(!ood_scores.empty(), ErrorCode::EmptySet, "fpr_at_tpr needs OOD scores");
    CATEX_CHECK(tpr > 0.0 && tpr <= 1.0, ErrorCode::InvalidSpec, "tpr must lie in (0, 1]");

    std::vector<double> sorted(id_scores.begin(), id_scores.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    // The epsilon keeps e.g. 0.95 * 20 from rounding up to rank 20.
    auto rank = static_cast<std::size_t>(std::ceil(tpr * static_cast<double>(sorted.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());

    FprResult out;
    out.threshold = sorted[rank - 1];
    const auto positives =
        std::count_if(ood_scores.begin(), ood_scores.end(), [&](double s) { return s >= out.threshold; });
    out.fpr = static_cast<double>(positives) / static_cast<double>(ood_scores.size());
    return out;
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores)
{
    CATEX_CHECK(!id_scores.empty(), ErrorCode::EmptySet, "auroc needs ID scores");
    CATEX_CHECK(!ood_scores.empty(), ErrorCode::EmptySet, "auroc needs OOD scores");

    struct Entry {
        double score;
        bool is_id;
    };
    std::vector<Entry> all;
    all.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) all.push_back({s, true});
    for (double s : ood_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Twice the rank sum keeps mid-ranks integral.
    double twice_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) {
            ++j;
        }
        const double twice_mid_rank = static_cast<double>(i + 1 + j);  // ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            if (all[t].is_id) {
                twice_rank_sum += twice_mid_rank;
            }
        }
        i = j;
    }
    const double n_id = static_cast<double>(id_scores.size());
    const double n_ood = static_cast<double>(ood_scores.size());
    // U statistic, doubled: 2R - n_id (n_id + 1) counts ties once and wins twice.
    const double twice_u = twice_rank_sum - n_id * (n_id + 1.0);
    return twice_u / (2.0 * n_id * n_ood);
}

double accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels)
{
    CATEX_CHECK(predictions.size() == labels.size(), ErrorCode::LengthMismatch,
                std::to_string(predictions.size()) + " predictions for " + std::to_string(labels.size()) + " labels");
    CATEX_CHECK(!labels.empty(), ErrorCode::EmptySet, "accuracy of an empty set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        hits += predictions[i] == labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ScoredSet score_set(const ModelState& state, const LabeledFeatureSet& set, const ScoreOptions& opts)
{
    CATEX_CHECK(set.size() == 0 || set.dim() == state.feature_dim(), ErrorCode::ShapeMismatch,
                "feature dimension " + std::to_string(set.dim()) + " does not match model dimension "
                    + std::to_string(state.feature_dim()));
    ScoredSet out;
    out.predictions.reserve(set.size());
    out.id_scores.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const ScoreReport rep = score(set.features.row(i), state, opts);
        out.predictions.push_back(rep.predicted);
        out.id_scores.push_back(rep.id_score());
    }
    return out;
}

EvaluationReport evaluate(const ModelState& state, const LabeledFeatureSet& id_set,
                          std::span<const NamedFeatureSet> ood_sets, const EvalOptions& opts)
{
    CATEX_CHECK(id_set.size() > 0, ErrorCode::EmptySet, "ID evaluation set is empty");
    CATEX_CHECK(!ood_sets.empty(), ErrorCode::EmptySet, "no OOD sets given");

    const ScoredSet id = score_set(state, id_set, opts.scoring);
    EvaluationReport report;
    report.id_accuracy = accuracy(id.predictions, id_set.labels);

    report.average.name = "average";
    report.average.tpr_level = opts.tpr;
    report.average.accuracy = report.id_accuracy;
    report.average.n_id = id_set.size();
    for (const NamedFeatureSet& named : ood_sets) {
        CATEX_CHECK(named.set.size() > 0, ErrorCode::EmptySet, "OOD set '" + named.name + "' is empty");
        const ScoredSet ood = score_set(state, named.set, opts.scoring);
        const FprResult fpr = fpr_at_tpr(id.id_scores, ood.id_scores, opts.tpr);

        MetricsReport m;
        m.name = named.name;
        m.fpr_at_tpr = fpr.fpr;
        m.tpr_level = opts.tpr;
        m.threshold = fpr.threshold;
        m.auroc = auroc(id.id_scores, ood.id_scores);
        m.accuracy = report.id_accuracy;
        m.n_id = id_set.size();
        m.n_ood = named.set.size();
        report.ood.push_back(m);
    }

    const double count = static_cast<double>(report.ood.size());
    for (const MetricsReport& m : report.ood) {
        report.average.fpr_at_tpr += m.fpr_at_tpr;
        report.average.auroc += m.auroc;
        report.average.threshold += m.threshold;
        report.average.n_ood += m.n_ood;
    }
    report.average.fpr_at_tpr /= count;
    report.average.auroc /= count;
    report.average.threshold /= count;
    return report;
}

} // namespace catex
