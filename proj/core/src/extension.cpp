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


#include "catex/extension.hpp"

#include <string>

#include "catex/error.hpp"

namespace catex {

ModelState merge_models(std::span<const ModelState> models)
{
    CATEX_CHECK(!models.empty(), ErrorCode::EmptySet, "nothing to merge");
    const ModelState& first = models.front();

    ModelState merged;
    merged.encoder = first.encoder;
    merged.mask_embedding = first.mask_embedding;

    for (std::size_t j = 0; j < models.size(); ++j) {
        const ModelState& m = models[j];
        const std::string which = "model " + std::to_string(j);
        CATEX_CHECK(m.encoder == first.encoder, ErrorCode::EncoderMismatch,
                    which + " was trained with a different frozen encoder");
        CATEX_CHECK(m.mask_embedding == first.mask_embedding, ErrorCode::ShapeMismatch,
                    which + " has a different mask embedding");
        if (!m.contexts.empty() && !first.contexts.empty()) {
            CATEX_CHECK(m.context_len() == first.context_len() && m.num_spurious() == first.num_spurious(),
                        ErrorCode::ShapeMismatch, which + " has a different context shape");
        }
        m.validate();
        CATEX_CHECK(m.perceptual_features.size() == m.contexts.size()
                        && m.spurious_features.size() == m.contexts.size(),
                    ErrorCode::ShapeMismatch, which + " has no cached text features");

        const auto offset = static_cast<std::uint32_t>(merged.contexts.size());
        const Gradients velocity =
            m.velocity.categories.size() == m.contexts.size() ? m.velocity : m.zero_word_gradients();
        for (std::size_t k = 0; k < m.contexts.size(); ++k) {
            ContextPair ctx = m.contexts[k];
            ctx.category_id = offset + static_cast<std::uint32_t>(k);
            merged.contexts.push_back(std::move(ctx));
            merged.perceptual_features.push_back(m.perceptual_features[k]);
            merged.spurious_features.push_back(m.spurious_features[k]);
            merged.velocity.categories.push_back(velocity.categories[k]);
        }
    }
    return merged;
}

LabeledFeatureSet concat_labeled(std::span<const LabeledFeatureSet> sets)
{
    LabeledFeatureSet out;
    std::uint32_t offset = 0;
    for (const LabeledFeatureSet& s : sets) {
        if (s.size() > 0) {
            CATEX_CHECK(out.size() == 0 || s.dim() == out.dim(), ErrorCode::DimensionMismatch,
                        "ID sets differ in feature dimension");
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::uint32_t y = s.labels[i];
            out.add(s.features.row(i), y == kUnlabeled ? kUnlabeled : y + offset);
        }
        offset += s.num_categories;
    }
    out.num_categories = offset;
    return out;
}

std::vector<CurvePoint> incremental_eval(std::span<const ModelState> models,
                                         std::span<const LabeledFeatureSet> id_sets,
                                         std::span<const NamedFeatureSet> ood_sets, const EvalOptions& opts)
{
    CATEX_CHECK(models.size() == id_sets.size(), ErrorCode::LengthMismatch,
                std::to_string(models.size()) + " models but " + std::to_string(id_sets.size()) + " ID sets");
    for (std::size_t j = 0; j < models.size(); ++j) {
        CATEX_CHECK(id_sets[j].num_categories == models[j].num_categories(), ErrorCode::ShapeMismatch,
                    "ID set " + std::to_string(j) + " does not match its model's category count");
    }

    std::vector<CurvePoint> curve;
    for (std::size_t j = 1; j <= models.size(); ++j) {
        const ModelState merged = merge_models(models.first(j));
        const LabeledFeatureSet id_union = concat_labeled(id_sets.first(j));
        const EvaluationReport report = evaluate(merged, id_union, ood_sets, opts);

        CurvePoint point;
        point.cumulative_categories = merged.num_categories();
        point.accuracy = report.id_accuracy;
        point.fpr95 = report.average.fpr_at_tpr;
        point.auroc = report.average.auroc;
        curve.push_back(point);
    }
    return curve;
}

} // namespace catex
