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
#include <functional>
#include <string>

#include "catex/embedding.hpp"
#include "catex/inference.hpp"
#include "catex/model.hpp"
#include "catex/rng.hpp"
#include "catex/synthesis.hpp"

namespace catex {

struct TrainConfig {
    std::size_t epochs = 50;
    double lr0 = 0.002;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    double logit_scale = 100.0;
    double ood_loss_weight = 1.0;
    double ortho_weight = 0.0;
    std::size_t num_spurious = 1;
    std::size_t context_len = 16;
    std::size_t word_dim = 512;
    double init_std = 0.02;
    SynthesisConfig synthesis;
    std::uint64_t seed = 0;
    /// Seeds the frozen encoder and mask embedding. Models that are meant to
    /// be merged later must share it.
    std::uint64_t encoder_seed = 1;

    void validate() const;
};

/// Loss value with gradients. Depending on the producer, `grads` is shaped
/// like the text features (feature space) or like the context words.
struct LossResult {
    double value = 0.0;
    Gradients grads;
};

// Feature-space versions: gradients w.r.t. the cached text features.
LossResult loss_id_features(const LabeledFeatureSet& batch, const ModelState& state, double logit_scale);
LossResult loss_ood_features(const LabeledFeatureSet& id_batch, const LabeledFeatureSet& spurious_batch,
                             const ModelState& state, double logit_scale);
LossResult ortho_penalty_features(const ModelState& state);

/// In-distribution loss: each sample is pushed away from the other
/// categories' perceptual and spurious features. Word-space gradients.
LossResult loss_id(const LabeledFeatureSet& batch, const ModelState& state, double logit_scale = 100.0);

/// Two-way perceptual/spurious loss over ID samples and syntheses (labelled
/// with their generating category). Either batch may be empty.
LossResult loss_ood(const LabeledFeatureSet& id_batch, const LabeledFeatureSet& spurious_batch,
                    const ModelState& state, double logit_scale = 100.0);

/// Mean over categories of the squared pairwise cosine between spurious
/// features. Zero when there is a single spurious context.
LossResult ortho_penalty(const ModelState& state);

/// Fraction of ID samples whose predicted category prefers the spurious
/// feature, plus the fraction of OOD samples that prefer the perceptual one.
double empirical_risk(const LabeledFeatureSet& id_set, const LabeledFeatureSet& ood_set, const ModelState& state,
                      const ScoreOptions& opts = {});

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

/// velocity = momentum * velocity + grad; word -= lr * velocity; caches refreshed.
void sgd_step(ModelState& state, const Gradients& grads, double lr, double momentum);

struct StepLosses {
    double loss_id = 0.0;
    double loss_ood = 0.0;
    double ortho = 0.0;
    double total = 0.0;
};

/// Joint objective loss_id + w_ood * loss_ood + w_ortho * ortho and its
/// word-space gradient. `spurious_batch` is used as a constant.
LossResult joint_objective(const LabeledFeatureSet& id_batch, const LabeledFeatureSet& spurious_batch,
                           const ModelState& state, const TrainConfig& cfg, StepLosses* parts = nullptr);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double loss_id = 0.0;   // mean over the epoch's iterations
    double loss_ood = 0.0;
    double lr = 0.0;        // rate used by the epoch's last iteration
    std::size_t syntheses = 0;
};

std::string format_progress(const EpochStats& stats);

using EpochObserver = std::function<void(const EpochStats&)>;

EncoderParams make_encoder(const TrainConfig& cfg, std::size_t feature_dim);
std::vector<float> make_mask_embedding(const TrainConfig& cfg);

/// Class embeddings for categories without exported ones: Gaussian rows of
/// scale init_std drawn from `rng`.
Matrix random_class_embeddings(std::size_t num_categories, const TrainConfig& cfg, Rng& rng);

/// Maps exported class embeddings to word_dim with a frozen Gaussian
/// projection seeded by encoder_seed; returned unchanged if widths agree.
Matrix project_class_embeddings(const Matrix& raw, const TrainConfig& cfg);

/// Minimum-norm class embeddings whose context-free encoding is `scale`
/// times each anchor row, i.e. row k solves W^T e = scale * anchor_k with the
/// smallest |e|. Anchors are feature-space directions (one row per category),
/// standing in for the text-side prior a pretrained model gives each name.
/// Throws DimensionMismatch when anchor width != feature_dim and RankDeficient
/// when W^T W is singular.
Matrix anchor_class_embeddings(const EncoderParams& encoder, const Matrix& anchors, double scale = 1.0);

ModelState init_task_model(const TrainConfig& cfg, std::size_t feature_dim, const Matrix& class_embeddings,
                           Rng& rng);

/// Runs cfg.epochs of synthesis + joint-objective SGD on `state`.
ModelState train_model(ModelState state, const LabeledFeatureSet& id_set, const TrainConfig& cfg, Rng& rng,
                       const EpochObserver& observer = {});

/// Builds the encoder and contexts from cfg and trains from scratch.
ModelState train_task(const LabeledFeatureSet& id_set, const TrainConfig& cfg, Rng& rng,
                      const EpochObserver& observer = {});

} // namespace catex
