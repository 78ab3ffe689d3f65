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
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "catex/embedding.hpp"
#include "catex/extension.hpp"
#include "catex/metrics.hpp"
#include "catex/model.hpp"
#include "catex/training.hpp"

namespace catex::io {

using Bytes = std::vector<std::uint8_t>;

// CTXF / CTXE layout (all little-endian):
//   magic[4]  version:u32=1  dim:u32  count:u64  num_categories:u32
//   payload: count*dim float32, row-major
//   labels:  count u32, 0xFFFFFFFF = unlabeled
// CTXF carries unit-norm features; CTXE carries raw class-token embeddings.
inline constexpr std::size_t kFeatureHeaderBytes = 24;
inline constexpr std::uint32_t kFormatVersion = 1;

enum class FeatureKind { Features, Embeddings };

struct FeatureReadStats {
    double max_norm_deviation = 0.0;
    std::size_t renormalized_rows = 0;
};

Bytes encode_features(const LabeledFeatureSet& set, FeatureKind kind = FeatureKind::Features);

/// Validates magic, version, exact byte length and labels. For CTXF, rows
/// deviating from unit norm by more than 1e-6 are renormalized.
LabeledFeatureSet decode_features(std::span<const std::uint8_t> bytes, FeatureKind kind = FeatureKind::Features,
                                  FeatureReadStats* stats = nullptr);

void write_features(const LabeledFeatureSet& set, const std::filesystem::path& path,
                    FeatureKind kind = FeatureKind::Features);
LabeledFeatureSet read_features(const std::filesystem::path& path, FeatureKind kind = FeatureKind::Features,
                                FeatureReadStats* stats = nullptr);

// CCTX checkpoint (little-endian):
//   magic "CCTX"  version:u32=1  d_w d m N_s C :u32
//   encoder kind:u8, weights d_w*d float32, mask embedding d_w float32
//   per category: class embedding d_w, perceptual m*d_w, spurious N_s*m*d_w
// Cached features are recomputed on load; velocity is not stored.
Bytes encode_checkpoint(const ModelState& state);
ModelState decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState read_checkpoint(const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

/// `key = value` lines with `#` comments. Unknown or repeated keys are errors.
TrainConfig parse_config(std::istream& in);
TrainConfig read_config(const std::filesystem::path& path);

std::string report_json(const EvaluationReport& report);
std::string report_csv(const EvaluationReport& report);
std::string curve_csv(std::span<const CurvePoint> curve);

} // namespace catex::io
