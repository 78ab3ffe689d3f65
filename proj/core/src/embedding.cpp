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


#include "catex/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catex/error.hpp"

namespace catex {

namespace {

constexpr double kZeroNorm = 1e-12;

template <typename A, typename B>
double dot_impl(std::span<const A> a, std::span<const B> b)
{
    CATEX_CHECK(a.size() == b.size(), ErrorCode::DimensionMismatch,
                "dot of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

} // namespace

void Matrix::append_row(std::span<const float> values)
{
    if (rows_ == 0 && cols_ == 0) {
        cols_ = values.size();
    }
    CATEX_CHECK(values.size() == cols_, ErrorCode::DimensionMismatch,
                "row of length " + std::to_string(values.size()) + " appended to matrix with "
                    + std::to_string(cols_) + " columns");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void LabeledFeatureSet::add(std::span<const float> feature, std::uint32_t label)
{
    features.append_row(feature);
    labels.push_back(label);
}

void LabeledFeatureSet::validate(double norm_tolerance) const
{
    CATEX_CHECK(labels.size() == features.rows(), ErrorCode::ShapeMismatch,
                std::to_string(labels.size()) + " labels for " + std::to_string(features.rows()) + " rows");
    CATEX_CHECK(features.rows() == 0 || features.cols() > 0, ErrorCode::ShapeMismatch,
                "feature dimension must be positive");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        CATEX_CHECK(labels[i] == kUnlabeled || labels[i] < num_categories, ErrorCode::LabelOutOfRange,
                    "row " + std::to_string(i) + " has label " + std::to_string(labels[i])
                        + " with num_categories " + std::to_string(num_categories));
        const double n = norm(features.row(i));
        CATEX_CHECK(n >= kZeroNorm, ErrorCode::ZeroVector, "row " + std::to_string(i) + " is zero");
        CATEX_CHECK(std::abs(n - 1.0) <= norm_tolerance, ErrorCode::ShapeMismatch,
                    "row " + std::to_string(i) + " has norm " + std::to_string(n));
    }
}

std::vector<std::size_t> LabeledFeatureSet::indices_of(std::uint32_t category) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == category) {
            out.push_back(i);
        }
    }
    return out;
}

double dot(std::span<const float> a, std::span<const float> b) { return dot_impl(a, b); }
double dot(std::span<const double> a, std::span<const float> b) { return dot_impl(a, b); }
double dot(std::span<const double> a, std::span<const double> b) { return dot_impl(a, b); }

double norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }
double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<float> normalize(std::span<const float> v)
{
    const double n = norm(v);
    CATEX_CHECK(n >= kZeroNorm, ErrorCode::ZeroVector, "cannot normalize a vector of norm " + std::to_string(n));
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(v[i]) / n);
    }
    return out;
}

std::vector<double> normalize(std::span<const double> v)
{
    const double n = norm(v);
    CATEX_CHECK(n >= kZeroNorm, ErrorCode::ZeroVector, "cannot normalize a vector of norm " + std::to_string(n));
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] / n;
    }
    return out;
}

double cosine(std::span<const float> a, std::span<const float> b)
{
    return std::clamp(dot(a, b), -1.0, 1.0);
}

} // namespace catex
