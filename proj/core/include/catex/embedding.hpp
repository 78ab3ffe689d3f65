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
#include <vector>

namespace catex {

inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

/// Dense row-major float32 matrix. Rows are the unit of access everywhere in
/// the library (one feature, one word embedding, one weight row).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const float> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    void append_row(std::span<const float> values);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// n x d unit-norm features with labels in [0, num_categories) or kUnlabeled.
struct LabeledFeatureSet {
    Matrix features;
    std::vector<std::uint32_t> labels;
    std::uint32_t num_categories = 0;

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t dim() const noexcept { return features.cols(); }

    void add(std::span<const float> feature, std::uint32_t label);

    /// Throws LabelOutOfRange / ShapeMismatch / ZeroVector on violations.
    void validate(double norm_tolerance = 1e-5) const;

    /// Rows whose label equals `category`, in order.
    std::vector<std::size_t> indices_of(std::uint32_t category) const;

    friend bool operator==(const LabeledFeatureSet&, const LabeledFeatureSet&) = default;
};

double dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const float> v);
double norm(std::span<const double> v);

/// Returns v / |v|; throws ZeroVector when |v| < 1e-12.
std::vector<float> normalize(std::span<const float> v);
std::vector<double> normalize(std::span<const double> v);

/// Dot product of two unit vectors clamped to [-1, 1].
double cosine(std::span<const float> a, std::span<const float> b);

} // namespace catex
