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


// Small random models and data sets shared by the test binaries.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "catex/embedding.hpp"
#include "catex/encoder.hpp"
#include "catex/error.hpp"
#include "catex/model.hpp"
#include "catex/rng.hpp"
#include "oracles.hpp"

namespace catex::fixture {

/// Code of the catex::Error thrown by fn, or nullopt when nothing is thrown.
template <class F>
std::optional<ErrorCode> error_code(F&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static unsigned counter = 0;
        const auto base = std::filesystem::temp_directory_path();
        do {
            path_ = base / ("catex-" + tag + "-" + std::to_string(++counter));
        } while (std::filesystem::exists(path_));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string operator/(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

struct Dims {
    std::size_t categories = 3;
    std::size_t context_len = 2;
    std::size_t word_dim = 8;
    std::size_t feature_dim = 4;
    std::size_t num_spurious = 1;
    double word_std = 0.5;
};

/// Random MeanPoolLinear model with words large enough that the contexts,
/// not the class embeddings, dominate the pooled vector.
inline ModelState random_model(const Dims& dims, Rng& rng)
{
    auto encoder = EncoderParams::mean_pool_linear(dims.word_dim, dims.feature_dim, rng);
    const Matrix mask_row = oracle::random_matrix(1, dims.word_dim, 0.02, rng);
    std::vector<float> mask(mask_row.row(0).begin(), mask_row.row(0).end());
    const Matrix cls = oracle::random_matrix(dims.categories, dims.word_dim, dims.word_std, rng);
    ModelShape shape;
    shape.context_len = dims.context_len;
    shape.num_spurious = dims.num_spurious;
    shape.init_std = dims.word_std;
    return init_model(std::move(encoder), std::move(mask), cls, shape, rng);
}

inline LabeledFeatureSet random_batch(std::size_t n, std::size_t dim, std::uint32_t categories, Rng& rng)
{
    LabeledFeatureSet set;
    set.num_categories = categories;
    for (std::size_t i = 0; i < n; ++i) {
        set.add(oracle::random_unit(dim, rng), static_cast<std::uint32_t>(rng.uniform_index(categories)));
    }
    return set;
}

/// Identity-encoder model whose perceptual and spurious features are exactly
/// the given unit rows (one word equal to the row, zero class embedding).
inline ModelState pinned_model(const Matrix& perceptual, const std::vector<Matrix>& spurious_per_category)
{
    const std::size_t d = perceptual.cols();
    ModelState st;
    st.encoder = EncoderParams::identity(d);
    st.mask_embedding.assign(d, 0.0f);
    for (std::size_t k = 0; k < perceptual.rows(); ++k) {
        ContextPair ctx;
        ctx.perceptual = Matrix(1, d);
        std::copy(perceptual.row(k).begin(), perceptual.row(k).end(), ctx.perceptual.row(0).begin());
        const Matrix& sp = spurious_per_category[k];
        for (std::size_t s = 0; s < sp.rows(); ++s) {
            Matrix w(1, d);
            std::copy(sp.row(s).begin(), sp.row(s).end(), w.row(0).begin());
            ctx.spurious.push_back(std::move(w));
        }
        ctx.class_embedding.assign(d, 0.0f);
        ctx.category_id = static_cast<std::uint32_t>(k);
        st.contexts.push_back(std::move(ctx));
    }
    st.velocity = st.zero_word_gradients();
    st.refresh_cache();
    return st;
}

} // namespace catex::fixture
