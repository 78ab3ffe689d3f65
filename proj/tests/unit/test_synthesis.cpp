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


#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "catex/error.hpp"
#include "catex/synthesis.hpp"
#include "catex/synthetic.hpp"
#include "catex/training.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace catex;
using fixture::error_code;

namespace {

Matrix circle_points(std::initializer_list<double> degrees)
{
    Matrix m;
    for (double deg : degrees) {
        const double a = deg * std::numbers::pi / 180.0;
        m.append_row(std::vector<float>{static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))});
    }
    return m;
}

double chord(double degrees)
{
    return 2.0 * std::sin(degrees * std::numbers::pi / 360.0);
}

std::vector<double> as_double(std::span<const float> v)
{
    return {v.begin(), v.end()};
}

} // namespace

TEST_CASE("knn_distances examples")
{
    const auto two = knn_distances(circle_points({0, 90}), 1);
    CHECK(two[0] == doctest::Approx(std::sqrt(2.0)));
    CHECK(two[1] == doctest::Approx(std::sqrt(2.0)));

    const auto three = knn_distances(circle_points({0, 10, 180}), 1);
    CHECK(three[0] == doctest::Approx(chord(10)).epsilon(1e-6));
    CHECK(three[1] == doctest::Approx(chord(10)).epsilon(1e-6));
    CHECK(three[2] == doctest::Approx(chord(170)).epsilon(1e-6));

    const Matrix pts = circle_points({0, 25, 70, 140, 200});
    CHECK(knn_distances(pts, 5) == knn_distances(pts, 4));
    CHECK(knn_distances(pts, 100) == knn_distances(pts, 4));
    CHECK(error_code([&] { (void)knn_distances(circle_points({0}), 1); }) == ErrorCode::TooFewPoints);
}

TEST_CASE("knn_distances matches brute-force sorting")
{
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        Matrix pts;
        const std::size_t n = 2 + rng.uniform_index(30);
        for (std::size_t i = 0; i < n; ++i) {
            pts.append_row(oracle::random_unit(5, rng));
        }
        const std::size_t k = 1 + rng.uniform_index(n - 1);
        const auto got = knn_distances(pts, k);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> d;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                double s = 0.0;
                for (std::size_t c = 0; c < 5; ++c) {
                    const double diff = static_cast<double>(pts(i, c)) - pts(j, c);
                    s += diff * diff;
                }
                d.push_back(std::sqrt(s));
            }
            std::sort(d.begin(), d.end());
            CHECK(got[i] == doctest::Approx(d[k - 1]).epsilon(1e-12));
        }
    }
}

TEST_CASE("sample_candidates: degenerate sigma, counting, determinism")
{
    Rng data_rng(9);
    Matrix pts;
    for (int i = 0; i < 40; ++i) {
        pts.append_row(oracle::random_unit(6, data_rng));
    }
    const auto dist = knn_distances(pts, 5);

    SynthesisConfig cfg;
    cfg.boundary_fraction = 0.1;
    cfg.candidates_per_boundary = 3;
    cfg.sample_sigma = 1e-6;
    Rng rng(1);
    const Matrix tight = sample_candidates(pts, dist, cfg, rng);
    CHECK(tight.rows() == 4 * 3);

    std::vector<std::size_t> order(pts.rows());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] > dist[b]; });
    for (std::size_t c = 0; c < tight.rows(); ++c) {
        double best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < pts.rows(); ++i) {
            const double cs = cosine(tight.row(c), pts.row(i));
            if (cs > best) {
                best = cs;
                best_i = i;
            }
        }
        CHECK(best > 1.0 - 1e-6);
        CHECK(std::find(order.begin(), order.begin() + 4, best_i) != order.begin() + 4);
    }

    cfg.boundary_fraction = 1.0;
    cfg.sample_sigma = 0.1;
    Rng r1(3), r2(3);
    const Matrix all1 = sample_candidates(pts, dist, cfg, r1);
    const Matrix all2 = sample_candidates(pts, dist, cfg, r2);
    CHECK(all1.rows() == pts.rows() * 3);
    CHECK(all1 == all2);
    for (std::size_t i = 0; i < all1.rows(); ++i) {
        CHECK(norm(all1.row(i)) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("guide_filter examples")
{
    Rng rng(13);
    const auto w = as_double(oracle::random_unit(8, rng));
    const auto wp = as_double(oracle::random_unit(8, rng));
    Matrix cands;
    for (int i = 0; i < 50; ++i) {
        cands.append_row(oracle::random_unit(8, rng));
    }
    CHECK(guide_filter(cands, w, w).rows() == 0);

    Matrix self;
    self.append_row(std::vector<float>(wp.begin(), wp.end()));
    CHECK(guide_filter(self, w, wp).rows() == 1);

    const std::vector<double> three(3, 0.5);
    CHECK(error_code([&] { (void)guide_filter(cands, w, three); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("guide_filter equals the brute-force inequality and is decided per candidate")
{
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + rng.uniform_index(10);
        const auto w = as_double(oracle::random_unit(d, rng));
        const auto wp = as_double(oracle::random_unit(d, rng));
        Matrix a, b, ab;
        for (int i = 0; i < 100; ++i) {
            const auto z = oracle::random_unit(d, rng);
            (i % 3 == 0 ? a : b).append_row(z);
        }
        for (std::size_t i = 0; i < a.rows(); ++i) {
            ab.append_row(a.row(i));
        }
        for (std::size_t i = 0; i < b.rows(); ++i) {
            ab.append_row(b.row(i));
        }
        CHECK(guide_filter_indices(ab, w, wp) == oracle::filter(ab, w, wp));

        const Matrix fa = guide_filter(a, w, wp);
        const Matrix fb = guide_filter(b, w, wp);
        const Matrix fab = guide_filter(ab, w, wp);
        REQUIRE(fab.rows() == fa.rows() + fb.rows());
        for (std::size_t i = 0; i < fa.rows(); ++i) {
            CHECK(std::equal(fa.row(i).begin(), fa.row(i).end(), fab.row(i).begin()));
        }
        for (std::size_t i = 0; i < fb.rows(); ++i) {
            CHECK(std::equal(fb.row(i).begin(), fb.row(i).end(), fab.row(fa.rows() + i).begin()));
        }
    }
}

namespace {

struct TwoClusters {
    LabeledFeatureSet id;
    ModelState state;
};

TwoClusters two_clusters(std::uint64_t seed)
{
    SyntheticSpec spec;
    spec.num_id_categories = 2;
    spec.num_ood_clusters = 1;
    spec.dim = 8;
    spec.samples_per_cluster = 60;
    spec.tail_fraction = 0.0;
    Rng rng(seed);
    auto data = gen_synthetic(spec, rng);
    TrainConfig cfg;
    cfg.word_dim = 16;
    cfg.context_len = 4;
    cfg.init_std = 0.5;
    auto st = init_task_model(cfg, spec.dim, random_class_embeddings(2, cfg, rng), rng);
    return {std::move(data.id_set), std::move(st)};
}

} // namespace

TEST_CASE("synthesize_spurious: the perturbation inequality holds, outputs are fresh unit features")
{
    auto tc = two_clusters(31);
    const auto pools = build_pools(tc.id, 20);
    SynthesisConfig cfg;
    cfg.boundary_fraction = 0.2;
    cfg.max_accepted_per_category = 25;
    Rng rng(4);
    std::size_t total = 0;
    for (int it = 0; it < 20; ++it) {
        for (std::uint32_t k = 0; k < 2; ++k) {
            const auto trace = synthesize_spurious_traced(tc.state, pools[k], k, cfg, rng);
            const auto& syn = trace.syntheses;
            CHECK(syn.size() <= cfg.max_accepted_per_category);
            CHECK(syn.num_categories == 2);
            total += syn.size();
            REQUIRE(trace.rounds.size() == 1);
            const auto& round = trace.rounds.front();
            for (std::size_t i = 0; i < syn.size(); ++i) {
                const auto z = syn.features.row(i);
                CHECK(syn.labels[i] == k);
                CHECK(norm(z) == doctest::Approx(1.0).epsilon(1e-6));
                CHECK(oracle::dotd(round.perturbed_feature, z) > oracle::dotd(tc.state.perceptual_features[k], z));
                for (std::size_t j = 0; j < tc.id.size(); ++j) {
                    CHECK_FALSE(std::equal(z.begin(), z.end(), tc.id.features.row(j).begin()));
                }
            }
        }
    }
    CHECK(total > 0);
}

TEST_CASE("synthesize_spurious: an unchanged perturbed feature yields an empty set")
{
    auto tc = two_clusters(5);
    for (auto& ctx : tc.state.contexts) {
        for (std::size_t r = 1; r < ctx.perceptual.rows(); ++r) {
            std::copy(ctx.perceptual.row(0).begin(), ctx.perceptual.row(0).end(), ctx.perceptual.row(r).begin());
        }
    }
    tc.state.contexts.resize(1);
    tc.state.refresh_cache();
    SynthesisConfig cfg;
    cfg.perturbation.allow_mask = false;
    cfg.perturbation.allow_noise = false;
    const auto pools = build_pools(tc.id, 20);
    Rng rng(1);
    LabeledFeatureSet out;
    CHECK_NOTHROW(out = synthesize_spurious(tc.state, pools[0], 0, cfg, rng));
    CHECK(out.size() == 0);
}

TEST_CASE("syntheses lie farther from the ID data than ID points lie from each other")
{
    auto tc = two_clusters(77);
    const auto pools = build_pools(tc.id, 20);
    SynthesisConfig cfg;
    Rng rng(8);
    for (std::uint32_t k = 0; k < 2; ++k) {
        const Matrix& pts = pools[k].points;
        double id_mean = 0.0;
        for (double x : pools[k].knn) {
            id_mean += x;
        }
        id_mean /= static_cast<double>(pools[k].knn.size());

        std::vector<double> syn_knn;
        for (int it = 0; it < 30; ++it) {
            const auto syn = synthesize_spurious(tc.state, pools[k], k, cfg, rng);
            for (std::size_t i = 0; i < syn.size(); ++i) {
                Matrix joined = pts;
                joined.append_row(syn.features.row(i));
                syn_knn.push_back(knn_distances(joined, cfg.k).back());
            }
        }
        REQUIRE_FALSE(syn_knn.empty());
        double syn_mean = 0.0;
        for (double x : syn_knn) {
            syn_mean += x;
        }
        syn_mean /= static_cast<double>(syn_knn.size());
        CHECK(syn_mean >= id_mean);
    }
}

TEST_CASE("synthesis config validation and small categories")
{
    SynthesisConfig cfg;
    cfg.boundary_fraction = 0.0;
    CHECK(error_code([&] { cfg.validate(); }) == ErrorCode::InvalidSpec);
    cfg = {};
    cfg.sample_sigma = -1.0;
    CHECK(error_code([&] { cfg.validate(); }) == ErrorCode::InvalidSpec);

    LabeledFeatureSet tiny;
    tiny.num_categories = 1;
    tiny.add(std::vector<float>{1, 0}, 0);
    const auto pools = build_pools(tiny, 20);
    REQUIRE(pools.size() == 1);
    CHECK(pools[0].points.rows() == 1);

    const auto st = fixture::pinned_model(Matrix(1, 2, 0.70710678f), {Matrix(1, 2, 0.70710678f)});
    Rng rng(0);
    CHECK(error_code([&] { (void)synthesize_spurious(st, pools[0], 0, SynthesisConfig{}, rng); }) ==
          ErrorCode::TooFewPoints);
}
