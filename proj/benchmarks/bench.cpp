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


// Microbenchmarks for the inner loops of training, synthesis and evaluation.

#include <benchmark/benchmark.h>

#include <vector>

#include "catex/encoder.hpp"
#include "catex/metrics.hpp"
#include "catex/rng.hpp"
#include "catex/synthesis.hpp"
#include "catex/synthetic.hpp"
#include "catex/training.hpp"

namespace {

using namespace catex;

Matrix gaussian(std::size_t rows, std::size_t cols, double sd, Rng& rng)
{
    Matrix m(rows, cols);
    for (auto& x : m.data()) {
        x = static_cast<float>(sd * rng.normal());
    }
    return m;
}

LabeledFeatureSet synthetic_id(std::size_t categories, std::size_t dim, std::size_t per_class)
{
    SyntheticSpec spec;
    spec.num_id_categories = static_cast<std::uint32_t>(categories);
    spec.num_ood_clusters = 1;
    spec.dim = dim;
    spec.samples_per_cluster = per_class;
    Rng rng(3);
    return gen_synthetic(spec, rng).id_set;
}

// One context through the frozen encoder (m = 16 words).
void BM_Encode(benchmark::State& state)
{
    const auto dw = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const auto enc = EncoderParams::mean_pool_linear(dw, 64, rng);
    const Matrix words = gaussian(16, dw, 0.02, rng);
    const Matrix cls = gaussian(1, dw, 0.02, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(enc.encode(words, cls.row(0)));
    }
}
BENCHMARK(BM_Encode)->Arg(128)->Arg(512);

// Joint objective value and word gradients for one 32-sample batch.
void BM_JointObjective(benchmark::State& state)
{
    const auto categories = static_cast<std::size_t>(state.range(0));
    TrainConfig cfg;
    cfg.num_spurious = 2;
    cfg.ortho_weight = 1.0;
    const auto id = synthetic_id(categories, 32, 4);
    Rng rng(2);
    const auto model = init_task_model(cfg, 32, random_class_embeddings(categories, cfg, rng), rng);
    LabeledFeatureSet batch;
    batch.num_categories = id.num_categories;
    for (std::size_t i = 0; i < 32; ++i) {
        batch.add(id.features.row(i % id.size()), id.labels[i % id.size()]);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(joint_objective(batch, batch, model, cfg));
    }
}
BENCHMARK(BM_JointObjective)->Arg(8)->Arg(32);

// k-th nearest neighbour distances within one category's pool.
void BM_KnnDistances(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto set = synthetic_id(1, 64, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(knn_distances(set.features, 5));
    }
    state.SetComplexityN(static_cast<benchmark::IterationCount>(n));
}
BENCHMARK(BM_KnnDistances)->RangeMultiplier(2)->Range(128, 1024)->Complexity();

void BM_Auroc(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    std::vector<double> id(n);
    std::vector<double> ood(n);
    for (std::size_t i = 0; i < n; ++i) {
        id[i] = rng.normal() + 1.0;
        ood[i] = rng.normal();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(auroc(id, ood));
        benchmark::DoNotOptimize(fpr_at_tpr(id, ood));
    }
    state.SetComplexityN(static_cast<benchmark::IterationCount>(n));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();

} // namespace

BENCHMARK_MAIN();
