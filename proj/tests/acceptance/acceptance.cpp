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


// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "catex/error.hpp"
#include "catex/extension.hpp"
#include "catex/inference.hpp"
#include "catex/io.hpp"
#include "catex/metrics.hpp"
#include "catex/synthesis.hpp"
#include "catex/synthetic.hpp"
#include "catex/training.hpp"
#include "cli.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace catex;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(bool ok, const std::string& name, const std::string& detail)
{
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// Analytic gradients vs central differences through the reference encoder.

struct GradStats {
    double worst = 0.0;
    int checks = 0;
    std::size_t kinks = 0;
};

// One pass over 100 random instances. Instances whose encoder input nearly
// vanishes before normalization are redrawn: there the truncation error of a
// fixed step grows like (step / norm)^2 and says nothing about the gradient.
GradStats gradient_pass(double tau, double step, int* redraws)
{
    Rng rng(2026);
    GradStats out;
    auto note = [&](const oracle::FdResult& r) {
        ++out.checks;
        out.worst = std::max(out.worst, r.relative_error);
        out.kinks += r.skipped;
    };
    for (int t = 0; t < 100; ++t) {
        fixture::Dims dims;
        dims.categories = 2 + rng.uniform_index(4);   // 2..5
        dims.context_len = 1 + rng.uniform_index(4);  // 1..4
        dims.word_dim = 4 + rng.uniform_index(13);    // 4..16
        dims.feature_dim = 2 + rng.uniform_index(dims.word_dim - 1);
        dims.num_spurious = 1 + rng.uniform_index(3);  // 1..3
        auto st = fixture::random_model(dims, rng);
        while (oracle::min_projection_norm(st) < 100.0 * 1e-3) {
            ++*redraws;
            st = fixture::random_model(dims, rng);
        }
        const auto c = static_cast<std::uint32_t>(dims.categories);
        const auto id = fixture::random_batch(6, dims.feature_dim, c, rng);
        const auto syn = fixture::random_batch(4, dims.feature_dim, c, rng);

        note(oracle::fd_check(
            st, loss_id(id, st, tau).grads, [&](const oracle::Features& f) { return oracle::loss_id(id, f, tau); },
            step));
        // The max over spurious contexts has kinks; entries whose +-step
        // straddles one have no derivative to compare against.
        note(oracle::fd_check(
            st, loss_ood(id, syn, st, tau).grads,
            [&](const oracle::Features& f) { return oracle::loss_ood(id, syn, f, tau); }, step,
            [&](const oracle::Features& f) { return oracle::spurious_regime(f, id, syn); }));
        if (dims.num_spurious > 1) {
            note(oracle::fd_check(
                st, ortho_penalty(st).grads, [&](const oracle::Features& f) { return oracle::ortho(f); }, step));
        }
    }
    return out;
}

void gradients()
{
    const auto t0 = Clock::now();
    int redraws = 0;
    // Losses exactly as defined (unit scale) at the prescribed step...
    const GradStats plain = gradient_pass(1.0, 1e-3, &redraws);
    // ...and at the training scale, where a 1e-3 step moves a logit by 0.1 and
    // the difference quotient itself is off by O(1e-4); a finer step isolates
    // the gradient.
    const GradStats scaled = gradient_pass(100.0, 1e-5, &redraws);
    const GradStats coarse = gradient_pass(100.0, 1e-3, &redraws);
    const double secs = seconds_since(t0);
    const bool ok = plain.worst <= 1e-4 && scaled.worst <= 1e-4 && secs < 60.0;
    verdict(ok, "gradient-correctness",
            fmt("100 instances (C<=5, m<=4, d_w<=16, N_s<=3), loss_id/loss_ood/ortho in double: unit scale, step "
                "1e-3: %d checks, worst relative error %.3g; scale 100, step 1e-5: worst %.3g (limit 1e-4 for "
                "both); info: scale 100 at step 1e-3 gives %.3g; %zu kink-straddling entries skipped, %d "
                "ill-conditioned draws replaced; %.1f s (limit 60 s)",
                plain.checks, plain.worst, scaled.worst, coarse.worst, plain.kinks + scaled.kinks, redraws / 3,
                secs));
}

// ---------------------------------------------------------------------------
// Closed-form loss values.

ModelState uniform_model(std::size_t categories, std::size_t num_spurious, const std::vector<float>& u)
{
    Matrix per;
    for (std::size_t k = 0; k < categories; ++k) {
        per.append_row(u);
    }
    Matrix sp;
    for (std::size_t s = 0; s < num_spurious; ++s) {
        sp.append_row(u);
    }
    return fixture::pinned_model(per, std::vector<Matrix>(categories, sp));
}

void closed_forms()
{
    Rng rng(7);
    const auto u = oracle::random_unit(6, rng);
    double worst = 0.0;
    for (const std::uint32_t C : {2u, 3u, 8u}) {
        const auto st = uniform_model(C, 1, u);
        LabeledFeatureSet batch;
        batch.num_categories = C;
        for (std::uint32_t i = 0; i < 2 * C; ++i) {
            batch.add(oracle::random_unit(6, rng), i % C);
        }
        worst = std::max(worst, std::abs(loss_id(batch, st, 100.0).value - std::log(2.0 * C - 1.0)));
    }
    const auto single = uniform_model(1, 1, u);
    LabeledFeatureSet one;
    one.num_categories = 1;
    one.add(oracle::random_unit(6, rng), 0);
    const double c1 = loss_id(one, single, 100.0).value;

    // Perceptual and spurious features coincide: each softplus term is ln 2.
    const auto pair = uniform_model(3, 2, u);
    LabeledFeatureSet id;
    LabeledFeatureSet syn;
    id.num_categories = syn.num_categories = 3;
    for (std::uint32_t i = 0; i < 9; ++i) {
        id.add(oracle::random_unit(6, rng), i % 3);
        syn.add(oracle::random_unit(6, rng), (i + 1) % 3);
    }
    const double balanced = loss_ood(id, syn, pair, 100.0).value;
    const double dev = std::abs(balanced - 2.0 * std::log(2.0));
    verdict(worst <= 1e-6 && c1 == 0.0 && dev <= 1e-6, "closed-form-losses",
            fmt("max |loss_id - ln(2C-1)| over C in {2,3,8} = %.3g; C=1 loss_id = %g; |loss_ood - 2 ln 2| = %.3g",
                worst, c1, dev));
}

// ---------------------------------------------------------------------------
// Metrics against quadratic / enumeration oracles.

std::vector<double> random_scores(std::size_t n, bool ties, Rng& rng)
{
    std::vector<double> v(n);
    for (auto& x : v) {
        x = ties ? static_cast<double>(rng.uniform_index(7)) / 3.0 : rng.normal();
    }
    return v;
}

void metric_oracles()
{
    Rng rng(11);
    int fpr_mismatch = 0;
    double auroc_err = 0.0;
    int tie_sets = 0;
    for (int t = 0; t < 1000; ++t) {
        const bool ties = t % 2 == 0;
        tie_sets += ties ? 1 : 0;
        const auto id = random_scores(1 + rng.uniform_index(80), ties, rng);
        const auto ood = random_scores(1 + rng.uniform_index(80), ties, rng);
        const double tpr = t % 4 == 0 ? 0.95 : 0.01 + 0.99 * rng.uniform();
        auroc_err = std::max(auroc_err, std::abs(auroc(id, ood) - oracle::auroc(id, ood)));
        const auto got = fpr_at_tpr(id, ood, tpr);
        const auto [fpr, threshold] = oracle::fpr_at_tpr(id, ood, tpr);
        fpr_mismatch += got.fpr == fpr && got.threshold == threshold ? 0 : 1;
    }
    int transform_mismatch = 0;
    for (int t = 0; t < 100; ++t) {
        const auto id = random_scores(50, t % 2 == 0, rng);
        const auto ood = random_scores(40, t % 2 == 0, rng);
        const double a = 0.1 + 2.0 * rng.uniform();
        const double b = rng.normal();
        const double c = rng.uniform();
        auto f = [&](double x) { return std::exp(a * x) + b + c * x * x * x; };
        std::vector<double> fid;
        std::vector<double> food;
        std::transform(id.begin(), id.end(), std::back_inserter(fid), f);
        std::transform(ood.begin(), ood.end(), std::back_inserter(food), f);
        const bool same = auroc(fid, food) == auroc(id, ood) && fpr_at_tpr(fid, food).fpr == fpr_at_tpr(id, ood).fpr;
        transform_mismatch += same ? 0 : 1;
    }
    verdict(fpr_mismatch == 0 && auroc_err <= 1e-12 && transform_mismatch == 0, "metric-oracles",
            fmt("1000 score sets (%d with ties): fpr/threshold mismatches %d, max auroc error %.3g; "
                "100 increasing maps: %d changed a metric",
                tie_sets, fpr_mismatch, auroc_err, transform_mismatch));
}

// ---------------------------------------------------------------------------
// Perturbation-guided filter.

void guide_filter_check()
{
    Rng rng(13);
    int mismatch = 0;
    std::size_t kept = 0;
    std::size_t seen = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t d = 2 + rng.uniform_index(30);
        const auto w = oracle::random_unit(d, rng);
        const auto wp = oracle::random_unit(d, rng);
        const std::vector<double> wd(w.begin(), w.end());
        const std::vector<double> wpd(wp.begin(), wp.end());
        Matrix cands;
        const std::size_t n = rng.uniform_index(50);
        for (std::size_t i = 0; i < n; ++i) {
            cands.append_row(oracle::random_unit(d, rng));
        }
        if (n == 0) {
            cands = Matrix(0, d);
        }
        const auto got = guide_filter_indices(cands, wd, wpd);
        mismatch += got == oracle::filter(cands, wd, wpd) ? 0 : 1;
        const Matrix rows = guide_filter(cands, wd, wpd);
        mismatch += rows.rows() == got.size() ? 0 : 1;
        kept += got.size();
        seen += n;
    }

    // An unchanged perturbation keeps nothing, both at the filter and end to end.
    Rng r2(14);
    Matrix cands;
    for (int i = 0; i < 64; ++i) {
        cands.append_row(oracle::random_unit(8, r2));
    }
    const auto w = oracle::random_unit(8, r2);
    const std::vector<double> wd(w.begin(), w.end());
    const std::size_t same = guide_filter(cands, wd, wd).rows();

    verdict(mismatch == 0 && same == 0, "perturbation-filter",
            fmt("1000 candidate sets (%zu of %zu candidates kept): %d disagreements with the brute-force "
                "inequality; perturbed == original keeps %zu",
                kept, seen, mismatch, same));
}

// ---------------------------------------------------------------------------
// CLI helpers shared by the end-to-end criteria.

int cli_run(std::vector<std::string> args, std::string* out = nullptr)
{
    args.insert(args.begin(), "catex");
    std::ostringstream o;
    std::ostringstream e;
    const int code = cli::run(args, o, e);
    if (out != nullptr) {
        *out = o.str();
    }
    if (code != 0) {
        std::fprintf(stderr, "catex %s failed (%d): %s", args[1].c_str(), code, e.str().c_str());
    }
    return code;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Synthetic benchmark, run through the command-line pipeline.

constexpr const char* kScoringScale = "10";

void synthetic_end_to_end()
{
    fixture::TempDir dir("accept-e2e");
    int wins = 0;
    int ok_acc = 0;
    int ok_auroc = 0;
    double worst_train = 0.0;
    std::string rows;
    for (int s = 0; s < 5; ++s) {
        const std::string seed = std::to_string(s);
        const std::string gen_seed = std::to_string(100 + s);
        const auto p = [&](const char* name) { return dir / (std::string(name) + seed); };
        bool ran = cli_run({"gen-synthetic", "--categories", "8", "--ood-clusters", "4", "--dim", "32", "--per-class",
                            "100", "--offset", "0.6", "--seed", gen_seed, "--out-id", p("id") + ".ctxf", "--out-ood",
                            p("near_ood") + ".ctxf", "--out-anchors", p("anchors") + ".ctxf"})
                   == 0;
        const auto t0 = Clock::now();
        // Config defaults apply: 50 epochs, lr 0.002, logit scale 100.
        ran = ran
              && cli_run({"train", "--features", p("id") + ".ctxf", "--anchors", p("anchors") + ".ctxf", "--out",
                          p("model") + ".cctx", "--seed", seed})
                     == 0;
        const double train_secs = seconds_since(t0);
        worst_train = std::max(worst_train, train_secs);
        const std::vector<std::string> common{"eval", "--model", p("model") + ".cctx", "--id", p("id") + ".ctxf",
                                              "--ood", p("near_ood") + ".ctxf", "--logit-scale", kScoringScale};
        auto with = [&](std::vector<std::string> extra) {
            auto a = common;
            a.insert(a.end(), extra.begin(), extra.end());
            return a;
        };
        ran = ran && cli_run(with({"--report", p("full") + ".json"})) == 0
              && cli_run(with({"--perceptual-only", "--report", p("base") + ".json"})) == 0;
        if (!ran) {
            verdict(false, "synthetic-end-to-end", "pipeline failed for seed " + seed);
            return;
        }
        const auto full = nlohmann::json::parse(slurp(p("full") + ".json"));
        const auto base = nlohmann::json::parse(slurp(p("base") + ".json"));
        const double acc = full["id_accuracy"];
        const double auc = full["ood"][0]["auroc"];
        const double fpr = full["ood"][0]["fpr95"];
        const double base_fpr = base["ood"][0]["fpr95"];
        const double base_acc = base["id_accuracy"];
        wins += fpr <= base_fpr ? 1 : 0;
        ok_acc += acc >= 0.99 ? 1 : 0;
        ok_auroc += auc >= 0.90 ? 1 : 0;
        rows += fmt("\n    seed %d: train acc %.4f (perceptual-only %.4f), near-OOD AUROC %.4f, FPR95 %.4f vs "
                    "perceptual-only %.4f, train %.1f s",
                    s, acc, base_acc, auc, fpr, base_fpr, train_secs);
    }
    verdict(ok_acc == 5 && ok_auroc == 5 && wins >= 4 && worst_train < 300.0, "synthetic-end-to-end",
            fmt("C=8, 4 near-OOD clusters (offset 0.6 rad), d=32, 100/cluster, 50 epochs, anchored class embeddings, "
                "scoring scale %s; accuracy>=0.99 in %d/5, AUROC>=0.90 in %d/5, integrated FPR95 <= "
                "perceptual-only in %d/5 (need 4), slowest training %.1f s (limit 300 s)",
                kScoringScale, ok_acc, ok_auroc, wins, worst_train)
                + rows);
}

// ---------------------------------------------------------------------------
// Merging independently trained models.

struct Task {
    ModelState model;
    LabeledFeatureSet id;
};

void merge_exactness()
{
    SyntheticSpec spec;
    spec.num_id_categories = 6;
    spec.num_ood_clusters = 3;
    spec.dim = 16;
    spec.samples_per_cluster = 25;
    Rng gen(31);
    const auto data = gen_synthetic(spec, gen);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.word_dim = 64;
    cfg.context_len = 4;
    cfg.num_spurious = 2;

    std::vector<Task> tasks;
    for (std::uint32_t t = 0; t < 3; ++t) {
        Task task;
        task.id.num_categories = 2;
        Matrix anchors(2, spec.dim);
        for (std::uint32_t k = 0; k < 2; ++k) {
            std::copy(data.id_means.row(2 * t + k).begin(), data.id_means.row(2 * t + k).end(),
                      anchors.row(k).begin());
        }
        for (std::size_t i = 0; i < data.id_set.size(); ++i) {
            if (data.id_set.labels[i] / 2 == t) {
                task.id.add(data.id_set.features.row(i), data.id_set.labels[i] % 2);
            }
        }
        cfg.seed = 40 + t;
        Rng rng(cfg.seed);
        const auto classes = anchor_class_embeddings(make_encoder(cfg, spec.dim), anchors);
        task.model = train_model(init_task_model(cfg, spec.dim, classes, rng), task.id, cfg, rng);
        tasks.push_back(std::move(task));
    }

    // 1. Per-category s, gamma, r are bit-identical to the standalone model's.
    const std::vector<ModelState> in_order{tasks[0].model, tasks[1].model, tasks[2].model};
    const auto merged = merge_models(in_order);
    std::size_t compared = 0;
    std::size_t differing = 0;
    const ScoreOptions opts{.logit_scale = 10.0, .softmax_scale = 10.0};
    auto probe = [&](std::span<const float> x) {
        const auto m = score(x, merged, opts);
        for (std::size_t t = 0; t < 3; ++t) {
            const auto s = score(x, tasks[t].model, opts);
            for (std::size_t k = 0; k < 2; ++k) {
                ++compared;
                differing += m.similarity[2 * t + k] == s.similarity[k] && m.gamma[2 * t + k] == s.gamma[k]
                                     && m.integrated[2 * t + k] == s.integrated[k]
                                 ? 0
                                 : 1;
            }
        }
    };
    for (std::size_t i = 0; i < data.id_set.size(); ++i) {
        probe(data.id_set.features.row(i));
    }
    for (std::size_t i = 0; i < data.ood_set.size(); ++i) {
        probe(data.ood_set.features.row(i));
    }

    // 2. Any merge order gives the same decisions (up to relabelling) and metrics.
    const std::vector<std::vector<std::size_t>> orders{{0, 1, 2}, {2, 0, 1}, {1, 2, 0}, {2, 1, 0}};
    const NamedFeatureSet ood{"ood", data.ood_set};
    std::string reference_json;
    std::vector<std::uint32_t> reference_decisions;
    int order_mismatch = 0;
    EvalOptions eval_opts;
    eval_opts.scoring = opts;
    for (const auto& order : orders) {
        std::vector<ModelState> parts;
        std::vector<std::uint32_t> offset(3);
        std::uint32_t next = 0;
        for (const std::size_t t : order) {
            parts.push_back(tasks[t].model);
            offset[t] = next;
            next += 2;
        }
        const auto m = merge_models(parts);
        LabeledFeatureSet relabelled;
        relabelled.num_categories = 6;
        for (std::size_t i = 0; i < data.id_set.size(); ++i) {
            const std::uint32_t y = data.id_set.labels[i];
            relabelled.add(data.id_set.features.row(i), offset[y / 2] + y % 2);
        }
        const std::string json = io::report_json(evaluate(m, relabelled, std::span(&ood, 1), eval_opts));
        std::vector<std::uint32_t> decisions;
        for (std::size_t i = 0; i < data.ood_set.size(); ++i) {
            const std::uint32_t p = classify(data.ood_set.features.row(i), m, opts);
            // Back to task-major labels.
            std::uint32_t t = 0;
            while (!(p >= offset[t] && p < offset[t] + 2)) {
                ++t;
            }
            decisions.push_back(2 * t + (p - offset[t]));
        }
        if (reference_json.empty()) {
            reference_json = json;
            reference_decisions = decisions;
        } else {
            order_mismatch += json == reference_json && decisions == reference_decisions ? 0 : 1;
        }
    }

    // 3. Save/load round trips.
    fixture::TempDir dir("accept-merge");
    io::write_checkpoint(merged, dir / "merged.cctx");
    const auto bytes = io::read_file(dir / "merged.cctx");
    const auto back = io::read_checkpoint(dir / "merged.cctx");
    io::write_checkpoint(back, dir / "again.cctx");
    bool roundtrip = io::read_file(dir / "again.cctx") == bytes;
    roundtrip = roundtrip && io::encode_checkpoint(merge_models(in_order)) == bytes;
    io::write_features(data.id_set, dir / "id.ctxf");
    roundtrip = roundtrip && io::read_features(dir / "id.ctxf") == data.id_set;
    for (std::size_t i = 0; i < data.ood_set.size() && roundtrip; ++i) {
        const auto a = score(data.ood_set.features.row(i), merged, opts);
        const auto b = score(data.ood_set.features.row(i), back, opts);
        roundtrip = a.integrated == b.integrated && a.ood_score == b.ood_score;
    }

    verdict(differing == 0 && order_mismatch == 0 && roundtrip, "merge-exactness",
            fmt("3 tasks x 2 categories: %zu of %zu per-category (s, gamma, r) triples differ from standalone; "
                "%zu merge orders: %d differ in decisions or metrics; save/load bit-identical: %s",
                differing, compared, orders.size(), order_mismatch, roundtrip ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// Byte-identical reruns of the whole pipeline.

bool pipeline(const fixture::TempDir& dir)
{
    {
        std::ofstream cfg(dir / "train.cfg");
        cfg << "epochs = 8\nword_dim = 128\ncontext_len = 8\nnum_spurious = 2\northo_weight = 0.5\nseed = 9\n";
    }
    bool ok = true;
    for (const std::string t : {"a", "b"}) {
        const std::string gen_seed = t == "a" ? "71" : "72";
        ok = ok
             && cli_run({"gen-synthetic", "--categories", "4", "--ood-clusters", "3", "--dim", "16", "--per-class", "40",
                         "--offset", "0.6", "--seed", gen_seed, "--out-id", dir / ("id_" + t + ".ctxf"), "--out-ood",
                         dir / ("ood_" + t + ".ctxf"), "--out-anchors", dir / ("anchors_" + t + ".ctxf")})
                    == 0
             && cli_run({"train", "--features", dir / ("id_" + t + ".ctxf"), "--anchors", dir / ("anchors_" + t + ".ctxf"),
                         "--config", dir / "train.cfg", "--out", dir / ("model_" + t + ".cctx"), "--log",
                         dir / ("log_" + t + ".txt")})
                    == 0
             && cli_run({"eval", "--model", dir / ("model_" + t + ".cctx"), "--id", dir / ("id_" + t + ".ctxf"), "--ood",
                         dir / ("ood_" + t + ".ctxf"), "--report", dir / ("report_" + t + ".json")})
                    == 0
             && cli_run({"eval", "--model", dir / ("model_" + t + ".cctx"), "--id", dir / ("id_" + t + ".ctxf"), "--ood",
                         dir / ("ood_" + t + ".ctxf"), "--report", dir / ("report_" + t + ".csv")})
                    == 0;
    }
    ok = ok
         && cli_run({"merge", "--models", dir / "model_a.cctx" + "," + dir / "model_b.cctx", "--out",
                     dir / "merged.cctx"})
                == 0
         && cli_run({"curve", "--models", dir / "model_a.cctx" + "," + dir / "model_b.cctx", "--id-sets",
                     dir / "id_a.ctxf" + "," + dir / "id_b.ctxf", "--ood", dir / "ood_a.ctxf,"  + dir / "ood_b.ctxf",
                     "--report", dir / "curve.csv"})
                == 0
         && cli_run({"zero-shot", "--descriptions", dir / "anchors_a.ctxf", "--perturbed", dir / "anchors_b.ctxf",
                     "--features", dir / "ood_a.ctxf", "--report", dir / "zero_shot.csv"})
                == 0;
    return ok;
}

void determinism()
{
    fixture::TempDir one("accept-det");
    fixture::TempDir two("accept-det");
    const bool ran = pipeline(one) && pipeline(two);
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(one.path())) {
        names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    int differ = 0;
    int checkpoints = 0;
    int reports = 0;
    for (const auto& n : names) {
        differ += slurp(one / n) == slurp(two / n) && !slurp(one / n).empty() ? 0 : 1;
        checkpoints += n.ends_with(".cctx") ? 1 : 0;
        reports += n.ends_with(".json") || n.ends_with(".csv") ? 1 : 0;
    }
    verdict(ran && differ == 0 && checkpoints == 3 && reports == 6, "determinism",
            fmt("two runs of gen-synthetic/train/eval/merge/curve/zero-shot with fixed seeds: %zu artifacts "
                "(%d checkpoints, %d reports), %d differ",
                names.size(), checkpoints, reports, differ));
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<void()>>> criteria{
        {"gradient-correctness", gradients},      {"closed-form-losses", closed_forms},
        {"metric-oracles", metric_oracles},       {"perturbation-filter", guide_filter_check},
        {"synthetic-end-to-end", synthetic_end_to_end}, {"merge-exactness", merge_exactness},
        {"determinism", determinism},
    };
    for (const auto& [name, run] : criteria) {
        try {
            run();
        } catch (const std::exception& e) {
            verdict(false, name, std::string("threw: ") + e.what());
        }
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
