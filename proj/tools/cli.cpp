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


#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"

#include "catex/error.hpp"
#include "catex/extension.hpp"
#include "catex/inference.hpp"
#include "catex/io.hpp"
#include "catex/metrics.hpp"
#include "catex/synthetic.hpp"
#include "catex/training.hpp"

namespace catex::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

LabeledFeatureSet load_features(const std::string& path, std::ostream& err)
{
    io::FeatureReadStats stats;
    LabeledFeatureSet set = io::read_features(path, io::FeatureKind::Features, &stats);
    if (stats.max_norm_deviation > 1e-3) {
        err << "warning: " << path << ": rows deviate from unit norm by up to " << stats.max_norm_deviation
            << "; " << stats.renormalized_rows << " rows renormalized\n";
    }
    return set;
}

std::vector<NamedFeatureSet> load_named(const std::vector<std::string>& paths, std::ostream& err)
{
    std::vector<NamedFeatureSet> out;
    for (const auto& p : paths) {
        out.push_back({fs::path(p).stem().string(), load_features(p, err)});
    }
    return out;
}

std::string report_format(const std::string& path)
{
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".csv" || ext == ".json") {
        return ext;
    }
    throw UsageError("--report: expected a .csv or .json path, got '" + path + "'");
}

struct GenArgs {
    SyntheticSpec spec;
    std::uint64_t seed = 0;
    std::string out_id;
    std::string out_ood;
    std::string out_anchors;
};

int gen_synthetic(const GenArgs& a, std::ostream& out)
{
    Rng rng(a.seed);
    const SyntheticData data = gen_synthetic(a.spec, rng);
    io::write_features(data.id_set, a.out_id);
    io::write_features(data.ood_set, a.out_ood);
    if (!a.out_anchors.empty()) {
        LabeledFeatureSet anchors;
        anchors.num_categories = a.spec.num_id_categories;
        for (std::uint32_t k = 0; k < a.spec.num_id_categories; ++k) {
            anchors.add(data.id_means.row(k), k);
        }
        io::write_features(anchors, a.out_anchors);
    }
    out << "wrote " << data.id_set.size() << " ID rows to " << a.out_id << " and " << data.ood_set.size()
        << " OOD rows to " << a.out_ood << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string features;
    std::string config;
    std::string out;
    std::string log;
    std::string class_emb;
    std::string anchors;
    std::optional<std::uint64_t> seed;
};

int train(const TrainArgs& a, std::ostream& out, std::ostream& err)
{
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : io::read_config(a.config);
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    const LabeledFeatureSet id_set = load_features(a.features, err);

    std::ofstream log;
    if (!a.log.empty()) {
        log.open(a.log, std::ios::trunc);
        CATEX_CHECK(log.good(), ErrorCode::IoFailure, "cannot open log " + a.log);
    }
    const EpochObserver observer = [&](const EpochStats& s) {
        const std::string line = format_progress(s);
        out << line << "\n";
        if (log.is_open()) {
            log << line << "\n";
        }
    };

    Rng rng(cfg.seed);
    ModelState state;
    if (!a.anchors.empty()) {
        const LabeledFeatureSet anchors = load_features(a.anchors, err);
        CATEX_CHECK(anchors.size() == id_set.num_categories, ErrorCode::ShapeMismatch,
                    std::to_string(anchors.size()) + " anchors for " + std::to_string(id_set.num_categories)
                        + " categories");
        for (std::size_t k = 0; k < anchors.size(); ++k) {
            CATEX_CHECK(anchors.labels[k] == kUnlabeled || anchors.labels[k] == k, ErrorCode::LabelOutOfRange,
                        "anchor row " + std::to_string(k) + " is labelled " + std::to_string(anchors.labels[k]));
        }
        const Matrix classes = anchor_class_embeddings(make_encoder(cfg, id_set.dim()), anchors.features);
        ModelState init = init_task_model(cfg, id_set.dim(), classes, rng);
        state = train_model(std::move(init), id_set, cfg, rng, observer);
    } else if (a.class_emb.empty()) {
        state = train_task(id_set, cfg, rng, observer);
    } else {
        const LabeledFeatureSet emb = io::read_features(a.class_emb, io::FeatureKind::Embeddings);
        CATEX_CHECK(emb.size() == id_set.num_categories, ErrorCode::ShapeMismatch,
                    std::to_string(emb.size()) + " class embeddings for " + std::to_string(id_set.num_categories)
                        + " categories");
        ModelState init = init_task_model(cfg, id_set.dim(), emb.features, rng);
        state = train_model(std::move(init), id_set, cfg, rng, observer);
    }
    io::write_checkpoint(state, a.out);
    return kExitOk;
}

struct EvalArgs {
    std::string model;
    std::string id;
    std::vector<std::string> ood;
    bool perceptual_only = false;
    double tpr = 0.95;
    double logit_scale = 100.0;
    std::optional<double> softmax_scale;
    std::string report;
};

void write_report(const EvaluationReport& report, const std::string& path)
{
    io::write_text(path, report_format(path) == ".json" ? io::report_json(report) : io::report_csv(report));
}

int eval(const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    report_format(a.report);
    const ModelState state = io::read_checkpoint(a.model);
    const LabeledFeatureSet id_set = load_features(a.id, err);
    const auto ood = load_named(a.ood, err);

    EvalOptions opts;
    opts.tpr = a.tpr;
    opts.scoring.logit_scale = a.logit_scale;
    opts.scoring.softmax_scale = a.softmax_scale.value_or(a.logit_scale);
    opts.scoring.perceptual_only = a.perceptual_only;
    const EvaluationReport report = evaluate(state, id_set, ood, opts);
    write_report(report, a.report);
    out << "id_accuracy=" << report.id_accuracy << " fpr95=" << report.average.fpr_at_tpr
        << " auroc=" << report.average.auroc << "\n";
    return kExitOk;
}

int merge(const std::vector<std::string>& models, const std::string& out_path, std::ostream& out)
{
    std::vector<ModelState> states;
    for (const auto& p : models) {
        states.push_back(io::read_checkpoint(p));
    }
    const ModelState merged = merge_models(states);
    io::write_checkpoint(merged, out_path);
    out << "merged " << states.size() << " models into " << merged.num_categories() << " categories\n";
    return kExitOk;
}

struct CurveArgs {
    std::vector<std::string> models;
    std::vector<std::string> id_sets;
    std::vector<std::string> ood;
    double tpr = 0.95;
    double logit_scale = 100.0;
    std::string report;
};

int curve(const CurveArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.models.size() != a.id_sets.size()) {
        throw UsageError("--id-sets: expected one ID set per model (" + std::to_string(a.models.size()) + "), got "
                         + std::to_string(a.id_sets.size()));
    }
    std::vector<ModelState> states;
    std::vector<LabeledFeatureSet> ids;
    for (std::size_t j = 0; j < a.models.size(); ++j) {
        states.push_back(io::read_checkpoint(a.models[j]));
        ids.push_back(load_features(a.id_sets[j], err));
    }
    const auto ood = load_named(a.ood, err);
    EvalOptions opts;
    opts.tpr = a.tpr;
    opts.scoring.logit_scale = a.logit_scale;
    opts.scoring.softmax_scale = a.logit_scale;
    const auto points = incremental_eval(states, ids, ood, opts);
    io::write_text(a.report, io::curve_csv(points));
    out << "wrote " << points.size() << " curve points to " << a.report << "\n";
    return kExitOk;
}

struct ZeroShotArgs {
    std::string descriptions;
    std::string perturbed;
    std::string features;
    double logit_scale = 100.0;
    ZeroShotAggregate aggregate = ZeroShotAggregate::MeanGamma;
    std::string report;
};

int zero_shot(const ZeroShotArgs& a, std::ostream& out, std::ostream& err)
{
    const LabeledFeatureSet desc = load_features(a.descriptions, err);
    const LabeledFeatureSet pert = load_features(a.perturbed, err);
    const LabeledFeatureSet feats = load_features(a.features, err);

    const std::size_t C = desc.size();
    CATEX_CHECK(C >= 1, ErrorCode::EmptySet, "no description features");
    CATEX_CHECK(pert.size() >= C && pert.size() % C == 0, ErrorCode::ShapeMismatch,
                std::to_string(pert.size()) + " perturbed rows for " + std::to_string(C) + " classes");
    const std::size_t K = pert.size() / C;
    for (std::size_t i = 0; i < desc.size(); ++i) {
        CATEX_CHECK(desc.labels[i] == kUnlabeled || desc.labels[i] == i, ErrorCode::LabelOutOfRange,
                    "description row " + std::to_string(i) + " is labelled " + std::to_string(desc.labels[i]));
    }
    for (std::size_t i = 0; i < pert.size(); ++i) {
        CATEX_CHECK(pert.labels[i] == kUnlabeled || pert.labels[i] == i / K, ErrorCode::LabelOutOfRange,
                    "perturbed rows must be grouped by class; row " + std::to_string(i) + " is labelled "
                        + std::to_string(pert.labels[i]));
    }

    std::ostringstream csv;
    csv << "index,label,predicted,id_score\n";
    std::size_t labelled = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        const auto r = zero_shot_regularize(desc.features, pert.features, feats.features.row(i),
                                            a.logit_scale, a.aggregate);
        const auto predicted = static_cast<std::uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
        const double id_score = -ood_score_from(r, a.logit_scale);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", id_score);
        const std::uint32_t y = feats.labels[i];
        csv << i << ',' << (y == kUnlabeled ? std::string() : std::to_string(y)) << ',' << predicted << ',' << buf
            << '\n';
        if (y != kUnlabeled) {
            ++labelled;
            hits += y == predicted ? 1 : 0;
        }
    }
    io::write_text(a.report, csv.str());
    out << "scored " << feats.size() << " samples";
    if (labelled > 0) {
        out << ", accuracy=" << static_cast<double>(hits) / static_cast<double>(labelled);
    }
    out << "\n";
    return kExitOk;
}

} // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Hierarchical-context OOD detection over precomputed embeddings", "catex"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic mixture-on-sphere benchmark");
    gen_cmd->add_option("--categories", gen.spec.num_id_categories, "ID categories")->required();
    gen_cmd->add_option("--ood-clusters", gen.spec.num_ood_clusters, "OOD clusters")->required();
    gen_cmd->add_option("--dim", gen.spec.dim, "Feature dimension")->required();
    gen_cmd->add_option("--per-class", gen.spec.samples_per_cluster, "Samples per cluster")->required();
    gen_cmd->add_option("--offset", gen.spec.spurious_offset, "Angle (radians) between OOD and paired ID means")
        ->required();
    gen_cmd->add_option("--concentration", gen.spec.concentration, "Cluster concentration")
        ->capture_default_str();
    gen_cmd->add_option("--tail-fraction", gen.spec.tail_fraction, "Share of ID samples leaning toward the OOD pole")
        ->capture_default_str();
    gen_cmd->add_option("--tail-angle", gen.spec.tail_angle, "Maximum lean (radians) of those samples")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Random seed")->required();
    gen_cmd->add_option("--out-id", gen.out_id, "ID feature file (CTXF)")->required();
    gen_cmd->add_option("--out-ood", gen.out_ood, "OOD feature file (CTXF)")->required();
    gen_cmd->add_option("--out-anchors", gen.out_anchors, "ID cluster means, one labelled row per category (CTXF)");

    TrainArgs tr;
    std::uint64_t train_seed = 0;
    auto* train_cmd = app.add_subcommand("train", "Learn perceptual and spurious contexts");
    train_cmd->add_option("--features", tr.features, "Labelled ID features (CTXF)")->required();
    train_cmd->add_option("--config", tr.config, "key = value config file");
    train_cmd->add_option("--out", tr.out, "Checkpoint output (CCTX)")->required();
    train_cmd->add_option("--log", tr.log, "Also write progress lines here");
    auto* class_emb_opt =
        train_cmd->add_option("--class-emb", tr.class_emb, "Exported class-token embeddings (CTXE)");
    train_cmd->add_option("--anchors", tr.anchors, "Per-category feature anchors (CTXF) that seed the class embeddings")
        ->excludes(class_emb_opt);
    auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "Override the config seed");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on ID and OOD features");
    eval_cmd->add_option("--model", ev.model, "Checkpoint (CCTX)")->required();
    eval_cmd->add_option("--id", ev.id, "Labelled ID features")->required();
    eval_cmd->add_option("--ood", ev.ood, "OOD feature files")->required()->delimiter(',');
    eval_cmd->add_flag("--perceptual-only", ev.perceptual_only, "Score with perceptual similarities only");
    eval_cmd->add_option("--tpr", ev.tpr, "ID true-positive rate for the threshold")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    eval_cmd->add_option("--logit-scale", ev.logit_scale, "Similarity scale")->capture_default_str();
    eval_cmd->add_option("--softmax-scale", ev.softmax_scale, "Scale of the OOD-score softmax (default: logit scale)");
    eval_cmd->add_option("--report", ev.report, "Report path (.csv or .json)")->required();

    std::vector<std::string> merge_models_arg;
    std::string merge_out;
    auto* merge_cmd = app.add_subcommand("merge", "Concatenate models sharing one encoder");
    merge_cmd->add_option("--models", merge_models_arg, "Checkpoints")->required()->delimiter(',');
    merge_cmd->add_option("--out", merge_out, "Merged checkpoint")->required();

    CurveArgs cv;
    auto* curve_cmd = app.add_subcommand("curve", "Accuracy / FPR95 / AUROC vs cumulative categories");
    curve_cmd->add_option("--models", cv.models, "Checkpoints in task order")->required()->delimiter(',');
    curve_cmd->add_option("--id-sets", cv.id_sets, "One ID set per model")->required()->delimiter(',');
    curve_cmd->add_option("--ood", cv.ood, "OOD feature files")->required()->delimiter(',');
    curve_cmd->add_option("--tpr", cv.tpr, "ID true-positive rate")->check(CLI::Range(0.0, 1.0));
    curve_cmd->add_option("--logit-scale", cv.logit_scale, "Similarity scale");
    curve_cmd->add_option("--report", cv.report, "Curve CSV")->required();

    ZeroShotArgs zs;
    auto* zs_cmd = app.add_subcommand("zero-shot", "Training-free regularization with perturbed descriptions");
    zs_cmd->add_option("--descriptions", zs.descriptions, "Description features, one row per class")->required();
    zs_cmd->add_option("--perturbed", zs.perturbed, "Perturbed description features, K rows per class")
        ->required();
    zs_cmd->add_option("--features", zs.features, "Image features to score")->required();
    zs_cmd->add_option("--logit-scale", zs.logit_scale, "Similarity scale");
    const std::map<std::string, ZeroShotAggregate> aggregates{{"mean", ZeroShotAggregate::MeanGamma},
                                                              {"nearest", ZeroShotAggregate::NearestPerturbation}};
    zs_cmd->add_option("--aggregate", zs.aggregate, "Combine perturbations: mean gamma or nearest perturbation")
        ->transform(CLI::CheckedTransformer(aggregates, CLI::ignore_case))
        ->capture_default_str();
    zs_cmd->add_option("--report", zs.report, "Per-sample CSV")->required();

    std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_tail.begin(), argv_tail.end());
    try {
        app.parse(argv_tail);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*gen_cmd) return gen_synthetic(gen, out);
        if (*train_cmd) {
            if (*train_seed_opt) tr.seed = train_seed;
            return train(tr, out, err);
        }
        if (*eval_cmd) return eval(ev, out, err);
        if (*merge_cmd) return merge(merge_models_arg, merge_out, out);
        if (*curve_cmd) return curve(cv, out, err);
        if (*zs_cmd) return zero_shot(zs, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitUsage;
}

} // namespace catex::cli
