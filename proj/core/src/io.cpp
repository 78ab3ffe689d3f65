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


#include "catex/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "catex/error.hpp"

namespace catex::io {

namespace {

constexpr char kFeatureMagic[4] = {'C', 'T', 'X', 'F'};
constexpr char kEmbeddingMagic[4] = {'C', 'T', 'X', 'E'};
constexpr char kCheckpointMagic[4] = {'C', 'C', 'T', 'X'};

class ByteWriter {
public:
    void magic(const char (&m)[4]) { out_.insert(out_.end(), m, m + 4); }

    void u8(std::uint8_t v) { out_.push_back(v); }

    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void floats(std::span<const float> values)
    {
        for (float v : values) {
            f32(v);
        }
    }

    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    bool magic(const char (&m)[4])
    {
        need(4);
        const bool ok = std::memcmp(bytes_.data() + pos_, m, 4) == 0;
        pos_ += 4;
        return ok;
    }

    std::uint8_t u8()
    {
        need(1);
        return bytes_[pos_++];
    }

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }

    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    void floats(std::span<float> out)
    {
        need(out.size() * 4);
        for (float& v : out) {
            v = f32();
        }
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        CATEX_CHECK(pos_ + n <= bytes_.size(), ErrorCode::TruncatedFile,
                    what_ + ": needed " + std::to_string(pos_ + n) + " bytes, file has " + std::to_string(bytes_.size()));
    }

    std::span<const std::uint8_t> bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

const char (&feature_magic(FeatureKind kind))[4]
{
    return kind == FeatureKind::Features ? kFeatureMagic : kEmbeddingMagic;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

Bytes encode_features(const LabeledFeatureSet& set, FeatureKind kind)
{
    CATEX_CHECK(set.labels.size() == set.size(), ErrorCode::ShapeMismatch, "label count differs from row count");
    ByteWriter w;
    w.magic(feature_magic(kind));
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(set.dim()));
    w.u64(set.size());
    w.u32(set.num_categories);
    w.floats(set.features.data());
    for (std::uint32_t y : set.labels) {
        w.u32(y);
    }
    return w.take();
}

LabeledFeatureSet decode_features(std::span<const std::uint8_t> bytes, FeatureKind kind, FeatureReadStats* stats)
{
    const std::string what = kind == FeatureKind::Features ? "CTXF" : "CTXE";
    CATEX_CHECK(bytes.size() >= 4, ErrorCode::TruncatedFile,
                what + ": expected at least " + std::to_string(kFeatureHeaderBytes) + " bytes, got "
                    + std::to_string(bytes.size()));
    ByteReader r(bytes, what);
    CATEX_CHECK(r.magic(feature_magic(kind)), ErrorCode::BadMagic, what + ": bad magic");
    CATEX_CHECK(bytes.size() >= kFeatureHeaderBytes, ErrorCode::TruncatedFile,
                what + ": expected at least " + std::to_string(kFeatureHeaderBytes) + " bytes, got "
                    + std::to_string(bytes.size()));
    const std::uint32_t version = r.u32();
    CATEX_CHECK(version == kFormatVersion, ErrorCode::VersionUnsupported,
                what + ": version " + std::to_string(version) + " is not supported");
    const std::uint32_t dim = r.u32();
    const std::uint64_t count = r.u64();
    const std::uint32_t num_categories = r.u32();

    // A hostile count must not wrap the size computation below.
    const std::uint64_t row_bytes = 4ull * (static_cast<std::uint64_t>(dim) + 1);
    CATEX_CHECK(count <= (std::numeric_limits<std::uint64_t>::max() - kFeatureHeaderBytes) / row_bytes,
                ErrorCode::TruncatedFile,
                what + ": header declares " + std::to_string(count) + " rows, got " + std::to_string(bytes.size())
                    + " bytes");
    const std::uint64_t expected = kFeatureHeaderBytes + 4ull * count * dim + 4ull * count;
    CATEX_CHECK(bytes.size() >= expected, ErrorCode::TruncatedFile,
                what + ": expected " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
    CATEX_CHECK(bytes.size() == expected, ErrorCode::ShapeMismatch,
                what + ": expected " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size())
                    + " (trailing data)");
    CATEX_CHECK(count == 0 || dim > 0, ErrorCode::ShapeMismatch, what + ": zero feature dimension");

    LabeledFeatureSet set;
    set.num_categories = num_categories;
    set.features = Matrix(count, dim);
    r.floats(set.features.data());
    set.labels.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t y = r.u32();
        CATEX_CHECK(y == kUnlabeled || y < num_categories, ErrorCode::LabelOutOfRange,
                    what + ": row " + std::to_string(i) + " has label " + std::to_string(y) + " but num_categories is "
                        + std::to_string(num_categories));
        set.labels[i] = y;
    }

    if (kind == FeatureKind::Features) {
        FeatureReadStats local;
        for (std::uint64_t i = 0; i < count; ++i) {
            auto row = set.features.row(i);
            const double deviation = std::abs(norm(row) - 1.0);
            local.max_norm_deviation = std::max(local.max_norm_deviation, deviation);
            if (deviation > 1e-6) {
                const auto unit = normalize(std::span<const float>(row));
                std::copy(unit.begin(), unit.end(), row.begin());
                ++local.renormalized_rows;
            }
        }
        if (stats != nullptr) {
            *stats = local;
        }
    }
    return set;
}

Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    CATEX_CHECK(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    CATEX_CHECK(out.good(), ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    CATEX_CHECK(out.good(), ErrorCode::IoFailure, "write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_features(const LabeledFeatureSet& set, const std::filesystem::path& path, FeatureKind kind)
{
    write_file(path, encode_features(set, kind));
}

LabeledFeatureSet read_features(const std::filesystem::path& path, FeatureKind kind, FeatureReadStats* stats)
{
    return decode_features(read_file(path), kind, stats);
}

Bytes encode_checkpoint(const ModelState& state)
{
    state.validate();
    ByteWriter w;
    w.magic(kCheckpointMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(state.word_dim()));
    w.u32(static_cast<std::uint32_t>(state.feature_dim()));
    w.u32(static_cast<std::uint32_t>(state.context_len()));
    w.u32(static_cast<std::uint32_t>(state.num_spurious()));
    w.u32(state.num_categories());
    w.u8(static_cast<std::uint8_t>(state.encoder.kind()));
    w.floats(state.encoder.weights().data());
    w.floats(state.mask_embedding);
    for (const ContextPair& ctx : state.contexts) {
        w.floats(ctx.class_embedding);
        w.floats(ctx.perceptual.data());
        for (const Matrix& s : ctx.spurious) {
            w.floats(s.data());
        }
    }
    return w.take();
}

ModelState decode_checkpoint(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes, "CCTX");
    CATEX_CHECK(r.magic(kCheckpointMagic), ErrorCode::BadMagic, "CCTX: bad magic");
    const std::uint32_t version = r.u32();
    CATEX_CHECK(version == kFormatVersion, ErrorCode::VersionUnsupported,
                "CCTX: version " + std::to_string(version) + " is not supported");
    const std::uint32_t dw = r.u32();
    const std::uint32_t d = r.u32();
    const std::uint32_t m = r.u32();
    const std::uint32_t ns = r.u32();
    const std::uint32_t C = r.u32();
    CATEX_CHECK(dw > 0 && d > 0 && m > 0 && ns > 0, ErrorCode::ShapeMismatch, "CCTX: zero-sized dimension");

    const std::uint8_t kind = r.u8();
    CATEX_CHECK(kind <= static_cast<std::uint8_t>(EncoderKind::Identity), ErrorCode::ShapeMismatch,
                "CCTX: unknown encoder kind tag " + std::to_string(kind));

    // Rough size in floating point first so hostile headers cannot wrap the exact count.
    const long double rough = 4.0L * (static_cast<long double>(dw) * d + dw)
                            + 4.0L * C * (static_cast<long double>(dw) + (1.0L + ns) * m * dw);
    CATEX_CHECK(rough < 0x1p62L, ErrorCode::TruncatedFile,
                "CCTX: header declares about " + std::to_string(static_cast<double>(rough)) + " payload bytes, got "
                    + std::to_string(bytes.size()));
    const std::uint64_t expected_rest = 4ull * (static_cast<std::uint64_t>(dw) * d + dw)
                                      + 4ull * C * (static_cast<std::uint64_t>(dw) + (1ull + ns) * m * dw);
    CATEX_CHECK(r.remaining() >= expected_rest, ErrorCode::TruncatedFile,
                "CCTX: expected " + std::to_string(bytes.size() - r.remaining() + expected_rest) + " bytes, got "
                    + std::to_string(bytes.size()));
    CATEX_CHECK(r.remaining() == expected_rest, ErrorCode::ShapeMismatch, "CCTX: trailing data");

    Matrix weights(dw, d);
    r.floats(weights.data());

    ModelState state;
    state.encoder = EncoderParams::from_weights(static_cast<EncoderKind>(kind), std::move(weights));
    state.mask_embedding.resize(dw);
    r.floats(state.mask_embedding);
    for (std::uint32_t k = 0; k < C; ++k) {
        ContextPair ctx;
        ctx.category_id = k;
        ctx.class_embedding.resize(dw);
        r.floats(ctx.class_embedding);
        ctx.perceptual = Matrix(m, dw);
        r.floats(ctx.perceptual.data());
        for (std::uint32_t i = 0; i < ns; ++i) {
            Matrix s(m, dw);
            r.floats(s.data());
            ctx.spurious.push_back(std::move(s));
        }
        state.contexts.push_back(std::move(ctx));
    }
    state.validate();
    state.refresh_cache();
    state.velocity = state.zero_word_gradients();
    return state;
}

void write_checkpoint(const ModelState& state, const std::filesystem::path& path)
{
    write_file(path, encode_checkpoint(state));
}

ModelState read_checkpoint(const std::filesystem::path& path)
{
    return decode_checkpoint(read_file(path));
}

TrainConfig parse_config(std::istream& in)
{
    TrainConfig cfg;

    auto as_size = [](const std::string& key, const std::string& v) {
        std::size_t out = 0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
        CATEX_CHECK(res.ec == std::errc() && res.ptr == v.data() + v.size(), ErrorCode::BadConfig,
                    key + ": expected a non-negative integer, got '" + v + "'");
        return out;
    };
    auto as_u64 = [](const std::string& key, const std::string& v) {
        std::uint64_t out = 0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
        CATEX_CHECK(res.ec == std::errc() && res.ptr == v.data() + v.size(), ErrorCode::BadConfig,
                    key + ": expected an unsigned integer, got '" + v + "'");
        return out;
    };
    auto as_real = [](const std::string& key, const std::string& v) {
        char* end = nullptr;
        const double out = std::strtod(v.c_str(), &end);
        CATEX_CHECK(!v.empty() && end == v.c_str() + v.size() && std::isfinite(out), ErrorCode::BadConfig,
                    key + ": expected a real number, got '" + v + "'");
        return out;
    };

    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"epochs", [&](auto& k, auto& v) { cfg.epochs = as_size(k, v); }},
        {"lr0", [&](auto& k, auto& v) { cfg.lr0 = as_real(k, v); }},
        {"momentum", [&](auto& k, auto& v) { cfg.momentum = as_real(k, v); }},
        {"batch_size", [&](auto& k, auto& v) { cfg.batch_size = as_size(k, v); }},
        {"logit_scale", [&](auto& k, auto& v) { cfg.logit_scale = as_real(k, v); }},
        {"ood_loss_weight", [&](auto& k, auto& v) { cfg.ood_loss_weight = as_real(k, v); }},
        {"ortho_weight", [&](auto& k, auto& v) { cfg.ortho_weight = as_real(k, v); }},
        {"num_spurious", [&](auto& k, auto& v) { cfg.num_spurious = as_size(k, v); }},
        {"context_len", [&](auto& k, auto& v) { cfg.context_len = as_size(k, v); }},
        {"word_dim", [&](auto& k, auto& v) { cfg.word_dim = as_size(k, v); }},
        {"synth.k", [&](auto& k, auto& v) { cfg.synthesis.k = as_size(k, v); }},
        {"synth.boundary_fraction", [&](auto& k, auto& v) { cfg.synthesis.boundary_fraction = as_real(k, v); }},
        {"synth.sigma", [&](auto& k, auto& v) { cfg.synthesis.sample_sigma = as_real(k, v); }},
        {"synth.candidates", [&](auto& k, auto& v) { cfg.synthesis.candidates_per_boundary = as_size(k, v); }},
        {"synth.max_accepted", [&](auto& k, auto& v) { cfg.synthesis.max_accepted_per_category = as_size(k, v); }},
        {"synth.rounds", [&](auto& k, auto& v) { cfg.synthesis.rounds = as_size(k, v); }},
        {"seed", [&](auto& k, auto& v) { cfg.seed = as_u64(k, v); }},
        {"encoder_seed", [&](auto& k, auto& v) { cfg.encoder_seed = as_u64(k, v); }},
    };

    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        CATEX_CHECK(eq != std::string::npos, ErrorCode::BadConfig,
                    "line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        CATEX_CHECK(it != setters.end(), ErrorCode::BadConfig,
                    "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        CATEX_CHECK(seen.insert(key).second, ErrorCode::BadConfig,
                    "line " + std::to_string(line_no) + ": key '" + key + "' given twice");
        it->second(key, value);
    }
    cfg.validate();
    return cfg;
}

TrainConfig read_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    CATEX_CHECK(in.good(), ErrorCode::IoFailure, "cannot open config " + path.string());
    return parse_config(in);
}

std::string report_json(const EvaluationReport& report)
{
    nlohmann::ordered_json j;
    j["id_accuracy"] = report.id_accuracy;
    j["ood"] = nlohmann::ordered_json::array();
    for (const MetricsReport& m : report.ood) {
        j["ood"].push_back({{"name", m.name}, {"fpr95", m.fpr_at_tpr}, {"auroc", m.auroc}, {"threshold", m.threshold}});
    }
    j["average"] = {{"fpr95", report.average.fpr_at_tpr},
                    {"auroc", report.average.auroc},
                    {"threshold", report.average.threshold}};
    return j.dump(2) + "\n";
}

std::string report_csv(const EvaluationReport& report)
{
    std::ostringstream out;
    out << "name,fpr95,auroc,threshold,id_accuracy,n_id,n_ood\n";
    auto row = [&](const MetricsReport& m) {
        out << m.name << ',' << fmt(m.fpr_at_tpr) << ',' << fmt(m.auroc) << ',' << fmt(m.threshold) << ','
            << fmt(report.id_accuracy) << ',' << m.n_id << ',' << m.n_ood << '\n';
    };
    for (const MetricsReport& m : report.ood) {
        row(m);
    }
    row(report.average);
    return out.str();
}

std::string curve_csv(std::span<const CurvePoint> curve)
{
    std::ostringstream out;
    out << "cumulative_categories,accuracy,fpr95,auroc\n";
    for (const CurvePoint& p : curve) {
        out << p.cumulative_categories << ',' << fmt(p.accuracy) << ',' << fmt(p.fpr95) << ',' << fmt(p.auroc)
            << '\n';
    }
    return out.str();
}

} // namespace catex::io
