#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "v2v/dit.hpp"
#include "v2v/matrix.hpp"
#include "v2v/raster.hpp"
#include "v2v/tensor_io.hpp"
#include "v2v/vlm.hpp"

namespace v2v {

inline const char* kDefaultSystemText = "You read visual specification pages.";
inline const char* kDefaultTemplateText =
    "Describe the scene this page specifies for the image generator.";

struct PipelineConfig {
    ConditioningMode mode = ConditioningMode::full_final;
    int reasoning_budget = 200;
    int layer = 0;       // 0 selects the encoder's final layer
    int fit_target = 0;  // 0 keeps the bundle's natural length
    VlmConfig vlm;
    DitConfig dit;
    std::string system_text = kDefaultSystemText;
    std::string template_text = kDefaultTemplateText;
};

struct RunTrace {
    std::string mode;
    int layer = 0;
    int reasoning_requested = 0;
    int prefix_length = 0;
    int image_length = 0;
    int reasoning_length = 0;
    int bundle_length_raw = 0;
    int bundle_length = 0;
    int steps = 0;
    double cfg_scale = 0.0;
    uint64_t seed = 0;
    uint64_t page_hash = 0;
    uint64_t bundle_hash = 0;
    uint64_t latent_hash = 0;
    uint64_t image_hash = 0;
    nlohmann::json config_echo;
};

inline uint64_t image_content_hash(const RasterImage& img) {
    uint64_t h = fnv1a64(img.pixels().data(), img.pixels().size());
    h ^= splitmix64((static_cast<uint64_t>(img.width()) << 32) ^
                    static_cast<uint64_t>(img.height()));
    return h;
}

inline nlohmann::json trace_to_json(const RunTrace& t) {
    nlohmann::json j;
    j["mode"] = t.mode;
    j["layer"] = t.layer;
    j["reasoning_requested"] = t.reasoning_requested;
    j["prefix_length"] = t.prefix_length;
    j["image_length"] = t.image_length;
    j["reasoning_length"] = t.reasoning_length;
    j["bundle_length_raw"] = t.bundle_length_raw;
    j["bundle_length"] = t.bundle_length;
    j["steps"] = t.steps;
    j["cfg_scale"] = t.cfg_scale;
    j["seed"] = t.seed;
    auto hex = [](uint64_t v) {
        char buf[19];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
        return std::string(buf);
    };
    j["page_hash"] = hex(t.page_hash);
    j["bundle_hash"] = hex(t.bundle_hash);
    j["latent_hash"] = hex(t.latent_hash);
    j["image_hash"] = hex(t.image_hash);
    if (!t.config_echo.is_null()) j["config"] = t.config_echo;
    return j;
}

/// Tail-first length fitting: reasoning rows are dropped before image rows,
/// and short bundles are padded with masked zero rows.
inline ConditioningBundle fit_length(const ConditioningBundle& bundle, int target) {
    if (target < 1) fail(ErrorKind::length, "fit target must be >= 1");
    const int K = bundle.length();
    if (K == target) return bundle;
    ConditioningBundle out;
    out.mode = bundle.mode;
    out.layer = bundle.layer;
    if (K > target) {
        std::vector<int> keep;
        const int image_keep = std::min(bundle.image_length, target);
        const int reasoning_keep = std::max(0, target - bundle.image_length);
        int img_seen = 0, reas_seen = 0;
        for (int i = 0; i < K; ++i) {
            if (bundle.row_segments[i] == BundleSegment::image) {
                if (img_seen++ < image_keep) keep.push_back(i);
            } else if (bundle.row_segments[i] == BundleSegment::reasoning) {
                if (reas_seen++ < reasoning_keep) keep.push_back(i);
            }
        }
        out.rows = take_rows(bundle.rows, keep);
        for (int i : keep) {
            out.row_segments.push_back(bundle.row_segments[i]);
            out.source_positions.push_back(bundle.source_positions[i]);
        }
    } else {
        out.rows = Matrix(target, bundle.rows.cols());
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < bundle.rows.cols(); ++j) out.rows.at(i, j) = bundle.rows.at(i, j);
        out.row_segments = bundle.row_segments;
        out.source_positions = bundle.source_positions;
        out.row_segments.insert(out.row_segments.end(), target - K, BundleSegment::pad);
        out.source_positions.insert(out.source_positions.end(), target - K, -1);
    }
    out.image_length = out.count(BundleSegment::image);
    out.reasoning_length = out.count(BundleSegment::reasoning);
    return out;
}

struct PipelineResult {
    RasterImage image;
    LatentGrid latent;
    ConditioningBundle bundle;
    TokenSequence sequence;
    RunTrace trace;
};

namespace detail {

template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        fail(e.kind(), std::string("stage ") + stage + ": " + e.what());
    }
}

}  // namespace detail

inline PipelineResult run_pipeline(const RasterImage& page, const PipelineConfig& cfg,
                                   const VlmModel& vlm, const DitModel& dit, uint64_t seed) {
    const int layer = cfg.layer == 0 ? vlm.config().layer_count : cfg.layer;

    TokenSequence seq = detail::with_stage("build_prefix", [&] {
        return vlm.build_prefix(page, cfg.template_text, cfg.system_text);
    });
    const int prefix_length = seq.length();

    if (cfg.mode == ConditioningMode::full_final) {
        if (cfg.reasoning_budget < 1)
            fail(ErrorKind::mode, "stage generate_reasoning: full-final requires a reasoning "
                                  "budget of at least 1");
        seq = detail::with_stage("generate_reasoning", [&] {
            return vlm.generate_reasoning(seq, cfg.reasoning_budget).sequence;
        });
    }

    HiddenStateMatrix states = detail::with_stage("recompute_states", [&] {
        return vlm.recompute_states(seq, layer);
    });

    ConditioningBundle bundle = detail::with_stage("extract", [&] {
        return VlmModel::extract(states, cfg.mode);
    });
    const int raw_length = bundle.length();

    if (cfg.fit_target > 0)
        bundle = detail::with_stage("fit_length", [&] { return fit_length(bundle, cfg.fit_target); });

    SampleResult sampled = detail::with_stage("sample", [&] {
        return dit.sample(bundle, cfg.dit.steps, cfg.dit.cfg_scale, seed);
    });

    PipelineResult res;
    res.image = std::move(sampled.image);
    res.latent = std::move(sampled.latent);
    res.trace.mode = mode_name(cfg.mode);
    res.trace.layer = layer;
    res.trace.reasoning_requested =
        cfg.mode == ConditioningMode::full_final ? cfg.reasoning_budget : 0;
    res.trace.prefix_length = prefix_length;
    res.trace.image_length = bundle.image_length;
    res.trace.reasoning_length = bundle.reasoning_length;
    res.trace.bundle_length_raw = raw_length;
    res.trace.bundle_length = bundle.length();
    res.trace.steps = cfg.dit.steps;
    res.trace.cfg_scale = cfg.dit.cfg_scale;
    res.trace.seed = seed;
    res.trace.page_hash = image_content_hash(page);
    res.trace.bundle_hash = matrix_hash(bundle.rows);
    res.trace.latent_hash = matrix_hash(res.latent.tokens);
    res.trace.image_hash = image_content_hash(res.image);
    res.bundle = std::move(bundle);
    res.sequence = std::move(seq);
    return res;
}

inline std::vector<PipelineResult> layer_sweep(const RasterImage& page, PipelineConfig cfg,
                                               const VlmModel& vlm, const DitModel& dit,
                                               uint64_t seed, const std::vector<int>& layers) {
    std::vector<PipelineResult> out;
    for (int layer : layers) {
        cfg.layer = layer;
        out.push_back(run_pipeline(page, cfg, vlm, dit, seed));
    }
    return out;
}

// -- hidden-state dumps -------------------------------------------------------

inline void dump_hidden_states(const std::string& path_base, const HiddenStateMatrix& states) {
    save_tensors(path_base + ".tens", 0,
                 std::vector<std::pair<std::string, const Matrix*>>{{"states", &states.values}});
    nlohmann::json j;
    j["layer"] = states.layer;
    j["segments"] = segment_map_to_json(states.segments);
    std::ofstream f(path_base + ".json", std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write '" + path_base + ".json'");
    f << j.dump(2) << "\n";
}

inline HiddenStateMatrix load_hidden_states(const std::string& path_base) {
    const TensorFile tf = load_tensors(path_base + ".tens");
    const Matrix* states = tf.find("states");
    if (!states) fail(ErrorKind::io, "'" + path_base + ".tens' has no 'states' tensor");
    std::ifstream f(path_base + ".json");
    if (!f) fail(ErrorKind::io, "cannot read '" + path_base + ".json'");
    nlohmann::json j;
    f >> j;
    HiddenStateMatrix out;
    out.values = *states;
    out.layer = j.at("layer").get<int>();
    out.segments = segment_map_from_json(j.at("segments"));
    return out;
}

}  // namespace v2v
