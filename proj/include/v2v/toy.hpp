#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "v2v/dit.hpp"
#include "v2v/page.hpp"
#include "v2v/pipeline.hpp"
#include "v2v/probe.hpp"
#include "v2v/raster.hpp"
#include "v2v/rng.hpp"
#include "v2v/vlm.hpp"

namespace v2v {

/// Procedural color-binding task: tiny color-card pages in, uniform target
/// images of the swatch color out. The encoder stays frozen; only the
/// generator trains.
struct ToyConfig {
    int page_size = 64;
    int color_levels = 4;
    int holdout = 10;
    int reasoning_budget = 16;
    int train_steps = 1200;
    int batch_size = 4;
    double lr = 2e-3;
    int eval_sample_steps = 30;
    double eval_cfg_scale = 1.0;
    double match_threshold = 30.0;
    uint64_t seed = 42;
};

inline VlmConfig toy_vlm_config(const ToyConfig& cfg) {
    VlmConfig v;
    v.seed = cfg.seed;
    return v;
}

inline DitConfig toy_dit_config(const ToyConfig& cfg) {
    DitConfig d;
    d.seed = cfg.seed;
    return d;
}

inline PageSpec toy_page_spec(Rgb color, int page_size) {
    PageSpec spec;
    spec.family = PageFamily::color_card;
    spec.canvas_width = page_size;
    spec.canvas_height = page_size;
    spec.elements.push_back(PageElement::swatch(color));
    return spec;
}

inline std::vector<Rgb> toy_colors(int levels) {
    if (levels < 2 || levels > 8) fail(ErrorKind::config, "color levels must be in 2..8");
    const int step = 255 / (levels - 1);
    std::vector<Rgb> out;
    for (int r = 0; r < levels; ++r)
        for (int g = 0; g < levels; ++g)
            for (int b = 0; b < levels; ++b)
                out.push_back(Rgb{uint8_t(r * step), uint8_t(g * step), uint8_t(b * step)});
    return out;
}

inline ConditioningBundle toy_bundle(const VlmModel& vlm, const PipelineConfig& pipe, Rgb color,
                                     int page_size) {
    const RasterImage page = render_page(toy_page_spec(color, page_size));
    TokenSequence seq = vlm.build_prefix(page, pipe.template_text, pipe.system_text);
    seq = vlm.generate_reasoning(seq, pipe.reasoning_budget).sequence;
    const HiddenStateMatrix states = vlm.recompute_states(seq, vlm.config().layer_count);
    return VlmModel::extract(states, ConditioningMode::full_final);
}

struct ToyDataset {
    std::vector<Rgb> train_colors;
    std::vector<Rgb> holdout_colors;
    std::vector<DitTrainExample> train_examples;
    std::vector<ConditioningBundle> holdout_bundles;
};

inline RasterImage toy_target_image(Rgb color, const DitConfig& dit) {
    return RasterImage(dit.grid_w * 8, dit.grid_h * 8, color);
}

inline ToyDataset build_toy_dataset(const VlmModel& vlm, const PipelineConfig& pipe,
                                    const DitConfig& dit, const ToyConfig& cfg) {
    const std::vector<Rgb> colors = toy_colors(cfg.color_levels);
    if (cfg.holdout < 1 || cfg.holdout >= static_cast<int>(colors.size()))
        fail(ErrorKind::config, "holdout must leave at least one training color");
    std::vector<size_t> order(colors.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "toy.split"));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    ToyDataset data;
    for (size_t k = 0; k < order.size(); ++k) {
        const Rgb color = colors[order[k]];
        ConditioningBundle bundle = toy_bundle(vlm, pipe, color, cfg.page_size);
        if (k < static_cast<size_t>(cfg.holdout)) {
            data.holdout_colors.push_back(color);
            data.holdout_bundles.push_back(std::move(bundle));
        } else {
            data.train_colors.push_back(color);
            const RasterImage target = toy_target_image(color, dit);
            data.train_examples.push_back({std::move(bundle), target});
        }
    }
    return data;
}

struct ToyTrainReport {
    std::vector<double> losses;
    double final_loss = 0.0;
};

inline ToyTrainReport train_toy(DitModel& dit, const ToyDataset& data, const ToyConfig& cfg,
                                const std::function<void(int, double)>& progress = {}) {
    if (data.train_examples.empty()) fail(ErrorKind::degenerate_input, "no training examples");
    GaussianRng pick(derive_seed(cfg.seed, "toy.batch"));
    ToyTrainReport report;
    for (int step = 0; step < cfg.train_steps; ++step) {
        std::vector<DitTrainExample> batch;
        for (int b = 0; b < cfg.batch_size; ++b)
            batch.push_back(data.train_examples[pick.next_u64() % data.train_examples.size()]);
        const double loss = dit.train_step(batch, cfg.lr);
        report.losses.push_back(loss);
        if (progress && (step % 50 == 0 || step + 1 == cfg.train_steps)) progress(step, loss);
    }
    report.final_loss = report.losses.empty() ? 0.0 : report.losses.back();
    return report;
}

struct ToyEval {
    int matched = 0;
    int total = 0;
    std::vector<double> channel_errors;
    double visual_share = 0.0;
    double uniform_baseline = 0.0;
};

inline ToyEval evaluate_toy(DitModel& dit, const ToyDataset& data, const ToyConfig& cfg) {
    if (data.holdout_bundles.empty()) fail(ErrorKind::degenerate_input, "no holdout bundles");
    std::vector<int> blocks(dit.config().block_count);
    for (size_t b = 0; b < blocks.size(); ++b) blocks[b] = static_cast<int>(b);
    auto recorder = dit.attention_hook(blocks);
    recorder->clear();

    ToyEval eval;
    eval.total = static_cast<int>(data.holdout_bundles.size());
    for (size_t i = 0; i < data.holdout_bundles.size(); ++i) {
        const SampleResult out =
            dit.sample(data.holdout_bundles[i], cfg.eval_sample_steps, cfg.eval_cfg_scale,
                       derive_seed(cfg.seed, "toy.eval") + i);
        const double err = mean_channel_distance(mean_color(out.image), data.holdout_colors[i]);
        eval.channel_errors.push_back(err);
        if (err <= cfg.match_threshold) ++eval.matched;
    }
    const RoutingReport routing = routing_shares(recorder->records);
    eval.visual_share = routing.visual_share;
    eval.uniform_baseline = routing.uniform_baseline;
    return eval;
}

struct ToyOutcome {
    VlmModel vlm;
    DitModel dit;
    PipelineConfig pipe;
    ToyDataset data;
    ToyTrainReport train;
    ToyEval eval;
};

inline ToyOutcome run_toy_task(const ToyConfig& cfg,
                               const std::function<void(int, double)>& progress = {}) {
    PipelineConfig pipe;
    pipe.vlm = toy_vlm_config(cfg);
    pipe.dit = toy_dit_config(cfg);
    pipe.reasoning_budget = cfg.reasoning_budget;
    VlmModel vlm(pipe.vlm);
    DitModel dit(pipe.dit);
    ToyDataset data = build_toy_dataset(vlm, pipe, pipe.dit, cfg);
    ToyTrainReport train = train_toy(dit, data, cfg, progress);
    ToyEval eval = evaluate_toy(dit, data, cfg);
    return {std::move(vlm), std::move(dit), std::move(pipe), std::move(data), std::move(train),
            std::move(eval)};
}

}  // namespace v2v
