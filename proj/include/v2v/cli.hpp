#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "v2v/bench.hpp"
#include "v2v/dit.hpp"
#include "v2v/errors.hpp"
#include "v2v/page.hpp"
#include "v2v/pipeline.hpp"
#include "v2v/png_io.hpp"
#include "v2v/probe.hpp"
#include "v2v/tensor_io.hpp"
#include "v2v/tokenizer.hpp"
#include "v2v/toy.hpp"
#include "v2v/vlm.hpp"

namespace v2v {
namespace cli {

// -- config resolution ---------------------------------------------------------

/// Flag values shared by the model-driven subcommands. Sentinels mark
/// "not given"; file values fill those in, then hard defaults.
struct RunFlags {
    std::string config;
    std::string mode;
    int tokens = -1;
    std::string layer;
    int steps = -1;
    double cfg = -1.0;
    int64_t seed = -1;
    int fit = -1;
    std::string system_text = "\x01";
    std::string template_text = "\x01";
    std::string blocks;
    std::string dit_params;
    std::string vlm_params;
    bool dry_run = false;
};

struct ResolvedRun {
    PipelineConfig pipe;
    uint64_t seed = 42;
    std::vector<int> probe_blocks;
    JudgeEndpoint judge;
    nlohmann::json echo;
};

inline int parse_layer(const std::string& text) {
    if (text == "last") return 0;
    try {
        size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used != text.size() || v < 1) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::usage, "layer must be 'last' or a positive integer, got '" + text + "'");
    }
}

inline std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        try {
            size_t used = 0;
            out.push_back(std::stoi(cur, &used));
            if (used != cur.size()) throw std::invalid_argument(cur);
        } catch (const std::exception&) {
            fail(ErrorKind::usage, std::string(what) + " list has a non-integer entry '" + cur + "'");
        }
        cur.clear();
    };
    for (char c : csv) {
        if (c == ',') {
            flush();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    flush();
    if (out.empty()) fail(ErrorKind::usage, std::string(what) + " list is empty");
    return out;
}

inline nlohmann::json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::io, "cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, "config '" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

inline ResolvedRun resolve_run(const RunFlags& f) {
    nlohmann::json j = nlohmann::json::object();
    if (!f.config.empty()) j = load_config_file(f.config);

    ResolvedRun r;
    if (j.contains("seed")) r.seed = j.at("seed").get<uint64_t>();
    if (f.seed >= 0) r.seed = static_cast<uint64_t>(f.seed);

    PipelineConfig& p = r.pipe;
    if (j.contains("mode")) p.mode = mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("tokens")) p.reasoning_budget = j.at("tokens").get<int>();
    if (j.contains("layer")) {
        if (j.at("layer").is_string())
            p.layer = parse_layer(j.at("layer").get<std::string>());
        else
            p.layer = j.at("layer").get<int>();
    }
    if (j.contains("fit")) p.fit_target = j.at("fit").get<int>();
    if (j.contains("system_text")) p.system_text = j.at("system_text").get<std::string>();
    if (j.contains("template_text")) p.template_text = j.at("template_text").get<std::string>();

    const nlohmann::json jv = j.value("vlm", nlohmann::json::object());
    p.vlm.model_dim = jv.value("model_dim", p.vlm.model_dim);
    p.vlm.layer_count = jv.value("layer_count", p.vlm.layer_count);
    p.vlm.head_count = jv.value("head_count", p.vlm.head_count);
    p.vlm.vocab_size = jv.value("vocab_size", p.vlm.vocab_size);
    p.vlm.patch_size = jv.value("patch_size", p.vlm.patch_size);
    p.vlm.max_sequence = jv.value("max_sequence", p.vlm.max_sequence);
    p.vlm.seed = jv.value("seed", r.seed);

    const nlohmann::json jd = j.value("dit", nlohmann::json::object());
    p.dit.grid_h = jd.value("grid_h", p.dit.grid_h);
    p.dit.grid_w = jd.value("grid_w", p.dit.grid_w);
    p.dit.channels = jd.value("channels", p.dit.channels);
    p.dit.model_dim = jd.value("model_dim", p.dit.model_dim);
    p.dit.block_count = jd.value("block_count", p.dit.block_count);
    p.dit.head_count = jd.value("head_count", p.dit.head_count);
    p.dit.steps = jd.value("steps", p.dit.steps);
    p.dit.cfg_scale = jd.value("cfg_scale", p.dit.cfg_scale);
    p.dit.seed = jd.value("seed", r.seed);

    if (j.contains("steps")) p.dit.steps = j.at("steps").get<int>();
    if (j.contains("cfg")) p.dit.cfg_scale = j.at("cfg").get<double>();

    if (!f.mode.empty()) p.mode = mode_from_name(f.mode);
    if (f.tokens >= 0) p.reasoning_budget = f.tokens;
    if (!f.layer.empty()) p.layer = parse_layer(f.layer);
    if (f.steps >= 0) p.dit.steps = f.steps;
    if (f.cfg >= 0.0) p.dit.cfg_scale = f.cfg;
    if (f.fit >= 0) p.fit_target = f.fit;
    if (f.system_text != "\x01") p.system_text = f.system_text;
    if (f.template_text != "\x01") p.template_text = f.template_text;

    if (j.contains("blocks"))
        r.probe_blocks = j.at("blocks").get<std::vector<int>>();
    if (!f.blocks.empty()) r.probe_blocks = parse_int_list(f.blocks, "blocks");
    if (r.probe_blocks.empty())
        for (int b = 0; b < p.dit.block_count; ++b) r.probe_blocks.push_back(b);

    const nlohmann::json jj = j.value("judge", nlohmann::json::object());
    r.judge.url = jj.value("endpoint", r.judge.url);
    r.judge.model = jj.value("model", r.judge.model);
    r.judge.max_attempts = jj.value("max_attempts", r.judge.max_attempts);
    r.judge.backoff_ms = jj.value("backoff_ms", r.judge.backoff_ms);

    r.echo = {{"mode", mode_name(p.mode)},
              {"tokens", p.reasoning_budget},
              {"layer", p.layer == 0 ? nlohmann::json("last") : nlohmann::json(p.layer)},
              {"steps", p.dit.steps},
              {"cfg", p.dit.cfg_scale},
              {"seed", r.seed},
              {"fit", p.fit_target},
              {"system_text", p.system_text},
              {"template_text", p.template_text},
              {"vlm",
               {{"model_dim", p.vlm.model_dim},
                {"layer_count", p.vlm.layer_count},
                {"head_count", p.vlm.head_count},
                {"vocab_size", p.vlm.vocab_size},
                {"patch_size", p.vlm.patch_size},
                {"max_sequence", p.vlm.max_sequence},
                {"seed", p.vlm.seed}}},
              {"dit",
               {{"grid_h", p.dit.grid_h},
                {"grid_w", p.dit.grid_w},
                {"channels", p.dit.channels},
                {"model_dim", p.dit.model_dim},
                {"block_count", p.dit.block_count},
                {"head_count", p.dit.head_count},
                {"seed", p.dit.seed}}}};
    return r;
}

inline void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_params = true) {
    cmd->add_option("--config", f.config, "JSON config file; flags override its values");
    cmd->add_option("--mode", f.mode, "conditioning mode: full-final | image-hs-only");
    cmd->add_option("--tokens", f.tokens, "reasoning token budget");
    cmd->add_option("--layer", f.layer, "encoder layer to read: 'last' or 1-based index");
    cmd->add_option("--steps", f.steps, "denoising steps");
    cmd->add_option("--cfg", f.cfg, "guidance scale");
    cmd->add_option("--seed", f.seed, "base seed; all randomness derives from it");
    cmd->add_option("--fit", f.fit, "truncate or pad the bundle to this length");
    cmd->add_option("--system", f.system_text, "system text");
    cmd->add_option("--template", f.template_text, "user template text");
    cmd->add_flag("--dry-run", f.dry_run, "validate and print the plan without writing");
    if (with_params) {
        cmd->add_option("--dit-params", f.dit_params, "generator weights (.tens)");
        cmd->add_option("--vlm-params", f.vlm_params, "encoder weights (.tens)");
    }
}

// -- shared helpers --------------------------------------------------------------

inline void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write '" + path + "'");
    f << text;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline VlmModel make_vlm(const ResolvedRun& r, const RunFlags& f) {
    VlmModel vlm(r.pipe.vlm);
    if (!f.vlm_params.empty()) load_tensors_into(f.vlm_params, vlm.named_params());
    return vlm;
}

inline DitModel make_dit(const ResolvedRun& r, const RunFlags& f) {
    DitModel dit(r.pipe.dit);
    if (!f.dit_params.empty()) load_tensors_into(f.dit_params, dit.named_params());
    return dit;
}

inline void print_dry_run(const std::string& subcommand, const nlohmann::json& echo,
                          const std::vector<std::string>& outputs) {
    nlohmann::json plan;
    plan["subcommand"] = subcommand;
    plan["config"] = echo;
    plan["would_write"] = outputs;
    std::cout << plan.dump(2) << "\n";
}

inline std::string run_output_dir(const std::string& out, const std::string& sub) {
    return (std::filesystem::path(out) / sub).string();
}

inline void write_run_result(PipelineResult& res, const nlohmann::json& echo,
                             const std::string& dir) {
    ensure_dir(dir);
    res.trace.config_echo = echo;
    write_png(res.image, (std::filesystem::path(dir) / "image.png").string());
    write_json((std::filesystem::path(dir) / "trace.json").string(), trace_to_json(res.trace));
}

// -- subcommands -------------------------------------------------------------------

inline void cmd_render(const std::string& spec_path, const std::string& out_path,
                       std::string boxes_path, bool dry) {
    const PageSpec spec = load_page_spec(spec_path);
    if (boxes_path.empty()) boxes_path = out_path + ".boxes.json";
    if (dry) {
        PageSpec sized = spec;
        apply_default_canvas(sized);
        const std::vector<std::string> violations = validate_spec(sized);
        if (!violations.empty()) {
            std::string msg = "page spec invalid:";
            for (const std::string& v : violations) msg += "\n  - " + v;
            fail(ErrorKind::spec_validation, msg);
        }
        print_dry_run("render",
                      {{"spec", spec_path},
                       {"family", family_name(sized.family)},
                       {"canvas", {sized.canvas_width, sized.canvas_height}}},
                      {out_path, boxes_path});
        return;
    }
    const RenderedPage page = render_page_with_boxes(spec);
    const size_t bytes = write_png(page.image, out_path);
    write_json(boxes_path, boxes_to_json(page.boxes));
    std::cout << "wrote " << out_path << " (" << page.image.width() << "x" << page.image.height()
              << ", " << bytes << " bytes) and " << boxes_path << "\n";
}

inline void cmd_run(const std::string& page_path, const std::string& out_dir, const RunFlags& f,
                    bool tokens_given, bool dump_bundle) {
    const ResolvedRun r = resolve_run(f);
    if (r.pipe.mode == ConditioningMode::image_hs_only && tokens_given)
        std::cerr << "warning: --tokens is ignored in image-hs-only mode\n";
    if (f.dry_run) {
        print_dry_run("run", r.echo,
                      {run_output_dir(out_dir, "image.png"), run_output_dir(out_dir, "trace.json")});
        return;
    }
    const RasterImage page = read_png(page_path);
    const VlmModel vlm = make_vlm(r, f);
    const DitModel dit = make_dit(r, f);
    PipelineResult res = run_pipeline(page, r.pipe, vlm, dit, r.seed);
    write_run_result(res, r.echo, out_dir);
    if (dump_bundle)
        save_tensors(run_output_dir(out_dir, "bundle.tens"), r.seed,
                     std::vector<std::pair<std::string, const Matrix*>>{
                         {"bundle", &res.bundle.rows}});
    std::cout << "mode " << res.trace.mode << ", layer " << res.trace.layer << ", bundle "
              << res.trace.bundle_length << " rows (" << res.trace.image_length << " image + "
              << res.trace.reasoning_length << " reasoning)\nwrote "
              << run_output_dir(out_dir, "image.png") << "\n";
}

inline void cmd_sweep_tokens(const std::string& page_path, const std::string& budgets_csv,
                             const std::string& out_dir, RunFlags f) {
    const std::vector<int> budgets = parse_int_list(budgets_csv, "budgets");
    f.mode = "full-final";
    ResolvedRun r = resolve_run(f);
    if (f.dry_run) {
        std::vector<std::string> outs;
        for (int b : budgets) outs.push_back(run_output_dir(out_dir, "tokens-" + std::to_string(b)));
        print_dry_run("sweep-tokens", r.echo, outs);
        return;
    }
    const RasterImage page = read_png(page_path);
    const VlmModel vlm = make_vlm(r, f);
    const DitModel dit = make_dit(r, f);
    nlohmann::json summary = nlohmann::json::array();
    std::cout << "budget  bundle  image-hash\n";
    for (int b : budgets) {
        r.pipe.reasoning_budget = b;
        r.echo["tokens"] = b;
        PipelineResult res = run_pipeline(page, r.pipe, vlm, dit, r.seed);
        write_run_result(res, r.echo, run_output_dir(out_dir, "tokens-" + std::to_string(b)));
        summary.push_back(trace_to_json(res.trace));
        std::printf("%6d  %6d  %016llx\n", b, res.trace.bundle_length,
                    static_cast<unsigned long long>(res.trace.image_hash));
    }
    write_json(run_output_dir(out_dir, "summary.json"), summary);
}

inline void cmd_sweep_layers(const std::string& page_path, const std::string& layers_csv,
                             const std::string& out_dir, const RunFlags& f) {
    std::vector<int> layers;
    {
        std::string cur;
        for (char c : layers_csv + ",") {
            if (c == ',') {
                if (!cur.empty()) layers.push_back(parse_layer(cur));
                cur.clear();
            } else if (!std::isspace(static_cast<unsigned char>(c))) {
                cur.push_back(c);
            }
        }
    }
    if (layers.empty()) fail(ErrorKind::usage, "layers list is empty");
    ResolvedRun r = resolve_run(f);
    if (f.dry_run) {
        std::vector<std::string> outs;
        for (int l : layers) outs.push_back(run_output_dir(out_dir, "layer-" + std::to_string(l)));
        print_dry_run("sweep-layers", r.echo, outs);
        return;
    }
    const RasterImage page = read_png(page_path);
    const VlmModel vlm = make_vlm(r, f);
    const DitModel dit = make_dit(r, f);
    std::vector<PipelineResult> results = layer_sweep(page, r.pipe, vlm, dit, r.seed, layers);
    nlohmann::json summary = nlohmann::json::array();
    std::cout << "layer  bundle-hash       image-hash\n";
    for (PipelineResult& res : results) {
        r.echo["layer"] = res.trace.layer;
        write_run_result(res, r.echo, run_output_dir(out_dir, "layer-" + std::to_string(res.trace.layer)));
        summary.push_back(trace_to_json(res.trace));
        std::printf("%5d  %016llx  %016llx\n", res.trace.layer,
                    static_cast<unsigned long long>(res.trace.bundle_hash),
                    static_cast<unsigned long long>(res.trace.image_hash));
    }
    write_json(run_output_dir(out_dir, "summary.json"), summary);
}

inline void cmd_probe_routing(const std::string& page_path, const std::string& out_dir,
                              const RunFlags& f) {
    const ResolvedRun r = resolve_run(f);
    if (r.pipe.dit.cfg_scale == 0.0)
        fail(ErrorKind::config,
             "guidance 0 never evaluates the conditional branch; routing needs cfg > 0");
    if (f.dry_run) {
        print_dry_run("probe-routing", r.echo,
                      {run_output_dir(out_dir, "routing.json"),
                       run_output_dir(out_dir, "recordings.tens")});
        return;
    }
    const RasterImage page = read_png(page_path);
    const VlmModel vlm = make_vlm(r, f);
    DitModel dit = make_dit(r, f);
    auto recorder = dit.attention_hook(r.probe_blocks);
    recorder->clear();
    PipelineResult res = run_pipeline(page, r.pipe, vlm, dit, r.seed);
    const RoutingReport routing = routing_shares(recorder->records);
    ensure_dir(out_dir);
    res.trace.config_echo = r.echo;
    write_json(run_output_dir(out_dir, "trace.json"), trace_to_json(res.trace));
    write_json(run_output_dir(out_dir, "routing.json"), routing_report_to_json(routing));
    write_text(run_output_dir(out_dir, "routing.txt"), routing_report_text(routing));
    save_recordings(run_output_dir(out_dir, "recordings"), recorder->records);
    std::cout << routing_report_text(routing);
}

inline void cmd_diagnose_retrieval(const std::string& manifest_path, const std::string& variant,
                                   const std::string& ks_csv, const std::string& out_path,
                                   const RunFlags& f) {
    const ResolvedRun r = resolve_run(f);
    const std::vector<int> ks = parse_int_list(ks_csv, "k");
    nlohmann::json manifest = load_config_file(manifest_path);
    if (!manifest.is_array() || manifest.size() < 2)
        fail(ErrorKind::retrieval, "retrieval manifest needs an array of at least 2 items");
    if (f.dry_run) {
        print_dry_run("diagnose-retrieval", r.echo, {out_path});
        return;
    }
    const std::string base_dir =
        std::filesystem::path(manifest_path).parent_path().string();
    const VlmModel vlm = make_vlm(r, f);
    std::vector<RetrievalItem> items;
    for (const nlohmann::json& entry : manifest) {
        const std::string rel = entry.at("page").get<std::string>();
        const std::string page_path =
            rel.front() == '/' || base_dir.empty() ? rel : base_dir + "/" + rel;
        const RasterImage page = read_png(page_path);
        TokenSequence seq = vlm.build_prefix(page, r.pipe.template_text, r.pipe.system_text);
        const HiddenStateMatrix states = vlm.recompute_states(seq, vlm.config().layer_count);
        const ConditioningBundle image_only =
            VlmModel::extract(states, ConditioningMode::image_hs_only);

        TokenSequence text_seq;
        text_seq.ids = tokenize(entry.at("text").get<std::string>());
        text_seq.segments.assign(text_seq.ids.size(), Segment::user);
        const HiddenStateMatrix text_states =
            vlm.recompute_states(text_seq, vlm.config().layer_count);
        items.push_back({image_only.rows, text_states.values});
    }
    std::vector<RetrievalVariant> variants;
    if (variant == "all") {
        variants = {RetrievalVariant::token_max, RetrievalVariant::mean_pool,
                    RetrievalVariant::full_token};
    } else if (variant == "token-max") {
        variants = {RetrievalVariant::token_max};
    } else if (variant == "mean-pool") {
        variants = {RetrievalVariant::mean_pool};
    } else if (variant == "full-token") {
        variants = {RetrievalVariant::full_token};
    } else {
        fail(ErrorKind::usage, "unknown retrieval variant '" + variant + "'");
    }
    nlohmann::json out;
    out["items"] = items.size();
    nlohmann::json reports = nlohmann::json::array();
    for (RetrievalVariant v : variants) {
        const RetrievalReport rep = tokenmax_retrieval(items, ks, v);
        reports.push_back(retrieval_report_to_json(rep));
        std::cout << retrieval_report_text(rep);
    }
    out["reports"] = reports;
    write_json(out_path, out);
}

inline void cmd_train_toy(const std::string& out_dir, const ToyConfig& cfg, bool dry) {
    if (dry) {
        nlohmann::json echo = {{"steps", cfg.train_steps},   {"batch", cfg.batch_size},
                               {"lr", cfg.lr},               {"holdout", cfg.holdout},
                               {"budget", cfg.reasoning_budget}, {"seed", cfg.seed}};
        print_dry_run("train-toy", echo,
                      {run_output_dir(out_dir, "dit.tens"), run_output_dir(out_dir, "vlm.tens"),
                       run_output_dir(out_dir, "toy_report.json")});
        return;
    }
    ToyOutcome outcome = run_toy_task(cfg, [](int step, double loss) {
        std::printf("step %5d  loss %.6f\n", step, loss);
    });
    ensure_dir(out_dir);
    save_tensors(run_output_dir(out_dir, "dit.tens"), cfg.seed, outcome.dit.named_params());
    save_tensors(run_output_dir(out_dir, "vlm.tens"), cfg.seed, outcome.vlm.named_params());
    nlohmann::json report;
    report["final_loss"] = outcome.train.final_loss;
    report["matched"] = outcome.eval.matched;
    report["holdout"] = outcome.eval.total;
    report["channel_errors"] = outcome.eval.channel_errors;
    report["visual_share"] = outcome.eval.visual_share;
    report["uniform_baseline"] = outcome.eval.uniform_baseline;
    report["config"] = {{"steps", cfg.train_steps},   {"batch", cfg.batch_size},
                        {"lr", cfg.lr},               {"holdout", cfg.holdout},
                        {"budget", cfg.reasoning_budget}, {"seed", cfg.seed}};
    write_json(run_output_dir(out_dir, "toy_report.json"), report);
    std::printf("matched %d/%d held-out colors, visual share %.4f (baseline %.4f)\n",
                outcome.eval.matched, outcome.eval.total, outcome.eval.visual_share,
                outcome.eval.uniform_baseline);
}

// -- bench subcommands ----------------------------------------------------------------

inline BenchSpec filter_bench(BenchSpec spec, const std::string& categories_csv, int limit,
                              int samples_override) {
    if (!categories_csv.empty()) {
        std::set<std::string> keep;
        std::string cur;
        for (char c : categories_csv + ",") {
            if (c == ',') {
                if (!cur.empty()) keep.insert(cur);
                cur.clear();
            } else if (!std::isspace(static_cast<unsigned char>(c))) {
                cur.push_back(c);
            }
        }
        for (const std::string& name : keep) category_from_name(name);
        std::vector<BenchCategoryBlock> kept;
        for (BenchCategoryBlock& block : spec.categories)
            if (keep.count(category_name(block.category))) kept.push_back(std::move(block));
        spec.categories = std::move(kept);
        if (spec.categories.empty()) fail(ErrorKind::usage, "category filter matches nothing");
    }
    if (limit > 0)
        for (BenchCategoryBlock& block : spec.categories)
            if (static_cast<int>(block.prompts.size()) > limit) block.prompts.resize(limit);
    if (samples_override > 0) spec.samples_per_prompt = samples_override;
    return spec;
}

inline void cmd_bench_build(const std::string& spec_path, const std::string& out_dir,
                            const std::string& emit_default_dir, bool dry) {
    if (!emit_default_dir.empty()) {
        if (dry) {
            print_dry_run("bench build", {{"emit_default", emit_default_dir}},
                          {emit_default_dir + "/simple_v2v_bench.json"});
            return;
        }
        const std::string path = write_default_bench(emit_default_dir);
        std::cout << "wrote default bench spec " << path << "\n";
        return;
    }
    if (spec_path.empty()) fail(ErrorKind::usage, "bench build needs --spec or --emit-default");
    if (dry) {
        const BenchSpec spec = load_bench_spec(spec_path);
        const std::vector<std::string> violations = validate_bench_spec(spec);
        if (!violations.empty()) {
            std::string msg = "bench spec invalid:";
            for (const std::string& v : violations) msg += "\n  - " + v;
            fail(ErrorKind::bench_spec, msg);
        }
        print_dry_run("bench build", {{"spec", spec_path}, {"prompts", spec.total_prompts()}},
                      {out_dir + "/pages", out_dir + "/manifest.jsonl"});
        return;
    }
    const BuildResult r = build_bench(spec_path, out_dir);
    std::cout << "rendered " << r.pages_rendered << " pages, manifest " << r.manifest_path << "\n";
}

inline void cmd_bench_run(const std::string& spec_path, const std::string& out_dir, RunFlags f,
                          const std::string& categories, int limit, int samples) {
    nlohmann::json file_cfg =
        f.config.empty() ? nlohmann::json::object() : load_config_file(f.config);
    ResolvedRun r = resolve_run(f);
    // Full-size pages carry 784 image tokens, so the runner widens the toy
    // sequence budget unless the config pins one.
    if (!file_cfg.contains("vlm") || !file_cfg.at("vlm").contains("max_sequence"))
        r.pipe.vlm.max_sequence = std::max(r.pipe.vlm.max_sequence, 2048);
    if (f.tokens < 0 && !file_cfg.contains("tokens")) r.pipe.reasoning_budget = 32;
    r.echo["tokens"] = r.pipe.reasoning_budget;
    r.echo["vlm"]["max_sequence"] = r.pipe.vlm.max_sequence;

    const BenchSpec spec =
        filter_bench(load_bench_spec(spec_path), categories, limit, samples);
    if (f.dry_run) {
        print_dry_run("bench run",
                      r.echo,
                      {out_dir + "/outputs (" +
                       std::to_string(spec.total_prompts() * spec.samples_per_prompt) +
                       " samples)"});
        return;
    }
    const VlmModel vlm = make_vlm(r, f);
    const DitModel dit = make_dit(r, f);
    ensure_dir(out_dir + "/outputs");
    ensure_dir(out_dir + "/traces");
    int done = 0;
    for (const BenchCategoryBlock& block : spec.categories) {
        for (const PromptSpec& p : block.prompts) {
            const RasterImage page = render_page(p.page);
            for (int s = 0; s < spec.samples_per_prompt; ++s) {
                const uint64_t sample_seed =
                    derive_seed(r.seed, p.id + "#" + std::to_string(s));
                PipelineResult res = run_pipeline(page, r.pipe, vlm, dit, sample_seed);
                res.trace.config_echo = r.echo;
                const std::string stem = p.id + "_s" + std::to_string(s);
                write_png(res.image, out_dir + "/outputs/" + stem + ".png");
                write_json(out_dir + "/traces/" + stem + ".json", trace_to_json(res.trace));
                ++done;
            }
        }
        std::cout << category_name(block.category) << " done\n";
    }
    std::cout << "generated " << done << " samples under " << out_dir << "/outputs\n";
}

inline void cmd_bench_score(const std::string& spec_path, const std::string& run_dir,
                            const std::string& judge, const std::string& records_path,
                            const std::string& categories, int limit, int samples,
                            const RunFlags& f, const std::string& endpoint_flag,
                            const std::string& model_flag) {
    ResolvedRun r = resolve_run(f);
    if (!endpoint_flag.empty()) r.judge.url = endpoint_flag;
    if (!model_flag.empty()) r.judge.model = model_flag;
    const BenchSpec spec =
        filter_bench(load_bench_spec(spec_path), categories, limit, samples);
    if (judge != "stub" && judge != "remote")
        fail(ErrorKind::usage, "--judge must be stub or remote, got '" + judge + "'");
    if (judge == "remote" && r.judge.url.empty())
        fail(ErrorKind::config, "remote judge needs an endpoint (config judge.endpoint or --endpoint)");
    if (f.dry_run) {
        print_dry_run("bench score",
                      {{"judge", judge},
                       {"samples", spec.total_prompts() * spec.samples_per_prompt}},
                      {records_path});
        return;
    }
    std::vector<ScoreRecord> records;
    for (const BenchCategoryBlock& block : spec.categories) {
        for (const PromptSpec& p : block.prompts) {
            for (int s = 0; s < spec.samples_per_prompt; ++s) {
                const std::string out_png =
                    run_dir + "/outputs/" + p.id + "_s" + std::to_string(s) + ".png";
                const RasterImage output = read_png(out_png);
                if (judge == "stub") {
                    records.push_back(judge_stub_record(output, p, s));
                } else {
                    const JudgeScores js =
                        judge_remote(render_page(p.page), output, p, r.judge);
                    records.push_back(make_record(p.id, s, js.quality, js.alignment,
                                                  "remote:" + r.judge.model, ""));
                }
            }
        }
    }
    save_records_jsonl(records_path, records);
    std::cout << "scored " << records.size() << " samples -> " << records_path << "\n";
}

inline void cmd_bench_report(const std::string& spec_path, const std::string& records_path,
                             const std::string& out_json, const std::string& categories, int limit,
                             int samples, bool dry) {
    const BenchSpec spec =
        filter_bench(load_bench_spec(spec_path), categories, limit, samples);
    if (dry) {
        print_dry_run("bench report", {{"records", records_path}}, {out_json});
        return;
    }
    const std::vector<ScoreRecord> records = load_records_jsonl(records_path);
    const BenchReport report = aggregate(spec, records);
    if (!out_json.empty()) write_json(out_json, report_to_json(report));
    std::cout << report_text(report);
}

// -- entry point ------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"desk-scale page-to-image conditioning workbench"};
    app.require_subcommand(1);

    // render
    auto* render = app.add_subcommand("render", "rasterize a page spec to PNG");
    std::string render_spec, render_out, render_boxes;
    bool render_dry = false;
    render->add_option("--spec", render_spec, "page spec JSON")->required();
    render->add_option("--out", render_out, "output PNG path")->required();
    render->add_option("--boxes", render_boxes, "sidecar boxes JSON path");
    render->add_flag("--dry-run", render_dry, "validate and print the plan without writing");

    // run
    auto* run = app.add_subcommand("run", "condition the generator on one page");
    RunFlags run_flags;
    std::string run_page, run_out;
    bool run_dump_bundle = false;
    run->add_option("--page", run_page, "input page PNG")->required();
    run->add_option("--out", run_out, "output directory")->required();
    run->add_flag("--dump-bundle", run_dump_bundle, "also write the conditioning rows");
    add_run_flags(run, run_flags);

    // sweep-tokens
    auto* sweep_t = app.add_subcommand("sweep-tokens", "run the pipeline across token budgets");
    RunFlags sweep_t_flags;
    std::string sweep_t_page, sweep_t_out, sweep_t_budgets = "50,100,150,200,300";
    sweep_t->add_option("--page", sweep_t_page, "input page PNG")->required();
    sweep_t->add_option("--out", sweep_t_out, "output directory")->required();
    sweep_t->add_option("--budgets", sweep_t_budgets, "comma-separated budgets");
    add_run_flags(sweep_t, sweep_t_flags);

    // sweep-layers
    auto* sweep_l = app.add_subcommand("sweep-layers", "run the pipeline across encoder layers");
    RunFlags sweep_l_flags;
    std::string sweep_l_page, sweep_l_out, sweep_l_layers;
    sweep_l->add_option("--page", sweep_l_page, "input page PNG")->required();
    sweep_l->add_option("--out", sweep_l_out, "output directory")->required();
    sweep_l->add_option("--layers", sweep_l_layers, "comma-separated layers ('last' or 1-based)")
        ->required();
    add_run_flags(sweep_l, sweep_l_flags);

    // probe-routing
    auto* probe = app.add_subcommand("probe-routing", "record and summarize conditioning attention");
    RunFlags probe_flags;
    std::string probe_page, probe_out;
    probe->add_option("--page", probe_page, "input page PNG")->required();
    probe->add_option("--out", probe_out, "output directory")->required();
    probe->add_option("--blocks", probe_flags.blocks, "comma-separated block indices to record");
    add_run_flags(probe, probe_flags);

    // diagnose-retrieval
    auto* diag = app.add_subcommand("diagnose-retrieval", "cross-modal retrieval diagnostics");
    RunFlags diag_flags;
    std::string diag_manifest, diag_variant = "all", diag_ks = "1,3", diag_out = "retrieval.json";
    diag->add_option("--manifest", diag_manifest, "JSON array of {page, text} items")->required();
    diag->add_option("--variant", diag_variant, "token-max | mean-pool | full-token | all");
    diag->add_option("--k", diag_ks, "comma-separated recall cutoffs");
    diag->add_option("--out", diag_out, "report JSON path");
    add_run_flags(diag, diag_flags);

    // train-toy
    auto* toy = app.add_subcommand("train-toy", "train the generator on the color-binding task");
    ToyConfig toy_cfg;
    std::string toy_out;
    int64_t toy_seed = -1;
    bool toy_dry = false;
    toy->add_option("--out", toy_out, "output directory")->required();
    toy->add_option("--steps", toy_cfg.train_steps, "training steps");
    toy->add_option("--batch", toy_cfg.batch_size, "batch size");
    toy->add_option("--lr", toy_cfg.lr, "learning rate");
    toy->add_option("--holdout", toy_cfg.holdout, "held-out colors");
    toy->add_option("--budget", toy_cfg.reasoning_budget, "reasoning budget");
    toy->add_option("--levels", toy_cfg.color_levels, "levels per channel");
    toy->add_option("--eval-steps", toy_cfg.eval_sample_steps, "denoising steps at eval");
    toy->add_option("--threshold", toy_cfg.match_threshold, "per-channel match threshold");
    toy->add_option("--seed", toy_seed, "base seed");
    toy->add_flag("--dry-run", toy_dry, "print the plan without training");

    // bench
    auto* bench = app.add_subcommand("bench", "benchmark lifecycle");
    bench->require_subcommand(1);

    auto* bbuild = bench->add_subcommand("build", "render bench pages and manifest");
    std::string bb_spec, bb_out = "bench_out", bb_emit;
    bool bb_dry = false;
    bbuild->add_option("--spec", bb_spec, "bench spec JSON");
    bbuild->add_option("--out", bb_out, "output directory");
    bbuild->add_option("--emit-default", bb_emit, "write the generated default spec to this dir");
    bbuild->add_flag("--dry-run", bb_dry, "validate and print the plan without writing");

    auto* brun = bench->add_subcommand("run", "generate samples for every prompt");
    RunFlags br_flags;
    std::string br_spec, br_out = "bench_out", br_categories;
    int br_limit = 0, br_samples = 0;
    brun->add_option("--spec", br_spec, "bench spec JSON")->required();
    brun->add_option("--out", br_out, "output directory");
    brun->add_option("--categories", br_categories, "comma-separated category filter");
    brun->add_option("--limit", br_limit, "keep only the first N prompts per category");
    brun->add_option("--samples", br_samples, "override samples per prompt");
    add_run_flags(brun, br_flags);

    auto* bscore = bench->add_subcommand("score", "judge generated samples");
    RunFlags bs_flags;
    std::string bs_spec, bs_run = "bench_out", bs_judge = "stub", bs_records, bs_categories;
    std::string bs_endpoint, bs_model;
    int bs_limit = 0, bs_samples = 0;
    bscore->add_option("--spec", bs_spec, "bench spec JSON")->required();
    bscore->add_option("--run", bs_run, "directory produced by bench run");
    bscore->add_option("--judge", bs_judge, "stub | remote");
    bscore->add_option("--records", bs_records, "output records JSONL")->required();
    bscore->add_option("--categories", bs_categories, "comma-separated category filter");
    bscore->add_option("--limit", bs_limit, "keep only the first N prompts per category");
    bscore->add_option("--samples", bs_samples, "override samples per prompt");
    bscore->add_option("--endpoint", bs_endpoint, "remote judge endpoint url");
    bscore->add_option("--model", bs_model, "remote judge model name");
    add_run_flags(bscore, bs_flags, false);

    auto* breport = bench->add_subcommand("report", "aggregate score records");
    std::string bp_spec, bp_records, bp_out, bp_categories;
    int bp_limit = 0, bp_samples = 0;
    bool bp_dry = false;
    breport->add_option("--spec", bp_spec, "bench spec JSON")->required();
    breport->add_option("--records", bp_records, "records JSONL")->required();
    breport->add_option("--out", bp_out, "report JSON path");
    breport->add_option("--categories", bp_categories, "comma-separated category filter");
    breport->add_option("--limit", bp_limit, "keep only the first N prompts per category");
    breport->add_option("--samples", bp_samples, "override samples per prompt");
    breport->add_flag("--dry-run", bp_dry, "print the plan without reading records");

    try {
        app.parse(argc, argv);

        if (*render) {
            cmd_render(render_spec, render_out, render_boxes, render_dry);
        } else if (*run) {
            cmd_run(run_page, run_out, run_flags, run->count("--tokens") > 0, run_dump_bundle);
        } else if (*sweep_t) {
            cmd_sweep_tokens(sweep_t_page, sweep_t_budgets, sweep_t_out, sweep_t_flags);
        } else if (*sweep_l) {
            cmd_sweep_layers(sweep_l_page, sweep_l_layers, sweep_l_out, sweep_l_flags);
        } else if (*probe) {
            cmd_probe_routing(probe_page, probe_out, probe_flags);
        } else if (*diag) {
            cmd_diagnose_retrieval(diag_manifest, diag_variant, diag_ks, diag_out, diag_flags);
        } else if (*toy) {
            if (toy_seed >= 0) toy_cfg.seed = static_cast<uint64_t>(toy_seed);
            cmd_train_toy(toy_out, toy_cfg, toy_dry);
        } else if (*bench) {
            if (*bbuild) {
                cmd_bench_build(bb_spec, bb_out, bb_emit, bb_dry);
            } else if (*brun) {
                cmd_bench_run(br_spec, br_out, br_flags, br_categories, br_limit, br_samples);
            } else if (*bscore) {
                cmd_bench_score(bs_spec, bs_run, bs_judge, bs_records, bs_categories, bs_limit,
                                bs_samples, bs_flags, bs_endpoint, bs_model);
            } else if (*breport) {
                cmd_bench_report(bp_spec, bp_records, bp_out, bp_categories, bp_limit, bp_samples,
                                 bp_dry);
            }
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        nlohmann::json err = {{"error", {{"kind", error_kind_name(e.kind())},
                                         {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err = {{"error", {{"kind", "internal"}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}

}  // namespace cli
}  // namespace v2v
