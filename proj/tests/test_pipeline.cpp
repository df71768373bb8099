#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "v2v/page.hpp"
#include "v2v/pipeline.hpp"

using namespace v2v;

namespace {

RasterImage swatch_page(int w, int h, Rgb c) {
    PageSpec spec;
    spec.family = PageFamily::color_card;
    spec.canvas_width = w;
    spec.canvas_height = h;
    spec.elements = {PageElement::swatch(c)};
    return render_page(spec);
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.reasoning_budget = 8;
    cfg.dit.steps = 4;
    return cfg;
}

}  // namespace

TEST_CASE("full-final bundle length is image plus budget") {
    const PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(96, 96, Rgb{220, 40, 40});
    const PipelineResult res = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(res.trace.image_length == 36);
    REQUIRE(res.trace.reasoning_length == 8);
    REQUIRE(res.trace.bundle_length == 36 + 8);
    REQUIRE(res.bundle.length() == 44);
    REQUIRE(res.trace.mode == "full-final");
    REQUIRE(res.sequence.length() == res.trace.prefix_length + 8);
}

TEST_CASE("the reference page layout yields the reference bundle length") {
    PipelineConfig cfg;
    cfg.reasoning_budget = 200;
    cfg.dit.steps = 2;
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(304, 224, Rgb{90, 200, 40});
    const PipelineResult res = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(res.trace.image_length == 266);
    REQUIRE(res.trace.reasoning_length == 200);
    REQUIRE(res.trace.bundle_length == 466);
}

TEST_CASE("image-only mode ignores the reasoning budget") {
    PipelineConfig cfg = small_config();
    cfg.mode = ConditioningMode::image_hs_only;
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(96, 96, Rgb{10, 90, 160});

    cfg.reasoning_budget = 0;
    const PipelineResult a = run_pipeline(page, cfg, vlm, dit, 5);
    cfg.reasoning_budget = 64;
    const PipelineResult b = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(a.trace.bundle_length == 36);
    REQUIRE(a.trace.reasoning_length == 0);
    REQUIRE(a.trace.bundle_hash == b.trace.bundle_hash);
    REQUIRE(a.trace.image_hash == b.trace.image_hash);
}

TEST_CASE("full-final refuses a zero reasoning budget") {
    PipelineConfig cfg = small_config();
    cfg.reasoning_budget = 0;
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    try {
        run_pipeline(swatch_page(96, 96, Rgb{1, 2, 3}), cfg, vlm, dit, 5);
        FAIL("expected an error");
    } catch (const Error& e) {
        REQUIRE(e.kind() == ErrorKind::mode);
        REQUIRE(std::string(e.what()).find("stage generate_reasoning") != std::string::npos);
    }
}

TEST_CASE("stage names prefix pipeline errors") {
    PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    try {
        run_pipeline(new_canvas(70, 70, Rgb{0, 0, 0}), cfg, vlm, dit, 5);
        FAIL("expected an error");
    } catch (const Error& e) {
        REQUIRE(e.kind() == ErrorKind::patch_size);
        REQUIRE(std::string(e.what()).find("stage build_prefix") != std::string::npos);
    }
}

TEST_CASE("fit_length truncates reasoning rows before image rows") {
    PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(96, 96, Rgb{120, 40, 220});

    cfg.fit_target = 40;  // raw is 44: drop the last 4 reasoning rows
    PipelineResult trunc = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(trunc.trace.bundle_length_raw == 44);
    REQUIRE(trunc.trace.bundle_length == 40);
    REQUIRE(trunc.bundle.image_length == 36);
    REQUIRE(trunc.bundle.reasoning_length == 4);

    cfg.fit_target = 20;  // below the image segment: image rows truncate too
    PipelineResult tight = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(tight.bundle.image_length == 20);
    REQUIRE(tight.bundle.reasoning_length == 0);

    cfg.fit_target = 50;  // pad rows fill the tail and are masked out
    PipelineResult padded = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(padded.bundle.length() == 50);
    REQUIRE(padded.bundle.count(BundleSegment::pad) == 6);
    REQUIRE(padded.bundle.row_segments.back() == BundleSegment::pad);
    REQUIRE(padded.bundle.source_positions.back() == -1);
    for (int j = 0; j < padded.bundle.rows.cols(); ++j)
        REQUIRE(padded.bundle.rows.at(49, j) == 0.0);

    REQUIRE_THROWS_AS(fit_length(trunc.bundle, 0), Error);
}

TEST_CASE("padding the bundle does not change the generated image") {
    PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(96, 96, Rgb{60, 130, 20});
    const PipelineResult raw = run_pipeline(page, cfg, vlm, dit, 5);
    cfg.fit_target = 60;
    const PipelineResult padded = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(padded.bundle.count(BundleSegment::pad) == 16);
    REQUIRE(raw.trace.image_hash == padded.trace.image_hash);
}

TEST_CASE("layer selection changes the bundle") {
    PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(96, 96, Rgb{200, 200, 40});
    cfg.layer = 0;  // final
    const PipelineResult last = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(last.trace.layer == cfg.vlm.layer_count);
    cfg.layer = 1;
    const PipelineResult first = run_pipeline(page, cfg, vlm, dit, 5);
    REQUIRE(first.trace.layer == 1);
    REQUIRE(first.trace.bundle_hash != last.trace.bundle_hash);
}

TEST_CASE("layer_sweep runs each requested layer") {
    PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(96, 96, Rgb{20, 160, 90});
    const std::vector<PipelineResult> results = layer_sweep(page, cfg, vlm, dit, 5, {1, 3, 0});
    REQUIRE(results.size() == 3);
    REQUIRE(results[0].trace.layer == 1);
    REQUIRE(results[1].trace.layer == 3);
    REQUIRE(results[2].trace.layer == 4);
    REQUIRE(results[0].trace.bundle_hash != results[1].trace.bundle_hash);
    REQUIRE(results[1].trace.bundle_hash != results[2].trace.bundle_hash);
}

TEST_CASE("identical config and seed reproduce bitwise outputs") {
    const PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    const RasterImage page = swatch_page(96, 96, Rgb{240, 120, 20});
    const PipelineResult a = run_pipeline(page, cfg, vlm, dit, 9);
    const PipelineResult b = run_pipeline(page, cfg, vlm, dit, 9);
    REQUIRE(a.trace.image_hash == b.trace.image_hash);
    REQUIRE(a.trace.bundle_hash == b.trace.bundle_hash);
    REQUIRE(a.image.pixels() == b.image.pixels());

    const PipelineResult c = run_pipeline(page, cfg, vlm, dit, 10);
    REQUIRE(a.trace.image_hash != c.trace.image_hash);
}

TEST_CASE("trace json carries hashes and the echoed config") {
    const PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    DitModel dit(cfg.dit);
    PipelineResult res = run_pipeline(swatch_page(96, 96, Rgb{7, 7, 7}), cfg, vlm, dit, 5);
    nlohmann::json j = trace_to_json(res.trace);
    REQUIRE_FALSE(j.contains("config"));
    for (const char* key : {"mode", "layer", "prefix_length", "image_length", "reasoning_length",
                            "bundle_length", "bundle_hash", "image_hash", "page_hash", "seed"})
        REQUIRE(j.contains(key));

    res.trace.config_echo = {{"tokens", 8}};
    j = trace_to_json(res.trace);
    REQUIRE(j.at("config").at("tokens") == 8);
}

TEST_CASE("hidden states round trip through files") {
    const PipelineConfig cfg = small_config();
    VlmModel vlm(cfg.vlm);
    const RasterImage page = swatch_page(96, 96, Rgb{90, 90, 200});
    const TokenSequence seq = vlm.build_prefix(page, cfg.template_text, cfg.system_text);
    const HiddenStateMatrix states = vlm.recompute_states(seq, cfg.vlm.layer_count);

    const std::string base =
        (std::filesystem::temp_directory_path() / "v2v_states_roundtrip").string();
    dump_hidden_states(base, states);
    const HiddenStateMatrix back = load_hidden_states(base);
    REQUIRE(back.layer == states.layer);
    REQUIRE(back.segments.size() == states.segments.size());
    REQUIRE(back.segments == states.segments);
    // float32 narrowing at the file boundary
    REQUIRE(max_rel_diff(back.values, states.values) < 1e-6);
    std::remove((base + ".tens").c_str());
    std::remove((base + ".json").c_str());
}
