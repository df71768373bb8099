#include <catch2/catch_amalgamated.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "v2v/cli.hpp"

using namespace v2v;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

nlohmann::json slurp_json(const fs::path& p) { return nlohmann::json::parse(slurp_text(p)); }

// Runs the CLI in-process with fds 1 and 2 redirected so test logs stay clean
// and stderr diagnostics stay assertable.
RunResult invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "v2v");
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());

    const fs::path dir = fs::temp_directory_path();
    const std::string out_path = (dir / "v2v_cli_stdout.txt").string();
    const std::string err_path = (dir / "v2v_cli_stderr.txt").string();
    std::cout.flush();
    std::cerr.flush();
    fflush(stdout);
    fflush(stderr);
    const int saved_out = dup(1), saved_err = dup(2);
    REQUIRE(saved_out >= 0);
    REQUIRE(saved_err >= 0);
    const int out_fd = open(out_path.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0644);
    const int err_fd = open(err_path.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0644);
    REQUIRE(out_fd >= 0);
    REQUIRE(err_fd >= 0);
    dup2(out_fd, 1);
    dup2(err_fd, 2);
    close(out_fd);
    close(err_fd);

    RunResult r;
    r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data());

    std::cout.flush();
    std::cerr.flush();
    fflush(stdout);
    fflush(stderr);
    dup2(saved_out, 1);
    dup2(saved_err, 2);
    close(saved_out);
    close(saved_err);
    r.out = slurp_text(out_path);
    r.err = slurp_text(err_path);
    return r;
}

nlohmann::json error_json(const RunResult& r) {
    const size_t brace = r.err.find('{');
    REQUIRE(brace != std::string::npos);
    return nlohmann::json::parse(r.err.substr(brace));
}

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("v2v_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_swatch_spec(const fs::path& dir, const std::string& name,
                              const std::string& color) {
    nlohmann::json spec = {
        {"family", "inline-color-prompt"},
        {"canvas", {{"width", 96}, {"height", 96}}},
        {"elements",
         nlohmann::json::array({{{"kind", "text-run"}, {"text", "paint it"}},
                                {{"kind", "color-swatch"}, {"color", color}}})}};
    const fs::path path = dir / name;
    std::ofstream f(path);
    f << spec.dump(2) << "\n";
    return path.string();
}

std::vector<uint8_t> slurp_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("argument errors exit 2 and help exits 0") {
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"render", "--bogus"}).code == 2);
    CHECK(invoke({"no-such-subcommand"}).code == 2);
    CHECK(invoke({"render"}).code == 2);  // --spec and --out are required

    const RunResult help = invoke({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("render") != std::string::npos);
    CHECK(help.out.find("bench") != std::string::npos);
}

TEST_CASE("render writes a deterministic page with a boxes sidecar") {
    const fs::path dir = temp_dir("render");
    const std::string spec = write_swatch_spec(dir, "spec.json", "teal");

    const RunResult a = invoke({"render", "--spec", spec, "--out", (dir / "a.png").string()});
    REQUIRE(a.code == 0);
    CHECK(a.out.find("wrote") != std::string::npos);
    REQUIRE(fs::exists(dir / "a.png"));
    REQUIRE(fs::exists(dir / "a.png.boxes.json"));

    const RunResult b = invoke({"render", "--spec", spec, "--out", (dir / "b.png").string(),
                             "--boxes", (dir / "custom_boxes.json").string()});
    REQUIRE(b.code == 0);
    REQUIRE(fs::exists(dir / "custom_boxes.json"));
    CHECK(!fs::exists(dir / "b.png.boxes.json"));
    CHECK(slurp_bytes(dir / "a.png") == slurp_bytes(dir / "b.png"));

    const nlohmann::json boxes = slurp_json(dir / "custom_boxes.json");
    REQUIRE(boxes.is_array());
    CHECK(boxes.size() == 2);

    const RasterImage img = read_png((dir / "a.png").string());
    CHECK(img.width() == 96);
    CHECK(img.height() == 96);
}

TEST_CASE("render dry run validates without writing") {
    const fs::path dir = temp_dir("render_dry");
    const std::string spec = write_swatch_spec(dir, "spec.json", "navy");

    const RunResult ok = invoke({"render", "--spec", spec, "--out", (dir / "x.png").string(),
                              "--dry-run"});
    REQUIRE(ok.code == 0);
    CHECK(!fs::exists(dir / "x.png"));
    const nlohmann::json plan = nlohmann::json::parse(ok.out);
    CHECK(plan.at("subcommand") == "render");
    REQUIRE(plan.at("would_write").size() == 2);
    CHECK(plan.at("would_write")[0] == (dir / "x.png").string());

    nlohmann::json bad = {{"family", "inline-color"}, {"elements", nlohmann::json::array()}};
    const fs::path bad_path = dir / "bad.json";
    {
        std::ofstream f(bad_path);
        f << bad.dump() << "\n";
    }
    const RunResult rej = invoke({"render", "--spec", bad_path.string(), "--out",
                               (dir / "y.png").string(), "--dry-run"});
    CHECK(rej.code == 1);
    CHECK(!fs::exists(dir / "y.png"));
    const nlohmann::json err = error_json(rej);
    CHECK(err.at("error").at("kind") == "spec-validation");

    const RunResult missing = invoke({"render", "--spec", (dir / "nope.json").string(), "--out",
                                   (dir / "z.png").string()});
    CHECK(missing.code == 1);
    CHECK(error_json(missing).at("error").at("kind") == "io");
}

namespace {

std::string render_fixture_page(const fs::path& dir, const std::string& color) {
    const std::string spec = write_swatch_spec(dir, color + "_spec.json", color);
    const std::string png = (dir / (color + ".png")).string();
    REQUIRE(invoke({"render", "--spec", spec, "--out", png}).code == 0);
    return png;
}

}  // namespace

TEST_CASE("run writes an image and a trace that echoes the resolved config") {
    const fs::path dir = temp_dir("run");
    const std::string page = render_fixture_page(dir, "red");

    const fs::path cfg_path = dir / "config.json";
    {
        std::ofstream f(cfg_path);
        f << nlohmann::json({{"mode", "full-final"}, {"tokens", 4}, {"steps", 4}}).dump() << "\n";
    }

    const RunResult r = invoke({"run", "--page", page, "--out", (dir / "out").string(),
                             "--config", cfg_path.string(), "--tokens", "6", "--seed", "9"});
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(dir / "out" / "image.png"));
    REQUIRE(fs::exists(dir / "out" / "trace.json"));

    const nlohmann::json trace = slurp_json(dir / "out" / "trace.json");
    CHECK(trace.at("mode") == "full-final");
    CHECK(trace.at("reasoning_requested") == 6);  // flag beats the config file
    CHECK(trace.at("reasoning_length") == 6);
    CHECK(trace.at("image_length") == 36);
    CHECK(trace.at("bundle_length") == 42);
    CHECK(trace.at("steps") == 4);
    CHECK(trace.at("seed") == 9);
    const nlohmann::json echo = trace.at("config");
    CHECK(echo.at("tokens") == 6);
    CHECK(echo.at("steps") == 4);
    CHECK(echo.at("mode") == "full-final");
}

TEST_CASE("run is deterministic per seed") {
    const fs::path dir = temp_dir("run_det");
    const std::string page = render_fixture_page(dir, "olive");

    auto generate = [&](const std::string& sub, const std::string& seed) {
        const RunResult r = invoke({"run", "--page", page, "--out", (dir / sub).string(),
                                 "--steps", "4", "--seed", seed});
        REQUIRE(r.code == 0);
        return slurp_bytes(dir / sub / "image.png");
    };
    const std::vector<uint8_t> a = generate("a", "11");
    const std::vector<uint8_t> b = generate("b", "11");
    const std::vector<uint8_t> c = generate("c", "12");
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("run dry run plans outputs without writing and warns about ignored tokens") {
    const fs::path dir = temp_dir("run_dry");
    const std::string page = render_fixture_page(dir, "aqua");

    const RunResult dry = invoke({"run", "--page", page, "--out", (dir / "out").string(),
                               "--dry-run"});
    REQUIRE(dry.code == 0);
    CHECK(!fs::exists(dir / "out"));
    const nlohmann::json plan = nlohmann::json::parse(dry.out);
    CHECK(plan.at("subcommand") == "run");
    CHECK(plan.at("config").at("mode") == "full-final");

    const RunResult warned = invoke({"run", "--page", page, "--out", (dir / "out2").string(),
                                  "--mode", "image-hs-only", "--tokens", "8", "--steps", "2"});
    REQUIRE(warned.code == 0);
    CHECK(warned.err.find("--tokens is ignored in image-hs-only mode") != std::string::npos);

    const RunResult bundled = invoke({"run", "--page", page, "--out", (dir / "out3").string(),
                                   "--steps", "2", "--dump-bundle"});
    REQUIRE(bundled.code == 0);
    CHECK(fs::exists(dir / "out3" / "bundle.tens"));
}

TEST_CASE("missing inputs surface structured errors with exit 1") {
    const fs::path dir = temp_dir("run_err");
    const RunResult r = invoke({"run", "--page", (dir / "absent.png").string(), "--out",
                             (dir / "out").string()});
    CHECK(r.code == 1);
    const nlohmann::json err = error_json(r).at("error");
    CHECK(err.at("kind") == "io");
    CHECK(err.at("message").get<std::string>().find("absent.png") != std::string::npos);
}

TEST_CASE("sweep-tokens writes one run per budget plus a summary") {
    const fs::path dir = temp_dir("sweep_t");
    const std::string page = render_fixture_page(dir, "lime");

    const RunResult r = invoke({"sweep-tokens", "--page", page, "--out", (dir / "s").string(),
                             "--budgets", "2,5", "--steps", "3", "--seed", "4"});
    REQUIRE(r.code == 0);
    for (const char* sub : {"tokens-2", "tokens-5"}) {
        REQUIRE(fs::exists(dir / "s" / sub / "image.png"));
        REQUIRE(fs::exists(dir / "s" / sub / "trace.json"));
    }
    CHECK(slurp_json(dir / "s" / "tokens-2" / "trace.json").at("bundle_length") == 38);
    CHECK(slurp_json(dir / "s" / "tokens-5" / "trace.json").at("bundle_length") == 41);

    const nlohmann::json summary = slurp_json(dir / "s" / "summary.json");
    REQUIRE(summary.size() == 2);
    CHECK(summary[0].at("reasoning_requested") == 2);
    CHECK(summary[1].at("reasoning_requested") == 5);
}

TEST_CASE("sweep-layers resolves 'last' and writes distinct runs") {
    const fs::path dir = temp_dir("sweep_l");
    const std::string page = render_fixture_page(dir, "gray");

    const RunResult r = invoke({"sweep-layers", "--page", page, "--out", (dir / "s").string(),
                             "--layers", "1,last", "--steps", "3", "--seed", "4"});
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(dir / "s" / "layer-1" / "image.png"));
    REQUIRE(fs::exists(dir / "s" / "layer-4" / "image.png"));  // default encoder depth
    CHECK(slurp_bytes(dir / "s" / "layer-1" / "image.png") !=
          slurp_bytes(dir / "s" / "layer-4" / "image.png"));
    const nlohmann::json summary = slurp_json(dir / "s" / "summary.json");
    REQUIRE(summary.size() == 2);
}

TEST_CASE("probe-routing records attention and refuses zero guidance") {
    const fs::path dir = temp_dir("probe");
    const std::string page = render_fixture_page(dir, "blue");

    const RunResult rejected = invoke({"probe-routing", "--page", page, "--out",
                                    (dir / "p").string(), "--cfg", "0"});
    CHECK(rejected.code == 1);
    const nlohmann::json err = error_json(rejected).at("error");
    CHECK(err.at("kind") == "config");
    CHECK(err.at("message").get<std::string>().find("routing needs cfg > 0") !=
          std::string::npos);

    const RunResult r = invoke({"probe-routing", "--page", page, "--out", (dir / "p").string(),
                             "--blocks", "0", "--steps", "3", "--cfg", "1.5", "--seed", "4"});
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(dir / "p" / "routing.json"));
    REQUIRE(fs::exists(dir / "p" / "routing.txt"));
    REQUIRE(fs::exists(dir / "p" / "trace.json"));
    REQUIRE(fs::exists(dir / "p" / "recordings.tens"));
    REQUIRE(fs::exists(dir / "p" / "recordings.json"));

    const nlohmann::json routing = slurp_json(dir / "p" / "routing.json");
    const double share = routing.at("visual_share").get<double>();
    CHECK(share > 0.0);
    CHECK(share < 1.0);
    CHECK(routing.at("visual_share").get<double>() +
              routing.at("reasoning_share").get<double>() ==
          Catch::Approx(1.0));
    CHECK(routing.at("n_visual") == 36);
    // one block, 4 heads, 3 steps
    CHECK(routing.at("breakdown").size() == 12);
    CHECK(r.out.find("visual share") != std::string::npos);

    const std::vector<AttentionRecord> recs =
        load_recordings((dir / "p" / "recordings").string());
    CHECK(recs.size() == 12);
}

TEST_CASE("diagnose-retrieval ranks pages against texts") {
    const fs::path dir = temp_dir("retr");
    nlohmann::json manifest = nlohmann::json::array();
    for (const char* color : {"red", "blue", "lime"}) {
        render_fixture_page(dir, color);
        manifest.push_back({{"page", std::string(color) + ".png"},
                            {"text", std::string("a ") + color + " swatch"}});
    }
    const fs::path man_path = dir / "manifest.json";
    {
        std::ofstream f(man_path);
        f << manifest.dump(2) << "\n";
    }

    const RunResult r = invoke({"diagnose-retrieval", "--manifest", man_path.string(),
                             "--variant", "all", "--k", "1,2", "--out",
                             (dir / "report.json").string()});
    REQUIRE(r.code == 0);
    const nlohmann::json report = slurp_json(dir / "report.json");
    CHECK(report.at("items") == 3);
    REQUIRE(report.at("reports").size() == 3);
    for (const nlohmann::json& rep : report.at("reports")) {
        CHECK(rep.at("ranks").size() == 3);
        CHECK(rep.at("mrr").get<double>() > 0.0);
        CHECK(rep.at("recall").contains("@2"));
    }
    CHECK(report.at("reports")[0].at("variant") == "token-max");
    CHECK(r.out.find("Cross-modal retrieval") != std::string::npos);

    nlohmann::json lone = nlohmann::json::array({manifest[0]});
    const fs::path lone_path = dir / "lone.json";
    {
        std::ofstream f(lone_path);
        f << lone.dump() << "\n";
    }
    const RunResult small = invoke({"diagnose-retrieval", "--manifest", lone_path.string()});
    CHECK(small.code == 1);
    CHECK(error_json(small).at("error").at("kind") == "retrieval");

    const RunResult bad = invoke({"diagnose-retrieval", "--manifest", man_path.string(),
                               "--variant", "cosine"});
    CHECK(bad.code == 1);
    CHECK(error_json(bad).at("error").at("kind") == "usage");
}

TEST_CASE("train-toy dry run plans its artifacts") {
    const fs::path dir = temp_dir("toy_dry");
    const RunResult r = invoke({"train-toy", "--out", (dir / "t").string(), "--steps", "50",
                             "--dry-run"});
    REQUIRE(r.code == 0);
    CHECK(!fs::exists(dir / "t"));
    const nlohmann::json plan = nlohmann::json::parse(r.out);
    CHECK(plan.at("subcommand") == "train-toy");
    CHECK(plan.at("config").at("steps") == 50);
    REQUIRE(plan.at("would_write").size() == 3);
}

TEST_CASE("bench subcommands cover build, run, score, and report") {
    const fs::path dir = temp_dir("bench");
    const RunResult emitted = invoke({"bench", "build", "--emit-default", (dir / "spec").string()});
    REQUIRE(emitted.code == 0);
    const std::string spec = (dir / "spec" / "simple_v2v_bench.json").string();
    REQUIRE(fs::exists(spec));

    const RunResult validated = invoke({"bench", "build", "--spec", spec, "--out",
                                     (dir / "built").string(), "--dry-run"});
    CHECK(validated.code == 0);
    CHECK(!fs::exists(dir / "built"));

    const std::vector<std::string> filter = {"--categories", "inline-color", "--limit", "2",
                                             "--samples", "1"};

    std::vector<std::string> run_args = {"bench",   "run",          "--spec", spec,
                                         "--out",   (dir / "r").string(),
                                         "--steps", "3",            "--tokens", "6",
                                         "--seed",  "5"};
    run_args.insert(run_args.end(), filter.begin(), filter.end());
    const RunResult ran = invoke(run_args);
    REQUIRE(ran.code == 0);
    size_t outputs = 0;
    for (const auto& e : fs::directory_iterator(dir / "r" / "outputs")) {
        CHECK(e.path().extension() == ".png");
        ++outputs;
    }
    CHECK(outputs == 2);
    size_t traces = 0;
    for (const auto& e : fs::directory_iterator(dir / "r" / "traces")) {
        const nlohmann::json t = slurp_json(e.path());
        CHECK(t.at("mode") == "full-final");
        CHECK(t.at("reasoning_requested") == 6);
        ++traces;
    }
    CHECK(traces == 2);

    std::vector<std::string> score_args = {"bench",     "score",
                                           "--spec",    spec,
                                           "--run",     (dir / "r").string(),
                                           "--records", (dir / "records.jsonl").string(),
                                           "--judge",   "stub"};
    score_args.insert(score_args.end(), filter.begin(), filter.end());
    const RunResult scored = invoke(score_args);
    REQUIRE(scored.code == 0);
    const std::vector<ScoreRecord> records =
        load_records_jsonl((dir / "records.jsonl").string());
    REQUIRE(records.size() == 2);
    for (const ScoreRecord& rec : records) {
        CHECK(rec.judge_id == kStubJudgeId);
        CHECK(rec.sample_index == 0);
        CHECK(rec.final_score == score_sample(rec.quality, rec.alignment));
    }

    // scoring is idempotent over the same outputs
    const std::vector<uint8_t> first = slurp_bytes(dir / "records.jsonl");
    REQUIRE(invoke(score_args).code == 0);
    CHECK(slurp_bytes(dir / "records.jsonl") == first);

    std::vector<std::string> report_args = {"bench",     "report",
                                            "--spec",    spec,
                                            "--records", (dir / "records.jsonl").string(),
                                            "--out",     (dir / "report.json").string()};
    report_args.insert(report_args.end(), filter.begin(), filter.end());
    const RunResult reported = invoke(report_args);
    REQUIRE(reported.code == 0);
    CHECK(reported.out.find("overall") != std::string::npos);
    const nlohmann::json report = slurp_json(dir / "report.json");
    CHECK(report.at("records") == 2);
    REQUIRE(report.at("per_category").size() == 1);
    CHECK(report.at("per_category")[0].at("category") == "inline-color");
    CHECK(report.at("per_category")[0].at("prompts") == 2);
    const double overall = report.at("overall_final").get<double>();
    CHECK(overall >= 10.0);
    CHECK(overall <= 100.0);

    // a wider filter than the records cover is an incomplete run
    std::vector<std::string> wide_args = {"bench",     "report",
                                          "--spec",    spec,
                                          "--records", (dir / "records.jsonl").string(),
                                          "--categories", "inline-color",
                                          "--limit",   "3",
                                          "--samples", "1"};
    const RunResult incomplete = invoke(wide_args);
    CHECK(incomplete.code == 1);
    CHECK(error_json(incomplete).at("error").at("kind") == "completeness");

    const RunResult unknown = invoke({"bench", "run", "--spec", spec, "--out",
                                   (dir / "u").string(), "--categories", "nope"});
    CHECK(unknown.code == 1);
    CHECK(error_json(unknown).at("error").at("kind") == "bench-spec");

    const RunResult no_endpoint = invoke({"bench", "score", "--spec", spec, "--run",
                                       (dir / "r").string(), "--records",
                                       (dir / "r2.jsonl").string(), "--judge", "remote"});
    CHECK(no_endpoint.code == 1);
    CHECK(error_json(no_endpoint).at("error").at("kind") == "config");
}

TEST_CASE("bench run honors a pinned sequence budget from the config file") {
    const fs::path dir = temp_dir("bench_cap");
    REQUIRE(invoke({"bench", "build", "--emit-default", (dir / "spec").string()}).code == 0);
    const std::string spec = (dir / "spec" / "simple_v2v_bench.json").string();

    const fs::path cfg_path = dir / "config.json";
    {
        std::ofstream f(cfg_path);
        f << nlohmann::json({{"vlm", {{"max_sequence", 64}}}}).dump() << "\n";
    }
    // full pages carry a few hundred image tokens, far beyond the pinned budget
    const RunResult r = invoke({"bench", "run", "--spec", spec, "--out", (dir / "r").string(),
                             "--config", cfg_path.string(), "--categories", "inline-color",
                             "--limit", "1", "--samples", "1", "--steps", "2"});
    CHECK(r.code == 1);
    CHECK(error_json(r).at("error").at("kind") == "capacity");
}
