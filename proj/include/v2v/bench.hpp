#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "v2v/errors.hpp"
#include "v2v/page.hpp"
#include "v2v/png_io.hpp"
#include "v2v/raster.hpp"

namespace v2v {

// -- bench structure ----------------------------------------------------------

enum class BenchCategory {
    visual_text,
    inline_color,
    inline_visual_reference,
    object_counting,
    style_transfer,
    pose_control,
    sketch_reference,
};

constexpr int kBenchCategoryCount = 7;
constexpr int kPromptsPerCategory = 22;
constexpr int kSamplesPerPrompt = 4;

inline const std::vector<BenchCategory>& all_bench_categories() {
    static const std::vector<BenchCategory> all = {
        BenchCategory::visual_text,     BenchCategory::inline_color,
        BenchCategory::inline_visual_reference, BenchCategory::object_counting,
        BenchCategory::style_transfer,  BenchCategory::pose_control,
        BenchCategory::sketch_reference,
    };
    return all;
}

inline const char* category_name(BenchCategory c) {
    switch (c) {
        case BenchCategory::visual_text: return "visual-text";
        case BenchCategory::inline_color: return "inline-color";
        case BenchCategory::inline_visual_reference: return "inline-visual-reference";
        case BenchCategory::object_counting: return "object-counting";
        case BenchCategory::style_transfer: return "style-transfer";
        case BenchCategory::pose_control: return "pose-control";
        case BenchCategory::sketch_reference: return "sketch-reference";
    }
    return "?";
}

inline BenchCategory category_from_name(const std::string& name) {
    for (BenchCategory c : all_bench_categories())
        if (name == category_name(c)) return c;
    fail(ErrorKind::bench_spec, "unknown bench category '" + name + "'");
}

struct PromptAnnotations {
    std::optional<Rgb> expected_rgb;
    std::optional<int> expected_count;
    std::optional<std::string> expected_word;
};

struct PromptSpec {
    std::string id;
    BenchCategory category = BenchCategory::visual_text;
    PageSpec page;
    std::string target;
    PromptAnnotations annotations;
};

struct BenchCategoryBlock {
    BenchCategory category = BenchCategory::visual_text;
    std::vector<PromptSpec> prompts;
};

struct BenchSpec {
    int samples_per_prompt = kSamplesPerPrompt;
    std::vector<BenchCategoryBlock> categories;

    int total_prompts() const {
        int n = 0;
        for (const BenchCategoryBlock& b : categories) n += static_cast<int>(b.prompts.size());
        return n;
    }

    const PromptSpec* find_prompt(const std::string& id) const {
        for (const BenchCategoryBlock& b : categories)
            for (const PromptSpec& p : b.prompts)
                if (p.id == id) return &p;
        return nullptr;
    }
};

/// Full-shape validation used before building the real bench. Mini specs used
/// by tests skip this and go straight to rendering and scoring.
inline std::vector<std::string> validate_bench_spec(const BenchSpec& spec) {
    std::vector<std::string> violations;
    if (spec.samples_per_prompt != kSamplesPerPrompt)
        violations.push_back("samples_per_prompt must be " + std::to_string(kSamplesPerPrompt) +
                             ", got " + std::to_string(spec.samples_per_prompt));
    if (spec.categories.size() != static_cast<size_t>(kBenchCategoryCount))
        violations.push_back("expected " + std::to_string(kBenchCategoryCount) +
                             " categories, got " + std::to_string(spec.categories.size()));
    std::set<BenchCategory> seen;
    std::set<std::string> ids;
    for (const BenchCategoryBlock& block : spec.categories) {
        const std::string cname = category_name(block.category);
        if (!seen.insert(block.category).second)
            violations.push_back("category '" + cname + "' appears more than once");
        if (block.prompts.size() != static_cast<size_t>(kPromptsPerCategory))
            violations.push_back("category '" + cname + "' has " +
                                 std::to_string(block.prompts.size()) + " prompts, expected " +
                                 std::to_string(kPromptsPerCategory));
        for (const PromptSpec& p : block.prompts) {
            if (p.category != block.category)
                violations.push_back("prompt '" + p.id + "' category does not match its block");
            if (!ids.insert(p.id).second)
                violations.push_back("duplicate prompt id '" + p.id + "'");
            if (p.category == BenchCategory::inline_color && !p.annotations.expected_rgb)
                violations.push_back("prompt '" + p.id + "' needs an expected_rgb annotation");
            if (p.category == BenchCategory::object_counting && !p.annotations.expected_count)
                violations.push_back("prompt '" + p.id + "' needs an expected_count annotation");
            for (const std::string& v : validate_spec(p.page))
                violations.push_back("prompt '" + p.id + "': " + v);
        }
    }
    return violations;
}

// -- bench spec serialization ----------------------------------------------------

inline nlohmann::json prompt_spec_to_json(const PromptSpec& p) {
    nlohmann::json j;
    j["id"] = p.id;
    j["category"] = category_name(p.category);
    j["target"] = p.target;
    j["page"] = page_spec_to_json(p.page);
    nlohmann::json ann = nlohmann::json::object();
    if (p.annotations.expected_rgb) {
        const Rgb c = *p.annotations.expected_rgb;
        ann["expected_rgb"] = {c.r, c.g, c.b};
    }
    if (p.annotations.expected_count) ann["expected_count"] = *p.annotations.expected_count;
    if (p.annotations.expected_word) ann["expected_word"] = *p.annotations.expected_word;
    j["annotations"] = ann;
    return j;
}

inline PromptSpec prompt_spec_from_json(const nlohmann::json& j, const std::string& base_dir) {
    PromptSpec p;
    p.id = j.at("id").get<std::string>();
    p.category = category_from_name(j.at("category").get<std::string>());
    p.target = j.value("target", std::string());
    p.page = page_spec_from_json(j.at("page"), base_dir);
    if (j.contains("annotations")) {
        const nlohmann::json& ann = j.at("annotations");
        if (ann.contains("expected_rgb")) {
            const nlohmann::json& rgb = ann.at("expected_rgb");
            if (!rgb.is_array() || rgb.size() != 3)
                fail(ErrorKind::bench_spec, "expected_rgb must be a 3-element array");
            p.annotations.expected_rgb = Rgb{uint8_t(rgb[0].get<int>()), uint8_t(rgb[1].get<int>()),
                                             uint8_t(rgb[2].get<int>())};
        }
        if (ann.contains("expected_count"))
            p.annotations.expected_count = ann.at("expected_count").get<int>();
        if (ann.contains("expected_word"))
            p.annotations.expected_word = ann.at("expected_word").get<std::string>();
    }
    return p;
}

inline nlohmann::json bench_spec_to_json(const BenchSpec& spec) {
    nlohmann::json j;
    j["samples_per_prompt"] = spec.samples_per_prompt;
    nlohmann::json cats = nlohmann::json::array();
    for (const BenchCategoryBlock& block : spec.categories) {
        nlohmann::json jc;
        jc["name"] = category_name(block.category);
        nlohmann::json prompts = nlohmann::json::array();
        for (const PromptSpec& p : block.prompts) prompts.push_back(prompt_spec_to_json(p));
        jc["prompts"] = prompts;
        cats.push_back(jc);
    }
    j["categories"] = cats;
    return j;
}

inline BenchSpec bench_spec_from_json(const nlohmann::json& j, const std::string& base_dir) {
    BenchSpec spec;
    spec.samples_per_prompt = j.value("samples_per_prompt", kSamplesPerPrompt);
    for (const nlohmann::json& jc : j.at("categories")) {
        BenchCategoryBlock block;
        block.category = category_from_name(jc.at("name").get<std::string>());
        for (const nlohmann::json& jp : jc.at("prompts"))
            block.prompts.push_back(prompt_spec_from_json(jp, base_dir));
        spec.categories.push_back(std::move(block));
    }
    return spec;
}

inline BenchSpec load_bench_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::io, "cannot open bench spec '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::io, "bench spec '" + path + "' is not valid JSON: " + e.what());
    }
    const std::string base_dir = std::filesystem::path(path).parent_path().string();
    return bench_spec_from_json(j, base_dir.empty() ? "." : base_dir);
}

// -- scoring -----------------------------------------------------------------------

struct ScoreRecord {
    std::string prompt_id;
    int sample_index = 0;
    int quality = 1;
    int alignment = 1;
    int final_score = 10;
    std::string judge_id;
    std::string rationale;
};

inline int score_sample(int quality, int alignment) {
    if (quality < 1 || quality > 10)
        fail(ErrorKind::range, "quality " + std::to_string(quality) + " outside 1..10");
    if (alignment < 1 || alignment > 10)
        fail(ErrorKind::range, "alignment " + std::to_string(alignment) + " outside 1..10");
    return std::min(quality, alignment) * 10;
}

inline ScoreRecord make_record(const std::string& prompt_id, int sample_index, int quality,
                               int alignment, const std::string& judge_id,
                               const std::string& rationale) {
    ScoreRecord r;
    r.prompt_id = prompt_id;
    r.sample_index = sample_index;
    r.quality = quality;
    r.alignment = alignment;
    r.final_score = score_sample(quality, alignment);
    r.judge_id = judge_id;
    r.rationale = rationale;
    return r;
}

inline nlohmann::json record_to_json(const ScoreRecord& r) {
    return {{"prompt_id", r.prompt_id}, {"sample", r.sample_index}, {"quality", r.quality},
            {"alignment", r.alignment}, {"final", r.final_score},   {"judge", r.judge_id},
            {"rationale", r.rationale}};
}

inline ScoreRecord record_from_json(const nlohmann::json& j) {
    ScoreRecord r = make_record(j.at("prompt_id").get<std::string>(), j.at("sample").get<int>(),
                                j.at("quality").get<int>(), j.at("alignment").get<int>(),
                                j.value("judge", std::string()), j.value("rationale", std::string()));
    if (j.contains("final") && j.at("final").get<int>() != r.final_score)
        fail(ErrorKind::range, "record for '" + r.prompt_id + "' carries final " +
                                   std::to_string(j.at("final").get<int>()) +
                                   " but min(Q,A)*10 = " + std::to_string(r.final_score));
    return r;
}

inline void save_records_jsonl(const std::string& path, const std::vector<ScoreRecord>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write records '" + path + "'");
    for (const ScoreRecord& r : records) f << record_to_json(r).dump() << "\n";
}

inline std::vector<ScoreRecord> load_records_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::io, "cannot open records '" + path + "'");
    std::vector<ScoreRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::io,
                 path + ":" + std::to_string(lineno) + " is not a valid record: " + e.what());
        }
    }
    return out;
}

// -- aggregation --------------------------------------------------------------------

struct CategoryStats {
    double mean_final = 0.0;
    double mean_quality = 0.0;
    double mean_alignment = 0.0;
    int prompts = 0;
};

struct BenchReport {
    std::vector<std::pair<std::string, CategoryStats>> per_category;
    double overall_final = 0.0;
    double overall_quality = 0.0;
    double overall_alignment = 0.0;
    int record_count = 0;
};

inline double overall_from_category_means(const std::vector<double>& means) {
    if (means.empty()) fail(ErrorKind::degenerate_input, "no category means");
    double sum = 0.0;
    for (double m : means) sum += m;
    return sum / means.size();
}

/// Nested unweighted means: samples into a prompt mean, prompts into a
/// category mean, categories into the overall. Refuses partial runs.
inline BenchReport aggregate(const BenchSpec& spec, const std::vector<ScoreRecord>& records) {
    std::map<std::pair<std::string, int>, const ScoreRecord*> by_key;
    std::vector<std::string> problems;
    for (const ScoreRecord& r : records) {
        if (!spec.find_prompt(r.prompt_id)) {
            problems.push_back("record for unknown prompt '" + r.prompt_id + "'");
            continue;
        }
        if (r.sample_index < 0 || r.sample_index >= spec.samples_per_prompt) {
            problems.push_back("prompt '" + r.prompt_id + "' sample " +
                               std::to_string(r.sample_index) + " outside 0.." +
                               std::to_string(spec.samples_per_prompt - 1));
            continue;
        }
        if (!by_key.emplace(std::make_pair(r.prompt_id, r.sample_index), &r).second)
            problems.push_back("duplicate record for prompt '" + r.prompt_id + "' sample " +
                               std::to_string(r.sample_index));
    }
    for (const BenchCategoryBlock& block : spec.categories)
        for (const PromptSpec& p : block.prompts)
            for (int s = 0; s < spec.samples_per_prompt; ++s)
                if (!by_key.count({p.id, s}))
                    problems.push_back("missing record for prompt '" + p.id + "' sample " +
                                       std::to_string(s));
    if (!problems.empty()) {
        std::string msg = "run is incomplete:";
        const size_t shown = std::min<size_t>(problems.size(), 10);
        for (size_t i = 0; i < shown; ++i) msg += "\n  - " + problems[i];
        if (problems.size() > shown)
            msg += "\n  ... and " + std::to_string(problems.size() - shown) + " more";
        fail(ErrorKind::completeness, msg);
    }

    BenchReport report;
    report.record_count = static_cast<int>(records.size());
    std::vector<double> cat_final, cat_q, cat_a;
    for (const BenchCategoryBlock& block : spec.categories) {
        double sum_f = 0.0, sum_q = 0.0, sum_a = 0.0;
        for (const PromptSpec& p : block.prompts) {
            double pf = 0.0, pq = 0.0, pa = 0.0;
            for (int s = 0; s < spec.samples_per_prompt; ++s) {
                const ScoreRecord& r = *by_key.at({p.id, s});
                pf += r.final_score;
                pq += r.quality;
                pa += r.alignment;
            }
            sum_f += pf / spec.samples_per_prompt;
            sum_q += pq / spec.samples_per_prompt;
            sum_a += pa / spec.samples_per_prompt;
        }
        CategoryStats stats;
        stats.prompts = static_cast<int>(block.prompts.size());
        stats.mean_final = sum_f / block.prompts.size();
        stats.mean_quality = sum_q / block.prompts.size();
        stats.mean_alignment = sum_a / block.prompts.size();
        report.per_category.emplace_back(category_name(block.category), stats);
        cat_final.push_back(stats.mean_final);
        cat_q.push_back(stats.mean_quality);
        cat_a.push_back(stats.mean_alignment);
    }
    report.overall_final = overall_from_category_means(cat_final);
    report.overall_quality = overall_from_category_means(cat_q);
    report.overall_alignment = overall_from_category_means(cat_a);
    return report;
}

inline nlohmann::json report_to_json(const BenchReport& r) {
    nlohmann::json j;
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& [name, stats] : r.per_category)
        cats.push_back({{"category", name},
                        {"mean_final", stats.mean_final},
                        {"mean_quality", stats.mean_quality},
                        {"mean_alignment", stats.mean_alignment},
                        {"prompts", stats.prompts}});
    j["per_category"] = cats;
    j["overall_final"] = r.overall_final;
    j["overall_quality"] = r.overall_quality;
    j["overall_alignment"] = r.overall_alignment;
    j["records"] = r.record_count;
    return j;
}

inline std::string report_text(const BenchReport& r) {
    char buf[256];
    std::string out;
    out += "category                     final   quality  alignment\n";
    out += "-------------------------------------------------------\n";
    for (const auto& [name, stats] : r.per_category) {
        std::snprintf(buf, sizeof buf, "%-26s %7.2f   %7.2f    %7.2f\n", name.c_str(),
                      stats.mean_final, stats.mean_quality, stats.mean_alignment);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-26s %7.2f   %7.2f    %7.2f\n", "overall", r.overall_final,
                  r.overall_quality, r.overall_alignment);
    out += buf;
    return out;
}

// -- stub judge -----------------------------------------------------------------------

struct JudgeScores {
    int quality = 1;
    int alignment = 1;
};

inline constexpr const char* kStubJudgeId = "stub-v1";

namespace detail {

inline Rgb central_region_mean(const RasterImage& img) {
    const int x0 = img.width() / 4, x1 = std::max(x0 + 1, (3 * img.width()) / 4);
    const int y0 = img.height() / 4, y1 = std::max(y0 + 1, (3 * img.height()) / 4);
    uint64_t r = 0, g = 0, b = 0, n = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const Rgb p = img.at(x, y);
            r += p.r;
            g += p.g;
            b += p.b;
            ++n;
        }
    return Rgb{uint8_t(r / n), uint8_t(g / n), uint8_t(b / n)};
}

inline Rgb corner_background(const RasterImage& img) {
    const Rgb c[4] = {img.at(0, 0), img.at(img.width() - 1, 0), img.at(0, img.height() - 1),
                      img.at(img.width() - 1, img.height() - 1)};
    int best = 0, best_votes = 0;
    for (int i = 0; i < 4; ++i) {
        int votes = 0;
        for (int k = 0; k < 4; ++k)
            if (c[k] == c[i]) ++votes;
        if (votes > best_votes) {
            best_votes = votes;
            best = i;
        }
    }
    return c[best];
}

/// Distance to score, monotone: {0..8:10, ..16:9, ..32:8, ..64:6, ..128:3, else 1}.
inline int color_distance_score(double d) {
    if (d <= 8) return 10;
    if (d <= 16) return 9;
    if (d <= 32) return 8;
    if (d <= 64) return 6;
    if (d <= 128) return 3;
    return 1;
}

/// Count-error to score; one object off costs 3 points: {0:10, 1:7, 2:4, else 1}.
inline int count_error_score(int diff) {
    if (diff == 0) return 10;
    if (diff == 1) return 7;
    if (diff == 2) return 4;
    return 1;
}

/// Degenerate images floor at 1; near-blank and extreme-variance outputs are
/// penalized; everything else sits at 8 so alignment usually bottlenecks.
inline int stub_quality(const RasterImage& img) {
    const auto& px = img.pixels();
    double mean = 0.0;
    for (uint8_t v : px) mean += v;
    mean /= px.size();
    double var = 0.0;
    for (uint8_t v : px) var += (v - mean) * (v - mean);
    const double sigma = std::sqrt(var / px.size());
    if (sigma == 0.0) return 1;
    if (sigma < 2.0) return 3;
    if (sigma < 8.0) return 6;
    if (sigma <= 100.0) return 8;
    return 5;
}

}  // namespace detail

/// Deterministic offline judge for the programmatically checkable categories.
inline JudgeScores judge_stub(const RasterImage& output, const PromptSpec& prompt) {
    JudgeScores s;
    s.quality = detail::stub_quality(output);
    switch (prompt.category) {
        case BenchCategory::inline_color: {
            if (!prompt.annotations.expected_rgb)
                fail(ErrorKind::unsupported_category,
                     "prompt '" + prompt.id + "' lacks an expected_rgb annotation");
            const double d =
                mean_channel_distance(detail::central_region_mean(output),
                                      *prompt.annotations.expected_rgb);
            s.alignment = detail::color_distance_score(d);
            return s;
        }
        case BenchCategory::object_counting: {
            if (!prompt.annotations.expected_count)
                fail(ErrorKind::unsupported_category,
                     "prompt '" + prompt.id + "' lacks an expected_count annotation");
            const Rgb bg = detail::corner_background(output);
            const int found = connected_components(
                output, [bg](Rgb p) { return mean_channel_distance(p, bg) > 50.0; });
            s.alignment =
                detail::count_error_score(std::abs(found - *prompt.annotations.expected_count));
            return s;
        }
        default:
            fail(ErrorKind::unsupported_category,
                 "category '" + std::string(category_name(prompt.category)) +
                     "' has no programmatic stub judge; use the remote judge");
    }
}

inline ScoreRecord judge_stub_record(const RasterImage& output, const PromptSpec& prompt,
                                     int sample_index) {
    const JudgeScores s = judge_stub(output, prompt);
    return make_record(prompt.id, sample_index, s.quality, s.alignment, kStubJudgeId,
                       "stub tables on '" + std::string(category_name(prompt.category)) + "'");
}

// -- remote judge --------------------------------------------------------------------

struct JudgeEndpoint {
    std::string url;
    std::string model = "judge-default";
    int max_attempts = 3;
    int backoff_ms = 250;
    int timeout_s = 30;
};

/// rubric-v1. Anchors and deductions are versioned here; the response format
/// is constrained to one line so parsing stays unambiguous.
inline std::string rubric_text(const PromptSpec& prompt) {
    std::string r;
    r += "Rubric rubric-v1. You receive a visual specification page and one generated image.\n";
    r += "Score the generated image on two axes, each an integer from 1 to 10.\n";
    r += "Score strictly; when uncertain, choose the lower score. Never give the benefit of the doubt.\n";
    r += "\nQuality (rendering fidelity, independent of the request):\n";
    r += "  1-2 broken or degenerate output; 3-4 heavy artifacts; 5-7 usable with visible flaws;\n";
    r += "  8-9 minor imperfections; 10 flawless.\n";
    r += "\nAlignment (agreement with the page and the target description):\n";
    r += "  10 exact match; 8-9 minor imperfections; 5-7 partially satisfied; 3-4 mostly wrong;\n";
    r += "  1-2 unrelated.\n";
    r += "\nDeductions (apply all that match):\n";
    r += "  wrong object count: -3 alignment per run of the error;\n";
    r += "  requested word missing or misspelled: -4 alignment;\n";
    r += "  dominant color mismatched from the swatch: alignment capped at 3;\n";
    r += "  reference layout, pose, or sketch ignored: alignment capped at 4.\n";
    r += "\nCategory: " + std::string(category_name(prompt.category)) + "\n";
    r += "Target: " + prompt.target + "\n";
    if (prompt.annotations.expected_rgb) {
        const Rgb c = *prompt.annotations.expected_rgb;
        r += "Expected dominant rgb: (" + std::to_string(c.r) + ", " + std::to_string(c.g) + ", " +
             std::to_string(c.b) + ")\n";
    }
    if (prompt.annotations.expected_count)
        r += "Expected object count: " + std::to_string(*prompt.annotations.expected_count) + "\n";
    if (prompt.annotations.expected_word)
        r += "Expected word: '" + *prompt.annotations.expected_word + "'\n";
    r += "\nRespond with exactly one line in the form\n";
    r += "Q:<integer 1-10> A:<integer 1-10>\n";
    return r;
}

namespace detail {

inline std::string base64_encode(const std::vector<uint8_t>& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    for (size_t i = 0; i < data.size(); i += 3) {
        uint32_t word = uint32_t(data[i]) << 16;
        if (i + 1 < data.size()) word |= uint32_t(data[i + 1]) << 8;
        if (i + 2 < data.size()) word |= uint32_t(data[i + 2]);
        out.push_back(alphabet[(word >> 18) & 63]);
        out.push_back(alphabet[(word >> 12) & 63]);
        out.push_back(i + 1 < data.size() ? alphabet[(word >> 6) & 63] : '=');
        out.push_back(i + 2 < data.size() ? alphabet[word & 63] : '=');
    }
    return out;
}

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path = "/";
};

inline ParsedUrl parse_http_url(const std::string& url) {
    if (url.rfind("https://", 0) == 0)
        fail(ErrorKind::config,
             "judge endpoint '" + url + "' uses https; this build speaks plain http only");
    if (url.rfind("http://", 0) != 0)
        fail(ErrorKind::config, "judge endpoint '" + url + "' is not an http:// url");
    ParsedUrl p;
    std::string rest = url.substr(7);
    const size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    if (slash != std::string::npos) p.path = rest.substr(slash);
    const size_t colon = hostport.find(':');
    if (colon == std::string::npos) {
        p.host = hostport;
    } else {
        p.host = hostport.substr(0, colon);
        p.port = std::atoi(hostport.c_str() + colon + 1);
    }
    if (p.host.empty() || p.port <= 0)
        fail(ErrorKind::config, "judge endpoint '" + url + "' has no usable host");
    return p;
}

}  // namespace detail

inline JudgeScores parse_judge_response(const std::string& body) {
    std::string t = body;
    const auto first = t.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        fail(ErrorKind::judge_parse, "empty judge response");
    t = t.substr(first, t.find_last_not_of(" \t\r\n") - first + 1);
    static const std::regex pat(R"(^Q:(-?\d{1,4})\s+A:(-?\d{1,4})$)");
    std::smatch m;
    if (!std::regex_match(t, m, pat))
        fail(ErrorKind::judge_parse, "judge response does not match 'Q:<int> A:<int>'");
    const int q = std::atoi(m[1].str().c_str());
    const int a = std::atoi(m[2].str().c_str());
    if (q < 1 || q > 10)
        fail(ErrorKind::range, "judge returned Q=" + m[1].str() + " outside 1..10");
    if (a < 1 || a > 10)
        fail(ErrorKind::range, "judge returned A=" + m[2].str() + " outside 1..10");
    return {q, a};
}

/// One request per sample: both images, the rubric, the model name. Retries
/// transport failures and malformed responses; rejects out-of-range scores
/// immediately instead of clamping them.
inline JudgeScores judge_remote(const RasterImage& input_page, const RasterImage& output,
                                const PromptSpec& prompt, const JudgeEndpoint& endpoint) {
    const char* key = std::getenv("V2V_JUDGE_API_KEY");
    if (key == nullptr || *key == '\0')
        fail(ErrorKind::config, "V2V_JUDGE_API_KEY is not set");
    const detail::ParsedUrl url = detail::parse_http_url(endpoint.url);

    nlohmann::json body;
    body["model"] = endpoint.model;
    body["prompt_id"] = prompt.id;
    body["category"] = category_name(prompt.category);
    body["rubric"] = rubric_text(prompt);
    body["input_page_png_b64"] = detail::base64_encode(encode_png(input_page));
    body["output_png_b64"] = detail::base64_encode(encode_png(output));
    const std::string payload = body.dump();

    std::string last_transport;
    std::string last_payload;
    bool saw_parse_failure = false;
    for (int attempt = 0; attempt < endpoint.max_attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(endpoint.backoff_ms * (1 << (attempt - 1))));
        httplib::Client client(url.host, url.port);
        client.set_connection_timeout(endpoint.timeout_s, 0);
        client.set_read_timeout(endpoint.timeout_s, 0);
        httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_transport = "no response (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status != 200) {
            last_transport = "http status " + std::to_string(res->status);
            continue;
        }
        try {
            return parse_judge_response(res->body);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::range) throw;
            saw_parse_failure = true;
            last_payload = res->body;
        }
    }
    if (saw_parse_failure)
        fail(ErrorKind::judge_parse,
             "judge response malformed after " + std::to_string(endpoint.max_attempts) +
                 " attempts; last payload: " + last_payload);
    fail(ErrorKind::transport, "POST " + endpoint.url + " failed after " +
                                   std::to_string(endpoint.max_attempts) +
                                   " attempts: " + last_transport);
}

// -- bench build ------------------------------------------------------------------------

struct BuildResult {
    int pages_rendered = 0;
    std::string manifest_path;
};

inline BuildResult build_bench(const std::string& spec_path, const std::string& out_dir) {
    const BenchSpec spec = load_bench_spec(spec_path);
    const std::vector<std::string> violations = validate_bench_spec(spec);
    if (!violations.empty()) {
        std::string msg = "bench spec invalid:";
        for (const std::string& v : violations) msg += "\n  - " + v;
        fail(ErrorKind::bench_spec, msg);
    }
    std::filesystem::create_directories(std::filesystem::path(out_dir) / "pages");
    const std::string manifest_path = (std::filesystem::path(out_dir) / "manifest.jsonl").string();
    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) fail(ErrorKind::io, "cannot write manifest '" + manifest_path + "'");
    BuildResult result;
    for (const BenchCategoryBlock& block : spec.categories) {
        for (const PromptSpec& p : block.prompts) {
            const std::string rel = "pages/" + p.id + ".png";
            const std::string png_path = (std::filesystem::path(out_dir) / rel).string();
            write_png(render_page(p.page), png_path);
            nlohmann::json line = prompt_spec_to_json(p);
            line.erase("page");
            line["page_png"] = rel;
            manifest << line.dump() << "\n";
            ++result.pages_rendered;
        }
    }
    result.manifest_path = manifest_path;
    return result;
}

// -- default bench generation --------------------------------------------------------------

namespace detail {

inline RasterImage icon_asset(int i) {
    const std::vector<NamedColor>& palette = color_palette();
    const Rgb color = palette[(i * 5 + 3) % palette.size()].rgb;
    RasterImage img(72, 72, Rgb{255, 255, 255});
    switch (i % 4) {
        case 0: draw_disc(img, 36, 36, 22, color); break;
        case 1: fill_rect(img, 16, 16, 40, 40, color); break;
        case 2:
            for (int row = 0; row < 36; ++row)
                draw_line(img, 36 - row / 2, 18 + row, 36 + row / 2, 18 + row, color);
            break;
        case 3:
            draw_disc(img, 36, 36, 22, color);
            draw_disc(img, 36, 36, 12, Rgb{255, 255, 255});
            break;
    }
    return img;
}

inline const char* icon_shape_name(int i) {
    switch (i % 4) {
        case 0: return "disc";
        case 1: return "square";
        case 2: return "triangle";
        default: return "ring";
    }
}

inline RasterImage style_asset(int i) {
    const std::vector<NamedColor>& palette = color_palette();
    const Rgb a = palette[(i * 3 + 1) % palette.size()].rgb;
    const Rgb b = palette[(i * 7 + 9) % palette.size()].rgb;
    RasterImage img(96, 96, a);
    const int cell = 6 + 2 * (i % 5);
    if (i % 2 == 0) {
        for (int y = 0; y < 96; ++y)
            for (int x = 0; x < 96; ++x)
                if (((x / cell) + (y / cell)) % 2 == 0) img.set(x, y, b);
    } else {
        for (int y = 0; y < 96; ++y)
            if ((y / cell) % 2 == 0)
                for (int x = 0; x < 96; ++x) img.set(x, y, b);
    }
    return img;
}

inline RasterImage pose_asset(int i) {
    RasterImage img(96, 96, Rgb{255, 255, 255});
    const Rgb ink{0, 0, 0};
    const int cx = 48, head_y = 22, hip_y = 62;
    draw_disc(img, cx, head_y, 8, ink);
    draw_line(img, cx, head_y + 8, cx, hip_y, ink, 3);
    const int arm_spread = 10 + 2 * (i % 6);
    const int arm_drop = (i % 5) * 6 - 6;
    draw_line(img, cx, 38, cx - arm_spread, 38 + arm_drop, ink, 3);
    draw_line(img, cx, 38, cx + arm_spread, 38 - arm_drop, ink, 3);
    const int leg_spread = 8 + 2 * (i % 4);
    draw_line(img, cx, hip_y, cx - leg_spread, 88, ink, 3);
    draw_line(img, cx, hip_y, cx + leg_spread, 88, ink, 3);
    return img;
}

inline RasterImage sketch_asset(int i) {
    RasterImage img(96, 96, Rgb{255, 255, 255});
    const Rgb ink{0, 0, 0};
    switch (i % 4) {
        case 0:
            draw_line(img, 18, 28, 78, 28, ink, 2);
            draw_line(img, 78, 28, 78, 72, ink, 2);
            draw_line(img, 78, 72, 18, 72, ink, 2);
            draw_line(img, 18, 72, 18, 28, ink, 2);
            break;
        case 1:
            draw_disc(img, 48, 48, 28, ink);
            draw_disc(img, 48, 48, 25, Rgb{255, 255, 255});
            break;
        case 2:
            draw_line(img, 48, 18, 80, 76, ink, 2);
            draw_line(img, 80, 76, 16, 76, ink, 2);
            draw_line(img, 16, 76, 48, 18, ink, 2);
            break;
        case 3:
            draw_line(img, 20, 50, 64, 50, ink, 3);
            draw_line(img, 64, 50, 52, 36, ink, 3);
            draw_line(img, 64, 50, 52, 64, ink, 3);
            break;
    }
    return img;
}

inline const char* sketch_shape_name(int i) {
    switch (i % 4) {
        case 0: return "rectangle outline";
        case 1: return "circle outline";
        case 2: return "triangle outline";
        default: return "arrow";
    }
}

inline std::string two_digits(int i) {
    std::string s = std::to_string(i);
    return s.size() < 2 ? "0" + s : s;
}

}  // namespace detail

struct GeneratedBench {
    BenchSpec spec;
    std::vector<std::pair<std::string, RasterImage>> assets;
};

/// Procedurally built 7x22 spec with programmatic annotations. Content is
/// fixed, so regeneration is byte-stable.
inline GeneratedBench generate_default_bench() {
    GeneratedBench out;
    out.spec.samples_per_prompt = kSamplesPerPrompt;

    static const char* kWords[kPromptsPerCategory] = {
        "amber", "breeze", "copper", "drift",  "ember",  "falcon", "garnet", "harbor",
        "ivory", "jasper", "kestrel", "lumen", "marble", "nectar", "onyx",   "prism",
        "quartz", "raven", "slate",  "tundra", "umber",  "violet"};

    static const char* kCountSubjects[4] = {"dots", "marks", "tokens", "symbols"};

    auto add_asset = [&](const std::string& rel, RasterImage img) {
        out.assets.emplace_back(rel, std::move(img));
    };

    std::vector<char> counting_glyphs;
    for (char c : std::string("oxaesuvznc*#@%&")) {
        if (GlyphSet::builtin().glyph_component_count(c) == 1) counting_glyphs.push_back(c);
        if (counting_glyphs.size() >= 6) break;
    }
    if (counting_glyphs.empty()) fail(ErrorKind::bench_spec, "no single-component glyph available");

    for (BenchCategory cat : all_bench_categories()) {
        BenchCategoryBlock block;
        block.category = cat;
        for (int i = 0; i < kPromptsPerCategory; ++i) {
            PromptSpec p;
            p.category = cat;
            p.id = std::string(category_name(cat)) + "-" + detail::two_digits(i);
            switch (cat) {
                case BenchCategory::visual_text: {
                    const std::string word = kWords[i];
                    p.page.family = PageFamily::rendered_text_page;
                    p.page.elements.push_back(PageElement::text_run(word));
                    p.target = "An image in which the word '" + word +
                               "' appears as clearly readable text.";
                    p.annotations.expected_word = word;
                    break;
                }
                case BenchCategory::inline_color: {
                    const std::vector<NamedColor>& palette = color_palette();
                    Rgb c;
                    std::string cname;
                    if (i < static_cast<int>(palette.size())) {
                        c = palette[i].rgb;
                        cname = palette[i].name;
                    } else {
                        const int k = i - static_cast<int>(palette.size());
                        c = Rgb{uint8_t(40 + 35 * k), uint8_t(200 - 25 * k), uint8_t(60 + 30 * k)};
                        cname = "the swatch color";
                    }
                    p.page.family = PageFamily::inline_color_prompt;
                    p.page.elements.push_back(PageElement::text_run("a ball of this color"));
                    p.page.elements.push_back(PageElement::swatch(c));
                    p.target = "A ball whose dominant color matches " + cname + ".";
                    p.annotations.expected_rgb = c;
                    break;
                }
                case BenchCategory::inline_visual_reference: {
                    const std::string rel =
                        "bench_assets/icon-" + detail::two_digits(i) + ".png";
                    add_asset(rel, detail::icon_asset(i));
                    p.page.family = PageFamily::inline_visual_reference;
                    p.page.elements.push_back(PageElement::text_run("place this object on a desk"));
                    p.page.elements.push_back(PageElement::thumbnail(detail::icon_asset(i), rel));
                    p.target = std::string("A desk scene featuring the referenced ") +
                               detail::icon_shape_name(i) + ".";
                    break;
                }
                case BenchCategory::object_counting: {
                    const int count = 1 + (i % 11) + (i / 11);
                    const char glyph = counting_glyphs[i % counting_glyphs.size()];
                    p.page.family = PageFamily::counting_display;
                    p.page.elements.push_back(PageElement::repeat_glyph(glyph, count));
                    p.target = "An image containing exactly " + std::to_string(count) + " " +
                               kCountSubjects[i % 4] + ".";
                    p.annotations.expected_count = count;
                    break;
                }
                case BenchCategory::style_transfer: {
                    const std::string rel =
                        "bench_assets/style-" + detail::two_digits(i) + ".png";
                    add_asset(rel, detail::style_asset(i));
                    static const char* kSubjects[4] = {"a teapot", "a chair", "a lighthouse",
                                                       "a bicycle"};
                    p.page.family = PageFamily::style_reference_page;
                    p.page.elements.push_back(
                        PageElement::thumbnail(detail::style_asset(i), rel));
                    p.page.elements.push_back(
                        PageElement::text_run(std::string("render ") + kSubjects[i % 4] +
                                              " in this texture"));
                    p.target = std::string("An image of ") + kSubjects[i % 4] +
                               " rendered in the reference texture.";
                    break;
                }
                case BenchCategory::pose_control: {
                    const std::string rel =
                        "bench_assets/pose-" + detail::two_digits(i) + ".png";
                    add_asset(rel, detail::pose_asset(i));
                    p.page.family = PageFamily::structure_reference_page;
                    p.page.elements.push_back(
                        PageElement::thumbnail(detail::pose_asset(i), rel));
                    p.page.elements.push_back(PageElement::text_run("match this pose"));
                    p.target =
                        "A person standing in the same pose as the reference stick figure.";
                    break;
                }
                case BenchCategory::sketch_reference: {
                    const std::string rel =
                        "bench_assets/sketch-" + detail::two_digits(i) + ".png";
                    add_asset(rel, detail::sketch_asset(i));
                    p.page.family = PageFamily::structure_reference_page;
                    p.page.elements.push_back(
                        PageElement::thumbnail(detail::sketch_asset(i), rel));
                    p.page.elements.push_back(PageElement::text_run("follow this sketch"));
                    p.target = std::string("An image whose composition follows the sketched ") +
                               detail::sketch_shape_name(i) + ".";
                    break;
                }
            }
            block.prompts.push_back(std::move(p));
        }
        out.spec.categories.push_back(std::move(block));
    }
    return out;
}

/// Writes the generated spec plus its reference-image assets under `dir`.
inline std::string write_default_bench(const std::string& dir) {
    const GeneratedBench gen = generate_default_bench();
    std::filesystem::create_directories(std::filesystem::path(dir) / "bench_assets");
    for (const auto& [rel, img] : gen.assets)
        write_png(img, (std::filesystem::path(dir) / rel).string());
    const std::string spec_path =
        (std::filesystem::path(dir) / "simple_v2v_bench.json").string();
    std::ofstream f(spec_path, std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write bench spec '" + spec_path + "'");
    f << bench_spec_to_json(gen.spec).dump(1) << "\n";
    return spec_path;
}

}  // namespace v2v
