#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "v2v/dit.hpp"
#include "v2v/matrix.hpp"
#include "v2v/tensor_io.hpp"
#include "v2v/vlm.hpp"

namespace v2v {

// -- conditioning-attention routing -------------------------------------------

struct RoutingBreakdownEntry {
    int block = 0;
    int head = 0;
    int step = 0;
    double visual_share = 0.0;
};

struct RoutingReport {
    double visual_share = 0.0;
    double reasoning_share = 0.0;
    int n_visual = 0;
    int n_reasoning = 0;
    double uniform_baseline = 0.0;
    std::vector<RoutingBreakdownEntry> breakdown;
};

/// Per recording: column mass summed over latent-query rows, renormalized
/// over non-pad conditioning columns, split by segment. The report averages
/// the per-recording shares over blocks, heads, and steps.
inline RoutingReport routing_shares(const std::vector<AttentionRecord>& recordings) {
    if (recordings.empty()) fail(ErrorKind::labeling, "no attention recordings");
    RoutingReport report;
    bool counts_set = false;
    for (const AttentionRecord& rec : recordings) {
        if (rec.col_segments.size() != static_cast<size_t>(rec.probs.cols()))
            fail(ErrorKind::labeling, "recording column labels do not match matrix width");
        double visual_mass = 0.0, reasoning_mass = 0.0;
        int n_v = 0, n_r = 0;
        for (int j = 0; j < rec.probs.cols(); ++j) {
            if (rec.col_segments[j] == BundleSegment::pad) continue;
            double col = 0.0;
            for (int i = 0; i < rec.probs.rows(); ++i) col += rec.probs.at(i, j);
            if (rec.col_segments[j] == BundleSegment::image) {
                visual_mass += col;
                ++n_v;
            } else {
                reasoning_mass += col;
                ++n_r;
            }
        }
        if (n_v + n_r == 0) fail(ErrorKind::labeling, "recording has no conditioning columns");
        if (!counts_set) {
            report.n_visual = n_v;
            report.n_reasoning = n_r;
            counts_set = true;
        }
        const double total = visual_mass + reasoning_mass;
        if (total <= 0.0) fail(ErrorKind::degenerate_input, "recording carries zero mass");
        report.breakdown.push_back({rec.block, rec.head, rec.step, visual_mass / total});
    }
    std::sort(report.breakdown.begin(), report.breakdown.end(),
              [](const RoutingBreakdownEntry& a, const RoutingBreakdownEntry& b) {
                  if (a.block != b.block) return a.block < b.block;
                  if (a.head != b.head) return a.head < b.head;
                  return a.step < b.step;
              });
    double sum = 0.0;
    for (const RoutingBreakdownEntry& e : report.breakdown) sum += e.visual_share;
    report.visual_share = sum / report.breakdown.size();
    report.reasoning_share = 1.0 - report.visual_share;
    report.uniform_baseline =
        static_cast<double>(report.n_visual) / (report.n_visual + report.n_reasoning);
    return report;
}

// -- cosine diagnostics ---------------------------------------------------------

enum class Pooling { mean_pool, pairwise };

inline double cosine_diag(const Matrix& a, const Matrix& b, Pooling pooling = Pooling::mean_pool) {
    if (a.cols() != b.cols()) fail(ErrorKind::dimension, "cosine_diag: dimension mismatch");
    if (a.rows() == 0 || b.rows() == 0) fail(ErrorKind::degenerate_input, "cosine_diag: no rows");
    if (pooling == Pooling::mean_pool) return cosine(mean_rows(a), mean_rows(b));
    double sum = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        std::vector<double> ra(a.row(i), a.row(i) + a.cols());
        for (int j = 0; j < b.rows(); ++j) {
            std::vector<double> rb(b.row(j), b.row(j) + b.cols());
            sum += cosine(ra, rb);
        }
    }
    return sum / (static_cast<double>(a.rows()) * b.rows());
}

// -- cross-modal retrieval -------------------------------------------------------

enum class RetrievalVariant { token_max, mean_pool, full_token };

inline const char* retrieval_variant_name(RetrievalVariant v) {
    switch (v) {
        case RetrievalVariant::token_max: return "token-max";
        case RetrievalVariant::mean_pool: return "mean-pool";
        case RetrievalVariant::full_token: return "full-token";
    }
    return "?";
}

struct RetrievalItem {
    Matrix image_states;
    Matrix phrase_states;
};

struct RetrievalReport {
    RetrievalVariant variant = RetrievalVariant::token_max;
    double r_at_1 = 0.0;
    double r_at_3 = 0.0;
    std::map<int, double> recall_at;
    double mrr = 0.0;
    double margin = 0.0;
    std::vector<int> ranks;
};

inline double retrieval_similarity(const Matrix& image_states, const Matrix& phrase_states,
                                   RetrievalVariant variant) {
    if (image_states.cols() != phrase_states.cols())
        fail(ErrorKind::dimension, "retrieval: dimension mismatch");
    switch (variant) {
        case RetrievalVariant::mean_pool:
            return cosine(mean_rows(image_states), mean_rows(phrase_states));
        case RetrievalVariant::token_max:
        case RetrievalVariant::full_token: {
            double best = -2.0, sum = 0.0;
            int pairs = 0;
            for (int i = 0; i < image_states.rows(); ++i) {
                std::vector<double> a(image_states.row(i), image_states.row(i) + image_states.cols());
                for (int j = 0; j < phrase_states.rows(); ++j) {
                    std::vector<double> b(phrase_states.row(j),
                                          phrase_states.row(j) + phrase_states.cols());
                    const double c = cosine(a, b);
                    best = std::max(best, c);
                    sum += c;
                    ++pairs;
                }
            }
            if (pairs == 0) fail(ErrorKind::degenerate_input, "retrieval: no token pairs");
            return variant == RetrievalVariant::token_max ? best : sum / pairs;
        }
    }
    fail(ErrorKind::retrieval, "unknown retrieval variant");
}

/// Rank item i's true phrase match among all phrases (competition ranking),
/// then aggregate R@k, MRR, and the true-vs-best-other margin.
inline RetrievalReport tokenmax_retrieval(const std::vector<RetrievalItem>& items,
                                          const std::vector<int>& k_values,
                                          RetrievalVariant variant) {
    const int n = static_cast<int>(items.size());
    if (n < 2) fail(ErrorKind::retrieval, "retrieval needs at least 2 items");
    Matrix sim(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            sim.at(i, j) = retrieval_similarity(items[i].image_states, items[j].phrase_states,
                                                variant);
    RetrievalReport report;
    report.variant = variant;
    double mrr_sum = 0.0, margin_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        int rank = 1;
        double best_other = -2.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (sim.at(i, j) > sim.at(i, i)) ++rank;
            best_other = std::max(best_other, sim.at(i, j));
        }
        report.ranks.push_back(rank);
        mrr_sum += 1.0 / rank;
        margin_sum += sim.at(i, i) - best_other;
    }
    report.mrr = mrr_sum / n;
    report.margin = margin_sum / n;
    auto recall = [&](int k) {
        int hits = 0;
        for (int r : report.ranks)
            if (r <= k) ++hits;
        return static_cast<double>(hits) / n;
    };
    for (int k : k_values) report.recall_at[k] = recall(k);
    report.r_at_1 = recall(1);
    report.r_at_3 = recall(3);
    return report;
}

// -- per-layer alignment ---------------------------------------------------------

/// Alignment is the mean over pairs of the cosine between pooled visual and
/// pooled text states. The underlying correlation statistic has no canonical
/// definition; this pooled-cosine reading is flagged in every report.
inline const char* kAlignmentDefinition = "mean over pairs of pooled-state cosine";

inline std::vector<double> layer_alignment(const std::vector<std::vector<Matrix>>& visual_per_layer,
                                           const std::vector<Matrix>& text_states) {
    if (text_states.empty()) fail(ErrorKind::degenerate_input, "layer_alignment: no pairs");
    std::vector<double> out;
    for (size_t layer = 0; layer < visual_per_layer.size(); ++layer) {
        const std::vector<Matrix>& visuals = visual_per_layer[layer];
        if (visuals.size() != text_states.size())
            fail(ErrorKind::dimension, "layer_alignment: pair count mismatch at layer " +
                                           std::to_string(layer + 1));
        double sum = 0.0;
        for (size_t p = 0; p < visuals.size(); ++p)
            sum += cosine(mean_rows(visuals[p]), mean_rows(text_states[p]));
        out.push_back(sum / visuals.size());
    }
    return out;
}

// -- recording serialization ------------------------------------------------------

inline nlohmann::json bundle_segments_to_json(const std::vector<BundleSegment>& segments) {
    nlohmann::json runs = nlohmann::json::array();
    size_t i = 0;
    while (i < segments.size()) {
        size_t j = i;
        while (j < segments.size() && segments[j] == segments[i]) ++j;
        runs.push_back({{"segment", bundle_segment_name(segments[i])}, {"length", j - i}});
        i = j;
    }
    return runs;
}

inline std::vector<BundleSegment> bundle_segments_from_json(const nlohmann::json& runs) {
    std::vector<BundleSegment> out;
    for (const nlohmann::json& run : runs) {
        const std::string name = run.at("segment").get<std::string>();
        BundleSegment s;
        if (name == "image") {
            s = BundleSegment::image;
        } else if (name == "reasoning") {
            s = BundleSegment::reasoning;
        } else if (name == "pad") {
            s = BundleSegment::pad;
        } else {
            fail(ErrorKind::labeling, "unknown bundle segment '" + name + "'");
        }
        out.insert(out.end(), run.at("length").get<size_t>(), s);
    }
    return out;
}

inline void save_recordings(const std::string& path_base,
                            const std::vector<AttentionRecord>& recordings) {
    std::vector<std::pair<std::string, const Matrix*>> tensors;
    nlohmann::json meta = nlohmann::json::array();
    for (size_t i = 0; i < recordings.size(); ++i) {
        tensors.emplace_back("rec" + std::to_string(i), &recordings[i].probs);
        meta.push_back({{"block", recordings[i].block},
                        {"head", recordings[i].head},
                        {"step", recordings[i].step},
                        {"segments", bundle_segments_to_json(recordings[i].col_segments)}});
    }
    save_tensors(path_base + ".tens", 0, tensors);
    std::ofstream f(path_base + ".json", std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write '" + path_base + ".json'");
    f << meta.dump(2) << "\n";
}

inline std::vector<AttentionRecord> load_recordings(const std::string& path_base) {
    const TensorFile tf = load_tensors(path_base + ".tens");
    std::ifstream f(path_base + ".json");
    if (!f) fail(ErrorKind::io, "cannot read '" + path_base + ".json'");
    nlohmann::json meta;
    f >> meta;
    if (meta.size() != tf.tensors.size())
        fail(ErrorKind::io, "recording metadata count does not match tensor count");
    std::vector<AttentionRecord> out;
    for (size_t i = 0; i < meta.size(); ++i) {
        AttentionRecord rec;
        rec.block = meta[i].at("block").get<int>();
        rec.head = meta[i].at("head").get<int>();
        rec.step = meta[i].at("step").get<int>();
        rec.col_segments = bundle_segments_from_json(meta[i].at("segments"));
        rec.probs = tf.tensors[i].second;
        out.push_back(std::move(rec));
    }
    return out;
}

// -- report emission ----------------------------------------------------------------

inline nlohmann::json routing_report_to_json(const RoutingReport& r) {
    nlohmann::json j;
    j["visual_share"] = r.visual_share;
    j["reasoning_share"] = r.reasoning_share;
    j["n_visual"] = r.n_visual;
    j["n_reasoning"] = r.n_reasoning;
    j["uniform_baseline"] = r.uniform_baseline;
    nlohmann::json breakdown = nlohmann::json::array();
    for (const RoutingBreakdownEntry& e : r.breakdown)
        breakdown.push_back({{"block", e.block},
                             {"head", e.head},
                             {"step", e.step},
                             {"visual_share", e.visual_share}});
    j["breakdown"] = breakdown;
    return j;
}

inline std::string routing_report_text(const RoutingReport& r) {
    char buf[256];
    std::string out;
    out += "Conditioning-attention routing\n";
    out += "------------------------------\n";
    std::snprintf(buf, sizeof buf, "visual share      %8.4f  (n=%d)\n", r.visual_share,
                  r.n_visual);
    out += buf;
    std::snprintf(buf, sizeof buf, "reasoning share   %8.4f  (n=%d)\n", r.reasoning_share,
                  r.n_reasoning);
    out += buf;
    std::snprintf(buf, sizeof buf, "uniform baseline  %8.4f\n", r.uniform_baseline);
    out += buf;
    return out;
}

inline nlohmann::json retrieval_report_to_json(const RetrievalReport& r) {
    nlohmann::json j;
    j["variant"] = retrieval_variant_name(r.variant);
    j["r_at_1"] = r.r_at_1;
    j["r_at_3"] = r.r_at_3;
    for (const auto& [k, v] : r.recall_at) j["recall"]["@" + std::to_string(k)] = v;
    j["mrr"] = r.mrr;
    j["margin"] = r.margin;
    j["ranks"] = r.ranks;
    return j;
}

inline std::string retrieval_report_text(const RetrievalReport& r) {
    char buf[256];
    std::string out;
    out += "Cross-modal retrieval (";
    out += retrieval_variant_name(r.variant);
    out += ")\n--------------------------------\n";
    std::snprintf(buf, sizeof buf, "R@1  %6.3f   R@3  %6.3f   MRR  %6.3f   margin  %+8.4f\n",
                  r.r_at_1, r.r_at_3, r.mrr, r.margin);
    out += buf;
    return out;
}

inline nlohmann::json alignment_report_to_json(const std::vector<double>& per_layer) {
    nlohmann::json j;
    j["definition"] = kAlignmentDefinition;
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < per_layer.size(); ++i)
        arr.push_back({{"layer", i + 1}, {"alignment", per_layer[i]}});
    j["per_layer"] = arr;
    return j;
}

}  // namespace v2v
