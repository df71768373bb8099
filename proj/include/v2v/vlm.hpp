#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "v2v/matrix.hpp"
#include "v2v/raster.hpp"
#include "v2v/rng.hpp"
#include "v2v/tokenizer.hpp"

namespace v2v {

enum class Segment { system, image, user, gen_marker, reasoning };

inline const char* segment_name(Segment s) {
    switch (s) {
        case Segment::system: return "system";
        case Segment::image: return "image";
        case Segment::user: return "user";
        case Segment::gen_marker: return "gen-marker";
        case Segment::reasoning: return "reasoning";
    }
    return "?";
}

inline Segment segment_from_name(const std::string& name) {
    for (Segment s : {Segment::system, Segment::image, Segment::user, Segment::gen_marker,
                      Segment::reasoning}) {
        if (name == segment_name(s)) return s;
    }
    fail(ErrorKind::labeling, "unknown segment '" + name + "'");
}

struct VlmConfig {
    int model_dim = 64;
    int layer_count = 4;
    int head_count = 4;
    int vocab_size = 512;
    int patch_size = 16;
    int max_sequence = 1024;
    uint64_t seed = 42;
};

struct TokenSequence {
    std::vector<int> ids;
    std::vector<Segment> segments;
    Matrix image_embeddings;  // one row per image position, in order

    int length() const { return static_cast<int>(ids.size()); }

    int segment_count(Segment s) const {
        return static_cast<int>(std::count(segments.begin(), segments.end(), s));
    }

    std::vector<int> segment_positions(Segment s) const {
        std::vector<int> out;
        for (size_t i = 0; i < segments.size(); ++i)
            if (segments[i] == s) out.push_back(static_cast<int>(i));
        return out;
    }
};

/// Run-length serialization of the per-position segment labels.
inline nlohmann::json segment_map_to_json(const std::vector<Segment>& segments) {
    nlohmann::json runs = nlohmann::json::array();
    size_t i = 0;
    while (i < segments.size()) {
        size_t j = i;
        while (j < segments.size() && segments[j] == segments[i]) ++j;
        runs.push_back({{"segment", segment_name(segments[i])}, {"length", j - i}});
        i = j;
    }
    return runs;
}

inline std::vector<Segment> segment_map_from_json(const nlohmann::json& runs) {
    std::vector<Segment> out;
    for (const nlohmann::json& run : runs) {
        const Segment s = segment_from_name(run.at("segment").get<std::string>());
        const int n = run.at("length").get<int>();
        for (int i = 0; i < n; ++i) out.push_back(s);
    }
    return out;
}

struct HiddenStateMatrix {
    Matrix values;  // T x D
    int layer = 0;
    std::vector<Segment> segments;
};

enum class ConditioningMode { image_hs_only, full_final };

inline const char* mode_name(ConditioningMode m) {
    return m == ConditioningMode::image_hs_only ? "image-hs-only" : "full-final";
}

inline ConditioningMode mode_from_name(const std::string& name) {
    if (name == "image-hs-only") return ConditioningMode::image_hs_only;
    if (name == "full-final") return ConditioningMode::full_final;
    fail(ErrorKind::mode, "unknown conditioning mode '" + name + "'");
}

enum class BundleSegment { image, reasoning, pad };

inline const char* bundle_segment_name(BundleSegment s) {
    switch (s) {
        case BundleSegment::image: return "image";
        case BundleSegment::reasoning: return "reasoning";
        case BundleSegment::pad: return "pad";
    }
    return "?";
}

/// The ordered hidden-state rows handed to the generator's cross-attention.
struct ConditioningBundle {
    Matrix rows;  // K x D
    ConditioningMode mode = ConditioningMode::image_hs_only;
    int layer = 0;
    std::vector<BundleSegment> row_segments;
    std::vector<int> source_positions;  // -1 for pad rows
    int image_length = 0;
    int reasoning_length = 0;

    int length() const { return rows.rows(); }

    int count(BundleSegment s) const {
        return static_cast<int>(std::count(row_segments.begin(), row_segments.end(), s));
    }
};

/// Per-head attention snapshot captured during a full forward pass.
struct VlmAttentionCapture {
    int layer = 0;
    int head = 0;
    Matrix probs;   // T x T, causally masked rows
    Matrix values;  // T x head_dim
    Matrix output;  // T x head_dim, probs @ values
};

namespace detail {

inline Matrix rmsnorm_rows(const Matrix& x, const Matrix& gamma, double eps = 1e-6) {
    Matrix out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
        const double* r = x.row(i);
        double ms = 0.0;
        for (int j = 0; j < x.cols(); ++j) ms += r[j] * r[j];
        const double inv = 1.0 / std::sqrt(ms / x.cols() + eps);
        for (int j = 0; j < x.cols(); ++j) out.at(i, j) = r[j] * inv * gamma.at(0, j);
    }
    return out;
}

inline double silu(double v) { return v / (1.0 + std::exp(-v)); }

constexpr double kMaskLogit = -1e30;

}  // namespace detail

class VlmModel {
public:
    explicit VlmModel(VlmConfig config) : cfg_(config) {
        if (cfg_.model_dim < 1 || cfg_.layer_count < 1 || cfg_.head_count < 1)
            fail(ErrorKind::config, "vlm dims must be positive");
        if (cfg_.model_dim % cfg_.head_count != 0)
            fail(ErrorKind::config, "model_dim " + std::to_string(cfg_.model_dim) +
                                        " not divisible by head_count " +
                                        std::to_string(cfg_.head_count));
        if (cfg_.vocab_size <= kFirstFreeTokenId)
            fail(ErrorKind::config, "vocab_size must exceed the reserved specials");
        init_weights();
    }

    const VlmConfig& config() const { return cfg_; }

    /// Tensors in documented checkpoint order.
    std::vector<std::pair<std::string, Matrix*>> named_params() {
        std::vector<std::pair<std::string, Matrix*>> out;
        out.emplace_back("token_embedding", &token_embedding_);
        out.emplace_back("patch_proj", &patch_proj_);
        out.emplace_back("patch_bias", &patch_bias_);
        out.emplace_back("patch_pos", &patch_pos_);
        out.emplace_back("seq_pos", &seq_pos_);
        for (size_t l = 0; l < layers_.size(); ++l) {
            const std::string p = "layer" + std::to_string(l + 1) + ".";
            Layer& L = layers_[l];
            out.emplace_back(p + "attn_norm", &L.attn_norm);
            out.emplace_back(p + "wq", &L.wq);
            out.emplace_back(p + "wk", &L.wk);
            out.emplace_back(p + "wv", &L.wv);
            out.emplace_back(p + "wo", &L.wo);
            out.emplace_back(p + "ffn_norm", &L.ffn_norm);
            out.emplace_back(p + "ffn_w1", &L.ffn_w1);
            out.emplace_back(p + "ffn_b1", &L.ffn_b1);
            out.emplace_back(p + "ffn_w2", &L.ffn_w2);
            out.emplace_back(p + "ffn_b2", &L.ffn_b2);
        }
        out.emplace_back("final_norm", &final_norm_);
        out.emplace_back("output_head", &output_head_);
        return out;
    }

    // -- patchify ----------------------------------------------------------

    Matrix patchify(const RasterImage& page) const {
        const int P = cfg_.patch_size;
        if (page.width() % P != 0 || page.height() % P != 0) {
            const int pad_w = (P - page.width() % P) % P;
            const int pad_h = (P - page.height() % P) % P;
            fail(ErrorKind::patch_size,
                 "page " + std::to_string(page.width()) + "x" + std::to_string(page.height()) +
                     " not divisible by patch size " + std::to_string(P) + "; pad width by " +
                     std::to_string(pad_w) + " and height by " + std::to_string(pad_h) +
                     " pixels");
        }
        const int gw = page.width() / P;
        const int gh = page.height() / P;
        const int n = gw * gh;
        if (n > patch_pos_.rows())
            fail(ErrorKind::capacity, "page yields " + std::to_string(n) +
                                          " patches; positional table holds " +
                                          std::to_string(patch_pos_.rows()));
        Matrix out(n, cfg_.model_dim);
        std::vector<double> flat(3 * P * P);
        for (int py = 0; py < gh; ++py) {
            for (int px = 0; px < gw; ++px) {
                size_t f = 0;
                for (int y = 0; y < P; ++y) {
                    for (int x = 0; x < P; ++x) {
                        const Rgb c = page.at(px * P + x, py * P + y);
                        flat[f++] = c.r / 255.0;
                        flat[f++] = c.g / 255.0;
                        flat[f++] = c.b / 255.0;
                    }
                }
                const int k = py * gw + px;
                for (int j = 0; j < cfg_.model_dim; ++j) {
                    double s = patch_bias_.at(0, j) + patch_pos_.at(k, j);
                    for (int i = 0; i < 3 * P * P; ++i) s += flat[i] * patch_proj_.at(i, j);
                    out.at(k, j) = s;
                }
            }
        }
        return out;
    }

    // -- prefix ------------------------------------------------------------

    TokenSequence build_prefix(const RasterImage& page, const std::string& template_text,
                               const std::string& system_text) const {
        TokenSequence seq;
        seq.ids.push_back(kSystemBeginId);
        seq.segments.push_back(Segment::system);
        for (int id : tokenize(system_text)) {
            seq.ids.push_back(id);
            seq.segments.push_back(Segment::system);
        }
        seq.image_embeddings = patchify(page);
        for (int i = 0; i < seq.image_embeddings.rows(); ++i) {
            seq.ids.push_back(kImagePlaceholderId);
            seq.segments.push_back(Segment::image);
        }
        for (int id : tokenize(template_text)) {
            seq.ids.push_back(id);
            seq.segments.push_back(Segment::user);
        }
        seq.ids.push_back(kGenMarkerId);
        seq.segments.push_back(Segment::gen_marker);
        if (seq.length() > cfg_.max_sequence)
            fail(ErrorKind::capacity, "prefix length " + std::to_string(seq.length()) +
                                          " exceeds max_sequence " +
                                          std::to_string(cfg_.max_sequence));
        return seq;
    }

    // -- full forward ------------------------------------------------------

    HiddenStateMatrix recompute_states(const TokenSequence& seq, int layer,
                                       std::vector<VlmAttentionCapture>* capture = nullptr) const {
        if (layer < 1 || layer > cfg_.layer_count)
            fail(ErrorKind::layer, "layer " + std::to_string(layer) + " outside 1.." +
                                       std::to_string(cfg_.layer_count));
        Matrix x = embed_sequence(seq);
        for (int l = 0; l < layer; ++l) x = run_block(layers_[l], x, l + 1, capture);
        if (layer == cfg_.layer_count) x = detail::rmsnorm_rows(x, final_norm_);
        return HiddenStateMatrix{std::move(x), layer, seq.segments};
    }

    // -- greedy generation with cached attention ----------------------------

    struct GenerationResult {
        TokenSequence sequence;
        Matrix decode_states;  // N x D, final-layer states at reasoning positions
    };

    GenerationResult generate_reasoning(const TokenSequence& prefix, int n_tokens) const {
        if (n_tokens < 0) fail(ErrorKind::range, "reasoning budget must be >= 0");
        if (prefix.length() + n_tokens > cfg_.max_sequence)
            fail(ErrorKind::capacity,
                 "sequence needs " + std::to_string(prefix.length() + n_tokens) +
                     " positions; max_sequence is " + std::to_string(cfg_.max_sequence));
        GenerationResult res;
        res.sequence = prefix;
        res.decode_states = Matrix(n_tokens, cfg_.model_dim);
        if (n_tokens == 0) return res;

        KvCache cache(cfg_.layer_count);
        Matrix x = embed_sequence(prefix);
        Matrix states = x;
        for (int l = 0; l < cfg_.layer_count; ++l) states = prefill_block(layers_[l], states, cache.k[l], cache.v[l]);
        Matrix last = slice_rows(states, states.rows() - 1, states.rows());
        last = detail::rmsnorm_rows(last, final_norm_);
        int next = argmax_token(last);

        for (int i = 0; i < n_tokens; ++i) {
            const int pos = prefix.length() + i;
            res.sequence.ids.push_back(next);
            res.sequence.segments.push_back(Segment::reasoning);
            Matrix tok = embed_token(next, pos);
            for (int l = 0; l < cfg_.layer_count; ++l) tok = decode_block(layers_[l], tok, cache.k[l], cache.v[l]);
            tok = detail::rmsnorm_rows(tok, final_norm_);
            for (int j = 0; j < cfg_.model_dim; ++j) res.decode_states.at(i, j) = tok.at(0, j);
            if (i + 1 < n_tokens) next = argmax_token(tok);
        }
        return res;
    }

    // -- extraction ---------------------------------------------------------

    static ConditioningBundle extract(const HiddenStateMatrix& states, ConditioningMode mode) {
        if (states.segments.size() != static_cast<size_t>(states.values.rows()))
            fail(ErrorKind::labeling, "states carry no usable segment map");
        std::vector<int> image_pos, reasoning_pos;
        for (size_t i = 0; i < states.segments.size(); ++i) {
            if (states.segments[i] == Segment::image) image_pos.push_back(static_cast<int>(i));
            if (states.segments[i] == Segment::reasoning)
                reasoning_pos.push_back(static_cast<int>(i));
        }
        ConditioningBundle b;
        b.mode = mode;
        b.layer = states.layer;
        b.image_length = static_cast<int>(image_pos.size());
        if (mode == ConditioningMode::full_final && reasoning_pos.empty())
            fail(ErrorKind::mode, "full-final needs at least one generated reasoning token");
        std::vector<int> rows = image_pos;
        if (mode == ConditioningMode::full_final) {
            rows.insert(rows.end(), reasoning_pos.begin(), reasoning_pos.end());
            b.reasoning_length = static_cast<int>(reasoning_pos.size());
        }
        b.rows = take_rows(states.values, rows);
        b.source_positions = rows;
        b.row_segments.assign(image_pos.size(), BundleSegment::image);
        b.row_segments.insert(b.row_segments.end(), static_cast<size_t>(b.reasoning_length),
                              BundleSegment::reasoning);
        return b;
    }

private:
    struct Layer {
        Matrix attn_norm, wq, wk, wv, wo;
        Matrix ffn_norm, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };

    struct KvCache {
        explicit KvCache(int layers) : k(layers), v(layers) {}
        std::vector<Matrix> k, v;
    };

    void init_weights() {
        const int D = cfg_.model_dim;
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(D));
        auto gauss = [&](const char* name, int r, int c) {
            return random_gaussian(r, c, derive_seed(cfg_.seed, std::string("vlm.") + name), std_dev);
        };
        token_embedding_ = gauss("token_embedding", cfg_.vocab_size, D);
        patch_proj_ = gauss("patch_proj", 3 * cfg_.patch_size * cfg_.patch_size, D);
        patch_bias_ = Matrix(1, D, 0.0);
        patch_pos_ = gauss("patch_pos", cfg_.max_sequence, D);
        seq_pos_ = gauss("seq_pos", cfg_.max_sequence, D);
        layers_.resize(cfg_.layer_count);
        for (int l = 0; l < cfg_.layer_count; ++l) {
            const std::string p = "layer" + std::to_string(l + 1) + ".";
            Layer& L = layers_[l];
            L.attn_norm = Matrix(1, D, 1.0);
            L.wq = gauss((p + "wq").c_str(), D, D);
            L.wk = gauss((p + "wk").c_str(), D, D);
            L.wv = gauss((p + "wv").c_str(), D, D);
            L.wo = gauss((p + "wo").c_str(), D, D);
            L.ffn_norm = Matrix(1, D, 1.0);
            L.ffn_w1 = gauss((p + "ffn_w1").c_str(), D, 4 * D);
            L.ffn_b1 = Matrix(1, 4 * D, 0.0);
            L.ffn_w2 = gauss((p + "ffn_w2").c_str(), 4 * D, D);
            L.ffn_b2 = Matrix(1, D, 0.0);
        }
        final_norm_ = Matrix(1, D, 1.0);
        output_head_ = gauss("output_head", D, cfg_.vocab_size);
    }

    Matrix embed_token(int id, int pos) const {
        if (id < 0 || id >= cfg_.vocab_size) fail(ErrorKind::range, "token id out of vocab");
        if (pos >= cfg_.max_sequence) fail(ErrorKind::capacity, "position beyond max_sequence");
        Matrix x(1, cfg_.model_dim);
        for (int j = 0; j < cfg_.model_dim; ++j)
            x.at(0, j) = token_embedding_.at(id, j) + seq_pos_.at(pos, j);
        return x;
    }

    Matrix embed_sequence(const TokenSequence& seq) const {
        const int T = seq.length();
        Matrix x(T, cfg_.model_dim);
        int img_row = 0;
        for (int i = 0; i < T; ++i) {
            if (seq.segments[i] == Segment::image) {
                if (img_row >= seq.image_embeddings.rows())
                    fail(ErrorKind::labeling, "image segment longer than patch embeddings");
                for (int j = 0; j < cfg_.model_dim; ++j)
                    x.at(i, j) = seq.image_embeddings.at(img_row, j) + seq_pos_.at(i, j);
                ++img_row;
            } else {
                const int id = seq.ids[i];
                if (id < 0 || id >= cfg_.vocab_size)
                    fail(ErrorKind::range, "token id out of vocab at position " + std::to_string(i));
                for (int j = 0; j < cfg_.model_dim; ++j)
                    x.at(i, j) = token_embedding_.at(id, j) + seq_pos_.at(i, j);
            }
        }
        return x;
    }

    /// Pre-norm block over the full sequence with a causal mask.
    Matrix run_block(const Layer& L, const Matrix& x, int layer_index,
                     std::vector<VlmAttentionCapture>* capture) const {
        const int T = x.rows();
        const int D = cfg_.model_dim;
        const int H = cfg_.head_count;
        const int dh = D / H;
        Matrix normed = detail::rmsnorm_rows(x, L.attn_norm);
        Matrix q = matmul(normed, L.wq), k = matmul(normed, L.wk), v = matmul(normed, L.wv);
        Matrix concat(T, D);
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int h = 0; h < H; ++h) {
            Matrix logits(T, T);
            for (int i = 0; i < T; ++i)
                for (int j = 0; j < T; ++j) {
                    if (j > i) {
                        logits.at(i, j) = detail::kMaskLogit;
                    } else {
                        logits.at(i, j) =
                            dot(q.row(i) + h * dh, k.row(j) + h * dh, dh) * inv_scale;
                    }
                }
            softmax_rows_inplace(logits);
            Matrix head_out(T, dh);
            for (int i = 0; i < T; ++i)
                for (int j = 0; j <= i; ++j) {
                    const double p = logits.at(i, j);
                    if (p == 0.0) continue;
                    const double* vr = v.row(j) + h * dh;
                    for (int c = 0; c < dh; ++c) head_out.at(i, c) += p * vr[c];
                }
            if (capture) {
                Matrix head_v(T, dh);
                for (int i = 0; i < T; ++i)
                    for (int c = 0; c < dh; ++c) head_v.at(i, c) = v.at(i, h * dh + c);
                capture->push_back({layer_index, h, logits, head_v, head_out});
            }
            for (int i = 0; i < T; ++i)
                for (int c = 0; c < dh; ++c) concat.at(i, h * dh + c) = head_out.at(i, c);
        }
        Matrix attn = matmul(concat, L.wo);
        Matrix h1 = add(x, attn);
        Matrix ffn = ffn_rows(L, detail::rmsnorm_rows(h1, L.ffn_norm));
        return add(h1, ffn);
    }

    Matrix ffn_rows(const Layer& L, const Matrix& normed) const {
        Matrix hidden = matmul(normed, L.ffn_w1);
        add_row_inplace(hidden, L.ffn_b1);
        for (double& v : hidden.data()) v = detail::silu(v);
        Matrix out = matmul(hidden, L.ffn_w2);
        add_row_inplace(out, L.ffn_b2);
        return out;
    }

    /// Same arithmetic as run_block, additionally filling the layer's KV cache.
    Matrix prefill_block(const Layer& L, const Matrix& x, Matrix& k_cache, Matrix& v_cache) const {
        Matrix normed = detail::rmsnorm_rows(x, L.attn_norm);
        k_cache = matmul(normed, L.wk);
        v_cache = matmul(normed, L.wv);
        Matrix q = matmul(normed, L.wq);
        Matrix concat = attend_causal(q, k_cache, v_cache);
        Matrix h1 = add(x, matmul(concat, L.wo));
        return add(h1, ffn_rows(L, detail::rmsnorm_rows(h1, L.ffn_norm)));
    }

    /// One cached decode step for a single new position.
    Matrix decode_block(const Layer& L, const Matrix& x, Matrix& k_cache, Matrix& v_cache) const {
        Matrix normed = detail::rmsnorm_rows(x, L.attn_norm);
        k_cache = vstack(k_cache, matmul(normed, L.wk));
        v_cache = vstack(v_cache, matmul(normed, L.wv));
        Matrix q = matmul(normed, L.wq);
        const int T = k_cache.rows();
        const int D = cfg_.model_dim;
        const int H = cfg_.head_count;
        const int dh = D / H;
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
        Matrix concat(1, D);
        for (int h = 0; h < H; ++h) {
            Matrix logits(1, T);
            for (int j = 0; j < T; ++j)
                logits.at(0, j) = dot(q.row(0) + h * dh, k_cache.row(j) + h * dh, dh) * inv_scale;
            softmax_rows_inplace(logits);
            for (int j = 0; j < T; ++j) {
                const double p = logits.at(0, j);
                if (p == 0.0) continue;
                const double* vr = v_cache.row(j) + h * dh;
                for (int c = 0; c < dh; ++c) concat.at(0, h * dh + c) += p * vr[c];
            }
        }
        Matrix h1 = add(x, matmul(concat, L.wo));
        return add(h1, ffn_rows(L, detail::rmsnorm_rows(h1, L.ffn_norm)));
    }

    Matrix attend_causal(const Matrix& q, const Matrix& k, const Matrix& v) const {
        const int T = q.rows();
        const int D = cfg_.model_dim;
        const int H = cfg_.head_count;
        const int dh = D / H;
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
        Matrix concat(T, D);
        for (int h = 0; h < H; ++h) {
            Matrix logits(T, T);
            for (int i = 0; i < T; ++i)
                for (int j = 0; j < T; ++j)
                    logits.at(i, j) = j > i ? detail::kMaskLogit
                                            : dot(q.row(i) + h * dh, k.row(j) + h * dh, dh) *
                                                  inv_scale;
            softmax_rows_inplace(logits);
            for (int i = 0; i < T; ++i)
                for (int j = 0; j <= i; ++j) {
                    const double p = logits.at(i, j);
                    if (p == 0.0) continue;
                    const double* vr = v.row(j) + h * dh;
                    for (int c = 0; c < dh; ++c) concat.at(i, h * dh + c) += p * vr[c];
                }
        }
        return concat;
    }

    /// Greedy pick; ties resolve to the lowest token id.
    int argmax_token(const Matrix& final_state) const {
        Matrix logits = matmul(final_state, output_head_);
        int best = 0;
        for (int j = 1; j < cfg_.vocab_size; ++j)
            if (logits.at(0, j) > logits.at(0, best)) best = j;
        return best;
    }

    VlmConfig cfg_;
    Matrix token_embedding_, patch_proj_, patch_bias_, patch_pos_, seq_pos_;
    std::vector<Layer> layers_;
    Matrix final_norm_, output_head_;
};

}  // namespace v2v
