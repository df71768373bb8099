#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "v2v/autograd.hpp"
#include "v2v/matrix.hpp"
#include "v2v/raster.hpp"
#include "v2v/rng.hpp"
#include "v2v/vlm.hpp"

namespace v2v {

struct DitConfig {
    int grid_h = 8;
    int grid_w = 8;
    int channels = 4;
    int model_dim = 64;
    int block_count = 2;
    int head_count = 4;
    int steps = 30;
    double cfg_scale = 4.0;
    uint64_t seed = 42;
};

struct LatentGrid {
    int gh = 0;
    int gw = 0;
    int c = 0;
    Matrix tokens;  // (gh*gw) x c, row-major cells

    void require_finite(const std::string& where) const {
        if (!tokens.all_finite()) fail(ErrorKind::numeric_failure, "non-finite latent " + where);
    }
};

/// Fixed linear latent codec. Each latent cell covers one square pixel block;
/// channels 0..2 carry the block's mean rgb mapped to [-1, 1], channel 3 is 0.
inline LatentGrid encode_image_to_latent(const RasterImage& img, int gh, int gw, int c) {
    if (img.width() % gw != 0 || img.height() % gh != 0)
        fail(ErrorKind::dimension, "image " + std::to_string(img.width()) + "x" +
                                       std::to_string(img.height()) + " not divisible into " +
                                       std::to_string(gw) + "x" + std::to_string(gh) + " cells");
    const int bw = img.width() / gw;
    const int bh = img.height() / gh;
    LatentGrid z{gh, gw, c, Matrix(gh * gw, c)};
    for (int cy = 0; cy < gh; ++cy) {
        for (int cx = 0; cx < gw; ++cx) {
            double sum[3] = {0, 0, 0};
            for (int y = 0; y < bh; ++y)
                for (int x = 0; x < bw; ++x) {
                    const Rgb p = img.at(cx * bw + x, cy * bh + y);
                    sum[0] += p.r;
                    sum[1] += p.g;
                    sum[2] += p.b;
                }
            const double n = static_cast<double>(bw) * bh;
            for (int ch = 0; ch < std::min(3, c); ++ch)
                z.tokens.at(cy * gw + cx, ch) = 2.0 * (sum[ch] / n) / 255.0 - 1.0;
        }
    }
    return z;
}

inline RasterImage decode_latent_to_image(const LatentGrid& z, int cell_pixels = 8) {
    RasterImage img(z.gw * cell_pixels, z.gh * cell_pixels, Rgb{0, 0, 0});
    for (int cy = 0; cy < z.gh; ++cy)
        for (int cx = 0; cx < z.gw; ++cx) {
            uint8_t rgb[3];
            for (int ch = 0; ch < 3; ++ch) {
                const double v = ch < z.c ? z.tokens.at(cy * z.gw + cx, ch) : -1.0;
                const double mapped = (v + 1.0) * 0.5 * 255.0;
                rgb[ch] = static_cast<uint8_t>(std::lround(std::clamp(mapped, 0.0, 255.0)));
            }
            fill_rect(img, cx * cell_pixels, cy * cell_pixels, cell_pixels, cell_pixels,
                      Rgb{rgb[0], rgb[1], rgb[2]});
        }
    return img;
}

/// One cross-attention softmax captured during sampling: latent-query rows
/// over conditioning-key columns, tagged with the bundle's segment labels.
struct AttentionRecord {
    int block = 0;
    int head = 0;
    int step = 0;
    Matrix probs;
    std::vector<BundleSegment> col_segments;
};

struct AttentionRecorder {
    std::vector<AttentionRecord> records;
    void clear() { records.clear(); }
};

struct DitTrainExample {
    ConditioningBundle bundle;
    RasterImage target;
};

struct SampleResult {
    LatentGrid latent;
    RasterImage image;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::map<std::string, double> per_tensor;
};

class DitModel {
public:
    explicit DitModel(DitConfig config) : cfg_(config) {
        if (cfg_.steps < 1) fail(ErrorKind::config, "step count must be >= 1");
        if (cfg_.cfg_scale < 0.0) fail(ErrorKind::config, "guidance scale must be >= 0");
        if (cfg_.model_dim % cfg_.head_count != 0)
            fail(ErrorKind::config, "model_dim not divisible by head_count");
        if (cfg_.grid_h < 1 || cfg_.grid_w < 1 || cfg_.channels < 1 || cfg_.block_count < 1)
            fail(ErrorKind::config, "latent grid and block count must be positive");
        init_weights();
    }

    const DitConfig& config() const { return cfg_; }

    std::vector<std::pair<std::string, Matrix*>> named_params() {
        std::vector<std::pair<std::string, Matrix*>> out;
        out.emplace_back("token_in", &token_in_);
        out.emplace_back("token_bias", &token_bias_);
        out.emplace_back("pos_emb", &pos_emb_);
        out.emplace_back("time_w1", &time_w1_);
        out.emplace_back("time_b1", &time_b1_);
        out.emplace_back("time_w2", &time_w2_);
        out.emplace_back("time_b2", &time_b2_);
        for (size_t b = 0; b < blocks_.size(); ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            Block& blk = blocks_[b];
            out.emplace_back(p + "self_norm", &blk.self_norm);
            out.emplace_back(p + "self_wq", &blk.self_wq);
            out.emplace_back(p + "self_wk", &blk.self_wk);
            out.emplace_back(p + "self_wv", &blk.self_wv);
            out.emplace_back(p + "self_wo", &blk.self_wo);
            out.emplace_back(p + "cross_norm", &blk.cross_norm);
            out.emplace_back(p + "cross_wq", &blk.cross_wq);
            out.emplace_back(p + "cross_wk", &blk.cross_wk);
            out.emplace_back(p + "cross_wv", &blk.cross_wv);
            out.emplace_back(p + "cross_wo", &blk.cross_wo);
            out.emplace_back(p + "ffn_norm", &blk.ffn_norm);
            out.emplace_back(p + "ffn_w1", &blk.ffn_w1);
            out.emplace_back(p + "ffn_b1", &blk.ffn_b1);
            out.emplace_back(p + "ffn_w2", &blk.ffn_w2);
            out.emplace_back(p + "ffn_b2", &blk.ffn_b2);
        }
        out.emplace_back("final_norm", &final_norm_);
        out.emplace_back("out_proj", &out_proj_);
        out.emplace_back("out_bias", &out_bias_);
        out.emplace_back("null_cond", &null_cond_);
        return out;
    }

    // -- attention instrumentation -------------------------------------------

    std::shared_ptr<AttentionRecorder> attention_hook(const std::vector<int>& blocks) {
        for (int b : blocks)
            if (b < 0 || b >= cfg_.block_count)
                fail(ErrorKind::range, "block index " + std::to_string(b) + " outside 0.." +
                                           std::to_string(cfg_.block_count - 1));
        hooked_blocks_.insert(blocks.begin(), blocks.end());
        if (!recorder_) recorder_ = std::make_shared<AttentionRecorder>();
        return recorder_;
    }

    // -- sampling -------------------------------------------------------------

    SampleResult sample(const ConditioningBundle& bundle, int steps, double cfg_scale,
                        uint64_t seed) const {
        if (steps < 1) fail(ErrorKind::config, "step count must be >= 1");
        if (bundle.length() == 0) fail(ErrorKind::conditioning, "empty conditioning bundle");
        if (bundle.rows.cols() != cfg_.model_dim)
            fail(ErrorKind::dimension, "bundle dim " + std::to_string(bundle.rows.cols()) +
                                           " does not match generator dim " +
                                           std::to_string(cfg_.model_dim));
        if (bundle.count(BundleSegment::pad) == bundle.length())
            fail(ErrorKind::conditioning, "bundle holds only pad rows");

        const int T = cfg_.grid_h * cfg_.grid_w;
        LatentGrid z{cfg_.grid_h, cfg_.grid_w, cfg_.channels, Matrix(T, cfg_.channels)};
        GaussianRng rng(derive_seed(seed, "dit.init-noise"));
        for (double& v : z.tokens.data()) v = rng.normal();

        Matrix cond_mask(1, bundle.length());
        for (int j = 0; j < bundle.length(); ++j)
            cond_mask.at(0, j) =
                bundle.row_segments[j] == BundleSegment::pad ? detail::kMaskLogit : 0.0;

        const double dt = 1.0 / steps;
        for (int k = 0; k < steps; ++k) {
            const double t = 1.0 - static_cast<double>(k) * dt;
            Matrix v;
            if (cfg_scale == 0.0) {
                v = velocity(z.tokens, t, null_cond_, nullptr, nullptr, -1);
            } else if (cfg_scale == 1.0) {
                v = velocity(z.tokens, t, bundle.rows, &cond_mask, &bundle.row_segments, k);
            } else {
                Matrix u = velocity(z.tokens, t, null_cond_, nullptr, nullptr, -1);
                Matrix c = velocity(z.tokens, t, bundle.rows, &cond_mask, &bundle.row_segments, k);
                v = Matrix(u.rows(), u.cols());
                for (size_t i = 0; i < v.size(); ++i)
                    v.data()[i] = u.data()[i] + cfg_scale * (c.data()[i] - u.data()[i]);
            }
            for (size_t i = 0; i < z.tokens.size(); ++i) z.tokens.data()[i] -= dt * v.data()[i];
            if (!z.tokens.all_finite())
                fail(ErrorKind::numeric_failure,
                     "non-finite latent at denoising step " + std::to_string(k));
        }
        SampleResult out{z, decode_latent_to_image(z)};
        return out;
    }

    SampleResult sample(const ConditioningBundle& bundle) const {
        return sample(bundle, cfg_.steps, cfg_.cfg_scale, cfg_.seed);
    }

    const Matrix& null_conditioning() const { return null_cond_; }

    /// Conditional velocity prediction for one latent state, for callers that
    /// drive their own denoising loop.
    Matrix velocity_eval(const Matrix& z_tokens, double t, const ConditioningBundle& bundle) const {
        Matrix cond_mask(1, bundle.length());
        for (int j = 0; j < bundle.length(); ++j)
            cond_mask.at(0, j) =
                bundle.row_segments[j] == BundleSegment::pad ? detail::kMaskLogit : 0.0;
        return velocity(z_tokens, t, bundle.rows, &cond_mask, nullptr, -1);
    }

    Matrix velocity_eval_null(const Matrix& z_tokens, double t) const {
        return velocity(z_tokens, t, null_cond_, nullptr, nullptr, -1);
    }

    /// Timestep and noise for one training example, derived from the model
    /// seed, the example content, and the step index. Exposed so tests can
    /// reproduce the regression target exactly.
    static std::pair<double, Matrix> train_noise(const DitConfig& cfg, const DitTrainExample& ex,
                                                 uint64_t step_index) {
        const uint64_t content = matrix_hash(ex.bundle.rows) ^
                                 fnv1a64(ex.target.pixels().data(), ex.target.pixels().size());
        GaussianRng rng(splitmix64(derive_seed(cfg.seed, "dit.train-noise") ^ content ^
                                   splitmix64(step_index + 1)));
        const double t = rng.uniform();
        Matrix eps(cfg.grid_h * cfg.grid_w, cfg.channels);
        for (double& v : eps.data()) v = rng.normal();
        return {t, std::move(eps)};
    }

    // -- training ---------------------------------------------------------------

    /// Loss and per-parameter gradients for one batch, with noise and timestep
    /// derived from (seed, example content, step index) so results are pure.
    std::pair<double, std::vector<Matrix>> compute_gradients(
        const std::vector<DitTrainExample>& batch, uint64_t step_index) const {
        if (batch.empty()) fail(ErrorKind::degenerate_input, "empty training batch");
        Tape tape;
        ParamIds ids = input_params(tape);
        std::vector<int> losses;
        for (const DitTrainExample& ex : batch)
            losses.push_back(example_loss(tape, ids, ex, step_index));
        int total = losses[0];
        for (size_t i = 1; i < losses.size(); ++i) total = tape.add(total, losses[i]);
        total = tape.scale(total, 1.0 / static_cast<double>(losses.size()));
        const double loss = tape.value(total).at(0, 0);
        if (!std::isfinite(loss)) fail(ErrorKind::numeric_failure, "non-finite training loss");
        tape.backward(total);
        std::vector<Matrix> grads;
        for (int pid : ids.flat) {
            Matrix g = tape.grad(pid);
            if (g.empty()) g = Matrix(tape.value(pid).rows(), tape.value(pid).cols());
            grads.push_back(std::move(g));
        }
        return {loss, std::move(grads)};
    }

    double loss_only(const std::vector<DitTrainExample>& batch, uint64_t step_index) const {
        if (batch.empty()) fail(ErrorKind::degenerate_input, "empty training batch");
        Tape tape;
        ParamIds ids = input_params(tape);
        double sum = 0.0;
        for (const DitTrainExample& ex : batch)
            sum += tape.value(example_loss(tape, ids, ex, step_index)).at(0, 0);
        return sum / static_cast<double>(batch.size());
    }

    /// One Adam step on the denoising regression objective. Returns the loss
    /// before the update.
    double train_step(const std::vector<DitTrainExample>& batch, double lr) {
        auto [loss, grads] = compute_gradients(batch, step_counter_);
        ++step_counter_;
        adam_update(grads, lr);
        return loss;
    }

    uint64_t step_counter() const { return step_counter_; }

    /// Central finite differences (h per coordinate) on a deterministic
    /// coordinate subset of every parameter tensor.
    GradCheckReport grad_check(const std::vector<DitTrainExample>& batch, int coords_per_tensor = 5,
                               double h = 1e-5) {
        const uint64_t probe_step = 1234567;
        auto [loss, grads] = compute_gradients(batch, probe_step);
        (void)loss;
        GradCheckReport report;
        auto params = named_params();
        for (size_t p = 0; p < params.size(); ++p) {
            Matrix* tensor = params[p].second;
            GaussianRng pick(derive_seed(cfg_.seed, "grad-check." + params[p].first));
            double tensor_max = 0.0;
            for (int k = 0; k < coords_per_tensor; ++k) {
                const size_t idx = pick.next_u64() % tensor->size();
                const double keep = tensor->data()[idx];
                tensor->data()[idx] = keep + h;
                const double lp = loss_only(batch, probe_step);
                tensor->data()[idx] = keep - h;
                const double lm = loss_only(batch, probe_step);
                tensor->data()[idx] = keep;
                const double numeric = (lp - lm) / (2.0 * h);
                const double analytic = grads[p].data()[idx];
                const double denom = std::max(std::abs(numeric) + std::abs(analytic), 1e-6);
                tensor_max = std::max(tensor_max, std::abs(numeric - analytic) / denom);
            }
            report.per_tensor[params[p].first] = tensor_max;
            report.max_rel_error = std::max(report.max_rel_error, tensor_max);
        }
        return report;
    }

private:
    struct Block {
        Matrix self_norm, self_wq, self_wk, self_wv, self_wo;
        Matrix cross_norm, cross_wq, cross_wk, cross_wv, cross_wo;
        Matrix ffn_norm, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };

    struct BlockIds {
        int self_norm, self_wq, self_wk, self_wv, self_wo;
        int cross_norm, cross_wq, cross_wk, cross_wv, cross_wo;
        int ffn_norm, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };

    struct ParamIds {
        int token_in, token_bias, pos_emb;
        int time_w1, time_b1, time_w2, time_b2;
        std::vector<BlockIds> blocks;
        int final_norm, out_proj, out_bias, null_cond;
        std::vector<int> flat;  // named_params order
    };

    void init_weights() {
        const int D = cfg_.model_dim;
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(D));
        auto gauss = [&](const std::string& name, int r, int c) {
            return random_gaussian(r, c, derive_seed(cfg_.seed, "dit." + name), std_dev);
        };
        token_in_ = gauss("token_in", cfg_.channels, D);
        token_bias_ = Matrix(1, D, 0.0);
        pos_emb_ = gauss("pos_emb", cfg_.grid_h * cfg_.grid_w, D);
        time_w1_ = gauss("time_w1", D, D);
        time_b1_ = Matrix(1, D, 0.0);
        time_w2_ = gauss("time_w2", D, D);
        time_b2_ = Matrix(1, D, 0.0);
        blocks_.resize(cfg_.block_count);
        for (int b = 0; b < cfg_.block_count; ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            Block& blk = blocks_[b];
            blk.self_norm = Matrix(1, D, 1.0);
            blk.self_wq = gauss(p + "self_wq", D, D);
            blk.self_wk = gauss(p + "self_wk", D, D);
            blk.self_wv = gauss(p + "self_wv", D, D);
            blk.self_wo = gauss(p + "self_wo", D, D);
            blk.cross_norm = Matrix(1, D, 1.0);
            blk.cross_wq = gauss(p + "cross_wq", D, D);
            blk.cross_wk = gauss(p + "cross_wk", D, D);
            blk.cross_wv = gauss(p + "cross_wv", D, D);
            blk.cross_wo = gauss(p + "cross_wo", D, D);
            blk.ffn_norm = Matrix(1, D, 1.0);
            blk.ffn_w1 = gauss(p + "ffn_w1", D, 4 * D);
            blk.ffn_b1 = Matrix(1, 4 * D, 0.0);
            blk.ffn_w2 = gauss(p + "ffn_w2", 4 * D, D);
            blk.ffn_b2 = Matrix(1, D, 0.0);
        }
        final_norm_ = Matrix(1, D, 1.0);
        out_proj_ = gauss("out_proj", D, cfg_.channels);
        out_bias_ = Matrix(1, cfg_.channels, 0.0);
        null_cond_ = gauss("null_cond", 1, D);
    }

    ParamIds input_params(Tape& tape) const {
        ParamIds ids{};
        auto in = [&](const Matrix& m) {
            const int id = tape.input(m);
            ids.flat.push_back(id);
            return id;
        };
        ids.token_in = in(token_in_);
        ids.token_bias = in(token_bias_);
        ids.pos_emb = in(pos_emb_);
        ids.time_w1 = in(time_w1_);
        ids.time_b1 = in(time_b1_);
        ids.time_w2 = in(time_w2_);
        ids.time_b2 = in(time_b2_);
        for (const Block& blk : blocks_) {
            BlockIds b{};
            b.self_norm = in(blk.self_norm);
            b.self_wq = in(blk.self_wq);
            b.self_wk = in(blk.self_wk);
            b.self_wv = in(blk.self_wv);
            b.self_wo = in(blk.self_wo);
            b.cross_norm = in(blk.cross_norm);
            b.cross_wq = in(blk.cross_wq);
            b.cross_wk = in(blk.cross_wk);
            b.cross_wv = in(blk.cross_wv);
            b.cross_wo = in(blk.cross_wo);
            b.ffn_norm = in(blk.ffn_norm);
            b.ffn_w1 = in(blk.ffn_w1);
            b.ffn_b1 = in(blk.ffn_b1);
            b.ffn_w2 = in(blk.ffn_w2);
            b.ffn_b2 = in(blk.ffn_b2);
            ids.blocks.push_back(b);
        }
        ids.final_norm = in(final_norm_);
        ids.out_proj = in(out_proj_);
        ids.out_bias = in(out_bias_);
        ids.null_cond = in(null_cond_);
        return ids;
    }

    Matrix time_features(double t) const {
        const int D = cfg_.model_dim;
        Matrix f(1, D);
        const double pos = t * 1000.0;
        for (int i = 0; i < D / 2; ++i) {
            const double freq = std::exp(-std::log(10000.0) * (2.0 * i) / D);
            f.at(0, 2 * i) = std::sin(pos * freq);
            f.at(0, 2 * i + 1) = std::cos(pos * freq);
        }
        return f;
    }

    struct HookSink {
        const std::set<int>* blocks = nullptr;
        AttentionRecorder* recorder = nullptr;
        const std::vector<BundleSegment>* col_segments = nullptr;
        int step = -1;
    };

    /// Velocity head shared by sampling, training, and grad checks; one tape
    /// graph builder so forward semantics cannot drift between paths.
    int forward_velocity(Tape& tape, const ParamIds& ids, int z_id, double t, int cond_id,
                         const Matrix* cond_mask, const HookSink* hooks) const {
        const int D = cfg_.model_dim;
        const int H = cfg_.head_count;
        const int dh = D / H;
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

        int tfeat = tape.input(time_features(t));
        int th = tape.silu(tape.add(tape.matmul(tfeat, ids.time_w1), ids.time_b1));
        int time_vec = tape.add(tape.matmul(th, ids.time_w2), ids.time_b2);

        int x = tape.add(tape.add_row(tape.matmul(z_id, ids.token_in), ids.token_bias),
                         ids.pos_emb);
        x = tape.add_row(x, time_vec);

        int mask_id = -1;
        if (cond_mask) mask_id = tape.input(*cond_mask);

        for (int b = 0; b < cfg_.block_count; ++b) {
            const BlockIds& blk = ids.blocks[b];

            int n1 = tape.rmsnorm(x, blk.self_norm);
            int q = tape.matmul(n1, blk.self_wq);
            int k = tape.matmul(n1, blk.self_wk);
            int v = tape.matmul(n1, blk.self_wv);
            std::vector<int> heads;
            for (int h = 0; h < H; ++h) {
                int qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
                int kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
                int vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
                int logits = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_scale);
                int probs = tape.softmax_rows(logits);
                heads.push_back(tape.matmul(probs, vh));
            }
            x = tape.add(x, tape.matmul(tape.concat_cols(heads), blk.self_wo));

            int n2 = tape.rmsnorm(x, blk.cross_norm);
            int cq = tape.matmul(n2, blk.cross_wq);
            int ck = tape.matmul(cond_id, blk.cross_wk);
            int cv = tape.matmul(cond_id, blk.cross_wv);
            std::vector<int> cheads;
            for (int h = 0; h < H; ++h) {
                int qh = tape.slice_cols(cq, h * dh, (h + 1) * dh);
                int kh = tape.slice_cols(ck, h * dh, (h + 1) * dh);
                int vh = tape.slice_cols(cv, h * dh, (h + 1) * dh);
                int logits = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_scale);
                if (mask_id >= 0) logits = tape.add_row(logits, mask_id);
                int probs = tape.softmax_rows(logits);
                if (hooks && hooks->recorder && hooks->blocks->count(b)) {
                    hooks->recorder->records.push_back(
                        {b, h, hooks->step, tape.value(probs), *hooks->col_segments});
                }
                cheads.push_back(tape.matmul(probs, vh));
            }
            x = tape.add(x, tape.matmul(tape.concat_cols(cheads), blk.cross_wo));

            int n3 = tape.rmsnorm(x, blk.ffn_norm);
            int f = tape.silu(tape.add_row(tape.matmul(n3, blk.ffn_w1), blk.ffn_b1));
            f = tape.add_row(tape.matmul(f, blk.ffn_w2), blk.ffn_b2);
            x = tape.add(x, f);
        }
        int out = tape.rmsnorm(x, ids.final_norm);
        return tape.add_row(tape.matmul(out, ids.out_proj), ids.out_bias);
    }

    /// Plain (no-grad) velocity evaluation used by the sampler.
    Matrix velocity(const Matrix& z_tokens, double t, const Matrix& cond_rows,
                    const Matrix* cond_mask, const std::vector<BundleSegment>* col_segments,
                    int step) const {
        Tape tape;
        ParamIds ids = input_params(tape);
        int z_id = tape.input(z_tokens);
        int cond_id = tape.input(cond_rows);
        HookSink sink;
        HookSink* sink_ptr = nullptr;
        if (recorder_ && !hooked_blocks_.empty() && col_segments && step >= 0) {
            sink.blocks = &hooked_blocks_;
            sink.recorder = recorder_.get();
            sink.col_segments = col_segments;
            sink.step = step;
            sink_ptr = &sink;
        }
        const int v = forward_velocity(tape, ids, z_id, t, cond_id, cond_mask, sink_ptr);
        return tape.value(v);
    }

    int example_loss(Tape& tape, const ParamIds& ids, const DitTrainExample& ex,
                     uint64_t step_index) const {
        if (ex.bundle.length() == 0) fail(ErrorKind::conditioning, "empty conditioning bundle");
        if (ex.bundle.rows.cols() != cfg_.model_dim)
            fail(ErrorKind::dimension, "bundle dim does not match generator dim");
        const LatentGrid z0 = encode_image_to_latent(ex.target, cfg_.grid_h, cfg_.grid_w,
                                                     cfg_.channels);
        const auto [t, eps] = train_noise(cfg_, ex, step_index);

        Matrix zt(z0.tokens.rows(), z0.tokens.cols());
        Matrix v_target(z0.tokens.rows(), z0.tokens.cols());
        for (size_t i = 0; i < zt.size(); ++i) {
            zt.data()[i] = (1.0 - t) * z0.tokens.data()[i] + t * eps.data()[i];
            v_target.data()[i] = eps.data()[i] - z0.tokens.data()[i];
        }

        Matrix cond_mask(1, ex.bundle.length());
        for (int j = 0; j < ex.bundle.length(); ++j)
            cond_mask.at(0, j) =
                ex.bundle.row_segments[j] == BundleSegment::pad ? detail::kMaskLogit : 0.0;

        int z_id = tape.input(zt);
        int cond_id = tape.input(ex.bundle.rows);
        int pred = forward_velocity(tape, ids, z_id, t, cond_id, &cond_mask, nullptr);
        int diff = tape.sub(pred, tape.input(v_target));
        return tape.mean_all(tape.mul(diff, diff));
    }

    void adam_update(const std::vector<Matrix>& grads, double lr) {
        auto params = named_params();
        if (adam_m_.empty()) {
            for (auto& [name, m] : params) {
                adam_m_.emplace_back(m->rows(), m->cols());
                adam_v_.emplace_back(m->rows(), m->cols());
            }
        }
        ++adam_t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, adam_t_);
        const double bc2 = 1.0 - std::pow(b2, adam_t_);
        for (size_t p = 0; p < params.size(); ++p) {
            Matrix& w = *params[p].second;
            for (size_t i = 0; i < w.size(); ++i) {
                const double g = grads[p].data()[i];
                adam_m_[p].data()[i] = b1 * adam_m_[p].data()[i] + (1.0 - b1) * g;
                adam_v_[p].data()[i] = b2 * adam_v_[p].data()[i] + (1.0 - b2) * g * g;
                const double mhat = adam_m_[p].data()[i] / bc1;
                const double vhat = adam_v_[p].data()[i] / bc2;
                w.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    DitConfig cfg_;
    Matrix token_in_, token_bias_, pos_emb_;
    Matrix time_w1_, time_b1_, time_w2_, time_b2_;
    std::vector<Block> blocks_;
    Matrix final_norm_, out_proj_, out_bias_, null_cond_;

    std::set<int> hooked_blocks_;
    std::shared_ptr<AttentionRecorder> recorder_;
    uint64_t step_counter_ = 0;
    std::vector<Matrix> adam_m_, adam_v_;
    int adam_t_ = 0;
};

}  // namespace v2v
