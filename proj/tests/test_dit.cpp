#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "v2v/dit.hpp"
#include "v2v/tensor_io.hpp"

using namespace v2v;

namespace {

ConditioningBundle tiny_bundle(int rows, int dim, uint64_t seed, int reasoning = 0) {
    ConditioningBundle b;
    b.rows = Matrix(rows, dim);
    GaussianRng rng(seed);
    for (double& v : b.rows.data()) v = rng.normal();
    b.image_length = rows - reasoning;
    b.reasoning_length = reasoning;
    b.row_segments.assign(size_t(rows - reasoning), BundleSegment::image);
    b.row_segments.insert(b.row_segments.end(), size_t(reasoning), BundleSegment::reasoning);
    b.source_positions.assign(size_t(rows), 0);
    return b;
}

RasterImage flat_target(const DitConfig& cfg, Rgb c) {
    return RasterImage(cfg.grid_w * 8, cfg.grid_h * 8, c);
}

uint64_t params_hash(DitModel& m) {
    uint64_t h = 0;
    for (auto& [name, mat] : m.named_params()) h ^= splitmix64(matrix_hash(*mat) ^ fnv1a64(name));
    return h;
}

}  // namespace

TEST_CASE("sampling yields a deterministic image of the configured size") {
    DitConfig cfg;
    DitModel dit(cfg);
    const ConditioningBundle b = tiny_bundle(12, cfg.model_dim, 3);
    const SampleResult r1 = dit.sample(b, 6, 2.0, 11);
    const SampleResult r2 = dit.sample(b, 6, 2.0, 11);
    REQUIRE(r1.image.width() == cfg.grid_w * 8);
    REQUIRE(r1.image.height() == cfg.grid_h * 8);
    REQUIRE(r1.image.pixels() == r2.image.pixels());
    REQUIRE(matrix_hash(r1.latent.tokens) == matrix_hash(r2.latent.tokens));

    const SampleResult r3 = dit.sample(b, 6, 2.0, 12);
    REQUIRE(r1.image.pixels() != r3.image.pixels());
}

TEST_CASE("sampling validates bundle shape and content") {
    DitConfig cfg;
    DitModel dit(cfg);
    try {
        dit.sample(tiny_bundle(5, cfg.model_dim + 1, 3), 4, 1.0, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        REQUIRE(e.kind() == ErrorKind::dimension);
    }
    try {
        ConditioningBundle empty;
        dit.sample(empty, 4, 1.0, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        REQUIRE(e.kind() == ErrorKind::conditioning);
    }
    ConditioningBundle pads = tiny_bundle(4, cfg.model_dim, 3);
    pads.row_segments.assign(4, BundleSegment::pad);
    try {
        dit.sample(pads, 4, 1.0, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        REQUIRE(e.kind() == ErrorKind::conditioning);
        REQUIRE(std::string(e.what()).find("pad") != std::string::npos);
    }
    REQUIRE_THROWS_AS(dit.sample(tiny_bundle(4, cfg.model_dim, 3), 0, 1.0, 1), Error);
}

TEST_CASE("guidance branches match a hand-rolled euler loop") {
    DitConfig cfg;
    DitModel dit(cfg);
    const ConditioningBundle b = tiny_bundle(10, cfg.model_dim, 5);
    const int steps = 5;
    const uint64_t seed = 21;
    const int T = cfg.grid_h * cfg.grid_w;

    auto init_tokens = [&] {
        Matrix z(T, cfg.channels);
        GaussianRng rng(derive_seed(seed, "dit.init-noise"));
        for (double& v : z.data()) v = rng.normal();
        return z;
    };

    auto euler = [&](double scale) {
        Matrix z = init_tokens();
        const double dt = 1.0 / steps;
        for (int k = 0; k < steps; ++k) {
            const double t = 1.0 - double(k) * dt;
            Matrix v;
            if (scale == 0.0) {
                v = dit.velocity_eval_null(z, t);
            } else if (scale == 1.0) {
                v = dit.velocity_eval(z, t, b);
            } else {
                const Matrix u = dit.velocity_eval_null(z, t);
                const Matrix c = dit.velocity_eval(z, t, b);
                v = Matrix(u.rows(), u.cols());
                for (size_t i = 0; i < v.size(); ++i)
                    v.data()[i] = u.data()[i] + scale * (c.data()[i] - u.data()[i]);
            }
            for (size_t i = 0; i < z.size(); ++i) z.data()[i] -= dt * v.data()[i];
        }
        return z;
    };

    for (double scale : {0.0, 1.0, 4.0}) {
        const SampleResult got = dit.sample(b, steps, scale, seed);
        const Matrix want = euler(scale);
        REQUIRE(matrix_hash(got.latent.tokens) == matrix_hash(want));
    }

    // the null branch ignores the bundle entirely
    const SampleResult n1 = dit.sample(tiny_bundle(10, cfg.model_dim, 5), steps, 0.0, seed);
    const SampleResult n2 = dit.sample(tiny_bundle(10, cfg.model_dim, 99), steps, 0.0, seed);
    REQUIRE(n1.image.pixels() == n2.image.pixels());
}

TEST_CASE("training noise is content and step derived") {
    DitConfig cfg;
    const DitTrainExample ex{tiny_bundle(8, cfg.model_dim, 3), flat_target(cfg, Rgb{10, 60, 220})};
    const auto [t1, e1] = DitModel::train_noise(cfg, ex, 5);
    const auto [t2, e2] = DitModel::train_noise(cfg, ex, 5);
    REQUIRE(t1 == t2);
    REQUIRE(matrix_hash(e1) == matrix_hash(e2));
    REQUIRE(t1 > 0.0);
    REQUIRE(t1 < 1.0);
    REQUIRE(e1.rows() == cfg.grid_h * cfg.grid_w);
    REQUIRE(e1.cols() == cfg.channels);

    const auto [t3, e3] = DitModel::train_noise(cfg, ex, 6);
    REQUIRE((t1 != t3 || matrix_hash(e1) != matrix_hash(e3)));

    const DitTrainExample other{tiny_bundle(8, cfg.model_dim, 4),
                                flat_target(cfg, Rgb{10, 60, 220})};
    const auto [t4, e4] = DitModel::train_noise(cfg, other, 5);
    REQUIRE((t1 != t4 || matrix_hash(e1) != matrix_hash(e4)));
}

TEST_CASE("train_step at zero learning rate is a bitwise no-op") {
    DitConfig cfg;
    DitModel dit(cfg);
    const std::vector<DitTrainExample> batch = {
        {tiny_bundle(8, cfg.model_dim, 3), flat_target(cfg, Rgb{200, 40, 10})}};
    const uint64_t before = params_hash(dit);
    const double loss = dit.train_step(batch, 0.0);
    REQUIRE(std::isfinite(loss));
    REQUIRE(loss > 0.0);
    REQUIRE(params_hash(dit) == before);
}

TEST_CASE("training reduces the regression loss on a small batch") {
    DitConfig cfg;
    cfg.seed = 5;
    DitModel dit(cfg);
    const std::vector<DitTrainExample> batch = {
        {tiny_bundle(8, cfg.model_dim, 31), flat_target(cfg, Rgb{230, 30, 30})},
        {tiny_bundle(8, cfg.model_dim, 32), flat_target(cfg, Rgb{30, 230, 30})}};
    double first = 0.0, last = 0.0;
    for (int s = 0; s < 80; ++s) {
        const double loss = dit.train_step(batch, 1e-3);
        if (s == 0) first = loss;
        last = loss;
        REQUIRE(std::isfinite(loss));
    }
    REQUIRE(last < first);
}

TEST_CASE("identical examples in a batch receive identical noise") {
    DitConfig cfg;
    DitModel dit(cfg);
    const DitTrainExample ex{tiny_bundle(8, cfg.model_dim, 3), flat_target(cfg, Rgb{9, 9, 9})};
    // duplicated example: gradient equals twice the single-example gradient,
    // which only holds when both copies draw the same (t, eps)
    DitModel a(cfg), b(cfg);
    a.train_step({ex, ex}, 1e-3);
    b.train_step({ex}, 1e-3);
    const auto pa = a.named_params();
    const auto pb = b.named_params();
    for (size_t i = 0; i < pa.size(); ++i)
        REQUIRE(max_rel_diff(*pa[i].second, *pb[i].second) < 1e-12);
}

TEST_CASE("analytic gradients match finite differences") {
    DitConfig cfg;
    cfg.block_count = 1;
    cfg.model_dim = 32;
    cfg.head_count = 4;
    DitModel dit(cfg);
    const std::vector<DitTrainExample> batch = {
        {tiny_bundle(6, cfg.model_dim, 3, 2), flat_target(cfg, Rgb{120, 80, 200})}};
    const GradCheckReport rep = dit.grad_check(batch, 3, 1e-5);
    INFO("max rel error " << rep.max_rel_error);
    REQUIRE(rep.max_rel_error < 1e-4);
    REQUIRE_FALSE(rep.per_tensor.empty());
}

TEST_CASE("attention hooks record only the requested blocks") {
    DitConfig cfg;
    DitModel dit(cfg);
    auto rec = dit.attention_hook({1});
    const ConditioningBundle b = tiny_bundle(9, cfg.model_dim, 3, 4);
    dit.sample(b, 3, 4.0, 2);
    REQUIRE_FALSE(rec->records.empty());
    for (const AttentionRecord& r : rec->records) {
        REQUIRE(r.block == 1);
        REQUIRE(r.head >= 0);
        REQUIRE(r.head < cfg.head_count);
        REQUIRE(r.step >= 0);
        REQUIRE(r.step < 3);
        REQUIRE(r.probs.rows() == cfg.grid_h * cfg.grid_w);
        REQUIRE(r.probs.cols() == 9);
        REQUIRE(r.col_segments.size() == 9);
        for (int i = 0; i < r.probs.rows(); ++i) {
            double total = 0.0;
            for (int j = 0; j < r.probs.cols(); ++j) {
                REQUIRE(r.probs.at(i, j) >= 0.0);
                total += r.probs.at(i, j);
            }
            REQUIRE(total == Catch::Approx(1.0).margin(1e-9));
        }
    }
    // heads x steps for the single hooked block
    REQUIRE(rec->records.size() == size_t(cfg.head_count) * 3);

    rec->clear();
    dit.sample(b, 3, 0.0, 2);  // null branch never touches cross attention
    REQUIRE(rec->records.empty());

    REQUIRE_THROWS_AS(dit.attention_hook({7}), Error);
    REQUIRE_THROWS_AS(dit.attention_hook({-1}), Error);
}

TEST_CASE("parameters round trip through tensor files") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "v2v_dit_params.tens").string();
    DitConfig cfg;
    DitModel a(cfg);
    // touch the weights so the file differs from a fresh init
    a.train_step({{tiny_bundle(8, cfg.model_dim, 3), flat_target(cfg, Rgb{1, 2, 3})}}, 1e-3);
    save_tensors(path, cfg.seed, a.named_params());

    DitModel b(cfg);
    REQUIRE(params_hash(b) != params_hash(a));
    load_tensors_into(path, b.named_params());
    REQUIRE(params_hash(b) == params_hash(a));

    const ConditioningBundle bun = tiny_bundle(7, cfg.model_dim, 9);
    REQUIRE(a.sample(bun, 4, 1.5, 3).image.pixels() == b.sample(bun, 4, 1.5, 3).image.pixels());
    std::remove(path.c_str());
}

TEST_CASE("latent decode maps values to pixel blocks") {
    LatentGrid z{2, 2, 3, Matrix(4, 3)};
    z.tokens.at(0, 0) = 1.0;   // full red in cell 0
    z.tokens.at(0, 1) = -1.0;
    z.tokens.at(0, 2) = -1.0;
    z.tokens.at(3, 0) = 0.0;   // mid gray-ish in cell 3
    z.tokens.at(3, 1) = 0.0;
    z.tokens.at(3, 2) = 3.0;   // clamps to 255
    const RasterImage img = decode_latent_to_image(z);
    REQUIRE(img.width() == 16);
    REQUIRE(img.at(0, 0).r == 255);
    REQUIRE(img.at(0, 0).g == 0);
    REQUIRE(img.at(7, 7).r == 255);
    REQUIRE(img.at(8, 8).r == 128);
    REQUIRE(img.at(15, 15).b == 255);
}

TEST_CASE("model construction validates its config") {
    DitConfig bad;
    bad.model_dim = 30;
    bad.head_count = 4;
    REQUIRE_THROWS_AS(DitModel(bad), Error);
    DitConfig neg;
    neg.block_count = 0;
    REQUIRE_THROWS_AS(DitModel(neg), Error);
}
