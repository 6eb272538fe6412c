#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "lotus/train.hpp"
#include "lotus/vit.hpp"

using namespace lotus;

namespace {

ViTConfig tiny_cfg() {
    ViTConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.channels = 3;
    cfg.dim = 32;
    cfg.depth = 2;
    cfg.heads = 4;
    cfg.mlp_ratio = 2.0;
    cfg.num_classes = 4;
    return cfg;
}

std::vector<int> all_patches(const ViTConfig& cfg) {
    std::vector<int> v(static_cast<size_t>(cfg.num_patches()));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

// test-side inverse permutation: reconstructs the image from patch rows
template <class T>
std::vector<T> unpatchify_oracle(const std::vector<T>& patches, int channels, int height, int width,
                                 int ps) {
    const int gy = height / ps, gx = width / ps;
    std::vector<T> img(static_cast<size_t>(channels) * height * width);
    size_t r = 0;
    for (int pr = 0; pr < gy; ++pr)
        for (int pc = 0; pc < gx; ++pc)
            for (int c = 0; c < channels; ++c)
                for (int y = 0; y < ps; ++y)
                    for (int x = 0; x < ps; ++x)
                        img[(static_cast<size_t>(c) * height + pr * ps + y) * width + pc * ps + x] =
                            patches[r++];
    return img;
}

}  // namespace

TEST_CASE("patchify index arithmetic on a 4x4 single-channel image") {
    std::vector<double> img(16);
    std::iota(img.begin(), img.end(), 0.0);
    auto p = patchify(img.data(), 1, 4, 4, 2);
    CHECK(std::vector<double>(p.begin(), p.begin() + 4) == std::vector<double>{0, 1, 4, 5});
    CHECK(std::vector<double>(p.begin() + 12, p.begin() + 16) == std::vector<double>{10, 11, 14, 15});
}

TEST_CASE("patchify with patch_size == image_size flattens to one patch") {
    std::vector<double> img(2 * 3 * 3);
    std::iota(img.begin(), img.end(), 1.0);
    auto p = patchify(img.data(), 2, 3, 3, 3);
    CHECK(p == img);
}

TEST_CASE("patchify round-trips against the inverse-permutation oracle") {
    Rng rng(5);
    std::vector<float> img(3 * 8 * 8);
    for (auto& v : img) v = static_cast<float>(rng.uniform());
    auto p = patchify(img.data(), 3, 8, 8, 4);
    CHECK(unpatchify_oracle(p, 3, 8, 8, 4) == img);

    Tensor<float> t({3, 8, 8}, img);
    CHECK(patchify(t, 4)->shape == std::vector<int>{4, 48});
    CHECK_THROWS_AS(patchify(t, 5), InputError);
}

TEST_CASE("forward shape contract and capture shapes") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(11);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(2, 16, 4, 3, 4, 0.1, 77);
    const auto pc = PatchCache<float>::build(ds, cfg);

    Tape<float> tape;
    ForwardOptions opts;
    opts.capture = true;
    auto res = forward_batch(tape, params, cfg, pc, {0, 1}, nullptr, opts);
    CHECK(res.logits->shape == std::vector<int>{2, 4});
    REQUIRE(res.captures.size() == 2);
    for (const auto& cap : res.captures) {
        REQUIRE(cap.maps.size() == 2);
        for (const auto& heads : cap.maps) {
            REQUIRE(heads.size() == 4);
            for (const auto& m : heads) CHECK(m.size() == 17u * 17u);
        }
    }
}

TEST_CASE("captured attention rows sum to one") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(13);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(3, 16, 4, 3, 4, 0.2, 99);
    const auto pc = PatchCache<float>::build(ds, cfg);

    Tape<float> tape;
    tape.set_grad_enabled(false);
    ForwardOptions opts;
    opts.capture = true;
    auto res = forward_batch(tape, params, cfg, pc, {0, 1, 2}, nullptr, opts);
    for (const auto& cap : res.captures)
        for (const auto& heads : cap.maps)
            for (const auto& m : heads)
                for (int i = 0; i < cap.seq_len; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < cap.seq_len; ++j) {
                        const float v = m[static_cast<size_t>(i) * cap.seq_len + j];
                        CHECK(v >= 0.0f);
                        CHECK(v <= 1.0f);
                        s += v;
                    }
                    CHECK(std::fabs(s - 1.0) < 1e-5);
                }
}

TEST_CASE("identity patch subset gives bit-identical logits") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(17);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(2, 16, 4, 3, 4, 0.1, 31);
    const auto pc = PatchCache<float>::build(ds, cfg);

    Tape<float> t1, t2;
    auto full = forward_batch(t1, params, cfg, pc, {0, 1}, nullptr);
    std::vector<std::vector<int>> kept{all_patches(cfg), all_patches(cfg)};
    auto subset = forward_batch(t2, params, cfg, pc, {0, 1}, &kept);
    CHECK(full.logits->data == subset.logits->data);
}

TEST_CASE("capture on/off produces bit-identical logits") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(19);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(2, 16, 4, 3, 4, 0.15, 41);
    const auto pc = PatchCache<float>::build(ds, cfg);

    Tape<float> t1, t2;
    ForwardOptions with_cap;
    with_cap.capture = true;
    auto a = forward_batch(t1, params, cfg, pc, {0, 1}, nullptr, with_cap);
    auto b = forward_batch(t2, params, cfg, pc, {0, 1}, nullptr);
    CHECK(a.logits->data == b.logits->data);
}

TEST_CASE("permuting retained patch order leaves logits unchanged within 1e-5") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(23);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(1, 16, 4, 3, 4, 0.1, 53);
    const auto pc = PatchCache<float>::build(ds, cfg);

    std::vector<int> order{3, 7, 1, 11, 5, 9, 0, 14, 2, 8, 15, 4};
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());

    Tape<float> t1, t2;
    std::vector<std::vector<int>> k1{sorted}, k2{order};
    auto a = forward_batch(t1, params, cfg, pc, {0}, &k1);
    auto b = forward_batch(t2, params, cfg, pc, {0}, &k2);
    for (int j = 0; j < cfg.num_classes; ++j)
        CHECK(std::fabs(a.logits->data[j] - b.logits->data[j]) < 1e-5);
}

TEST_CASE("forward rejects unknown positional indices") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(29);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(1, 16, 4, 3, 4, 0.0, 3);
    const auto pc = PatchCache<float>::build(ds, cfg);
    Tape<float> tape;
    std::vector<std::vector<int>> kept{{0, 16}};
    CHECK_THROWS_AS(forward_batch(tape, params, cfg, pc, {0}, &kept), InputError);
}

TEST_CASE("evaluate scores 1.0 when labels are forced to the model argmax") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(31);
    auto params = ViTParams<float>::init(cfg, rng);
    ImageDataset ds = gen_synthetic(24, 16, 4, 3, 4, 0.3, 61);
    const auto pc = PatchCache<float>::build(ds, cfg);

    Tape<float> tape;
    tape.set_grad_enabled(false);
    std::vector<int> idx(24);
    std::iota(idx.begin(), idx.end(), 0);
    auto res = forward_batch(tape, params, cfg, pc, idx, nullptr);
    for (int i = 0; i < 24; ++i)
        ds.labels[static_cast<size_t>(i)] =
            argmax_row(res.logits->data.data() + static_cast<size_t>(i) * 4, 4);

    CHECK(evaluate(params, cfg, ds) == 1.0);
}

TEST_CASE("random-init evaluate sits in the chance band over 3 seeds") {
    const ViTConfig cfg = tiny_cfg();
    const ImageDataset ds = gen_synthetic(240, 16, 4, 3, 4, 0.1, 71);
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        auto params = ViTParams<float>::init(cfg, rng);
        const double acc = evaluate(params, cfg, ds);
        CHECK(acc >= 0.10);
        CHECK(acc <= 0.45);
    }
}

TEST_CASE("single-example dataset evaluates to exactly 0 or 1") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(37);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(1, 16, 4, 3, 4, 0.1, 83);
    const double acc = evaluate(params, cfg, ds);
    CHECK((acc == 0.0 || acc == 1.0));

    ImageDataset empty;
    CHECK_THROWS_AS(evaluate(params, cfg, empty), UsageError);
}

TEST_CASE("argmax ties break toward the lowest class index") {
    const float row[4] = {0.5f, 0.5f, 0.5f, 0.2f};
    CHECK(argmax_row(row, 4) == 0);
    const float row2[3] = {-1.0f, 2.0f, 2.0f};
    CHECK(argmax_row(row2, 3) == 1);
}

TEST_CASE("positional index audit: kept patch k uses pos row k+1") {
    const std::vector<int> kept{2, 5, 9};
    CHECK(position_indices(kept) == std::vector<int>{0, 3, 6, 10});
    CHECK(position_indices({}) == std::vector<int>{0});
}

TEST_CASE("one training step strictly decreases the batch loss over 3 seeds") {
    const ViTConfig cfg = tiny_cfg();
    for (uint64_t seed : {5ull, 6ull, 7ull}) {
        Rng rng(seed);
        auto params = ViTParams<float>::init(cfg, rng);
        const ImageDataset ds = gen_synthetic(16, 16, 4, 3, 4, 0.1, seed * 100 + 1);
        const auto pc = PatchCache<float>::build(ds, cfg);
        std::vector<int> idx(16);
        std::iota(idx.begin(), idx.end(), 0);

        auto batch_loss = [&](const ViTParams<float>& p) {
            Tape<float> t;
            t.set_grad_enabled(false);
            auto r = forward_batch(t, p, cfg, pc, idx, nullptr);
            Tape<float> t2;
            t2.set_grad_enabled(false);
            auto logits = make_tensor<float>(r.logits->shape, r.logits->data);
            return static_cast<double>(t2.cross_entropy(logits, ds.labels)->data[0]);
        };

        const double before = batch_loss(params);
        OptimizerConfig opt;
        opt.lr = 1e-3;
        opt.batch_size = 16;
        Rng train_rng(seed + 1000);
        train_model(params, cfg, ds, nullptr, nullptr, nullptr, 1, opt, train_rng);
        CHECK(batch_loss(params) < before);
    }
}

TEST_CASE("full tiny-ViT gradients match central finite differences (compact run)") {
    ViTConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.channels = 2;
    cfg.dim = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.mlp_ratio = 2.0;
    cfg.num_classes = 3;

    Rng rng(41);
    auto params = ViTParams<double>::init(cfg, rng);
    ImageDataset ds;
    ds.channels = 2;
    ds.height = 8;
    ds.width = 8;
    Rng px(43);
    for (int i = 0; i < 2; ++i) {
        ds.labels.push_back(i % 3);
        ds.blob_patch.push_back(-1);
        for (int p = 0; p < ds.image_numel(); ++p)
            ds.pixels.push_back(static_cast<float>(px.uniform()));
    }
    const auto pc = PatchCache<double>::build(ds, cfg);

    auto loss_value = [&]() {
        Tape<double> t;
        t.set_grad_enabled(false);
        auto r = forward_batch(t, params, cfg, pc, {0, 1}, nullptr);
        Tape<double> t2;
        t2.set_grad_enabled(false);
        auto logits = make_tensor<double>(r.logits->shape, r.logits->data);
        return t2.cross_entropy(logits, ds.labels)->data[0];
    };

    Tape<double> tape;
    auto res = forward_batch(tape, params, cfg, pc, {0, 1}, nullptr);
    auto loss = tape.cross_entropy(res.logits, ds.labels);
    tape.backward(loss);

    const double h = 1e-5;
    Rng coord_rng(47);
    for (const auto& [name, t] : params.tensors) {
        const int checks = std::min<int64_t>(5, t->numel());
        for (int c = 0; c < checks; ++c) {
            const size_t i = static_cast<size_t>(coord_rng.below(static_cast<uint64_t>(t->numel())));
            const double keep = t->data[i];
            t->data[i] = keep + h;
            const double lp = loss_value();
            t->data[i] = keep - h;
            const double lm = loss_value();
            t->data[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            const double an = t->grad[i];
            const double tol = std::max(1e-6 * std::max(std::fabs(fd), std::fabs(an)), 1e-8);
            INFO(name, " coordinate ", i);
            CHECK(std::fabs(fd - an) <= tol);
        }
    }
}

TEST_CASE("same seed yields bit-identical init and logits") {
    const ViTConfig cfg = tiny_cfg();
    Rng r1(91), r2(91);
    auto p1 = ViTParams<float>::init(cfg, r1);
    auto p2 = ViTParams<float>::init(cfg, r2);
    for (const auto& [name, t] : p1.tensors) CHECK(t->data == p2.at(name)->data);

    const ImageDataset ds = gen_synthetic(4, 16, 4, 3, 4, 0.1, 123);
    const auto pc = PatchCache<float>::build(ds, cfg);
    Tape<float> t1, t2;
    auto a = forward_batch(t1, p1, cfg, pc, {0, 1, 2, 3}, nullptr);
    auto b = forward_batch(t2, p2, cfg, pc, {0, 1, 2, 3}, nullptr);
    CHECK(a.logits->data == b.logits->data);
}

TEST_CASE("checkpoint bridge round-trips params bit-exactly") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(97);
    auto params = ViTParams<float>::init(cfg, rng);
    Checkpoint ck;
    checkpoint_add_params(ck, params);
    auto back = params_from_checkpoint<float>(ck, cfg);
    for (const auto& [name, t] : params.tensors) CHECK(t->data == back.at(name)->data);
}
