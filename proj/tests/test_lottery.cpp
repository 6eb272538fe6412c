#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "lotus/lottery.hpp"
#include "lotus/train.hpp"

using namespace lotus;
namespace fs = std::filesystem;

namespace {

ViTConfig tiny_cfg() {
    ViTConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.channels = 3;
    cfg.dim = 32;
    cfg.depth = 2;
    cfg.heads = 4;
    cfg.num_classes = 4;
    return cfg;
}

std::string tmp_path(const std::string& name) {
    fs::create_directories("lottery_test_tmp");
    return (fs::path("lottery_test_tmp") / name).string();
}

AttentionCapture<float> capture_from_rows(const std::vector<std::vector<std::vector<float>>>& cls_rows,
                                          int t) {
    // builds full TxT maps whose row 0 is the given CLS row; other rows uniform
    AttentionCapture<float> cap;
    cap.seq_len = t;
    for (const auto& layer : cls_rows) {
        std::vector<std::vector<float>> heads;
        for (const auto& row : layer) {
            std::vector<float> m(static_cast<size_t>(t) * t, 1.0f / static_cast<float>(t));
            std::copy(row.begin(), row.end(), m.begin());
            heads.push_back(std::move(m));
        }
        cap.maps.push_back(std::move(heads));
    }
    return cap;
}

}  // namespace

TEST_CASE("sink_normalize replaces the CLS entry with the patch mean") {
    const auto out = sink_normalize({0.7, 0.1, 0.12, 0.08});
    CHECK(out[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(out[1] == 0.1);
    CHECK(out[2] == 0.12);
    CHECK(out[3] == 0.08);

    const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
    CHECK(sink_normalize(uniform) == uniform);

    CHECK_THROWS_AS(sink_normalize({1.0}), InputError);
}

TEST_CASE("sink_normalize postcondition: entry 0 equals the recomputed mean exactly") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> row(17);
        for (auto& v : row) v = rng.uniform();
        const auto out = sink_normalize(row);
        double mean = 0.0;
        for (size_t i = 1; i < out.size(); ++i) mean += out[i];
        mean /= static_cast<double>(out.size() - 1);
        CHECK(out[0] == mean);
        // entries 1.. are untouched
        for (size_t i = 1; i < out.size(); ++i) CHECK(out[i] == row[i]);
    }
}

TEST_CASE("sink_normalize preserves patch argsort") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> row(12);
        for (auto& v : row) v = rng.uniform();
        const auto out = sink_normalize(row);
        auto order_of = [](const std::vector<double>& v) {
            std::vector<int> idx(v.size() - 1);
            std::iota(idx.begin(), idx.end(), 1);
            std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
            return idx;
        };
        CHECK(order_of(row) == order_of(out));
    }
}

TEST_CASE("patch_scores single layer single head") {
    const auto cap = capture_from_rows({{{0.7f, 0.1f, 0.12f, 0.08f}}}, 4);
    const auto scores = patch_scores(cap, LotterySpec{});
    REQUIRE(scores.size() == 3);
    CHECK(scores[0] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(scores[1] == doctest::Approx(0.12).epsilon(1e-6));
    CHECK(scores[2] == doctest::Approx(0.08).epsilon(1e-6));
}

TEST_CASE("patch_scores averages heads then sink-normalizes") {
    const std::vector<float> r1{0.6f, 0.2f, 0.1f, 0.1f};
    const std::vector<float> r2{0.4f, 0.1f, 0.3f, 0.2f};
    const auto cap = capture_from_rows({{r1, r2}}, 4);
    const auto scores = patch_scores(cap, LotterySpec{});

    std::vector<double> mean_row(4);
    for (int j = 0; j < 4; ++j) mean_row[j] = (static_cast<double>(r1[j]) + r2[j]) / 2.0;
    const auto expect = sink_normalize(mean_row);
    for (int j = 0; j < 3; ++j) CHECK(scores[j] == doctest::Approx(expect[j + 1]).epsilon(1e-7));
}

TEST_CASE("patch_scores MEAN_ALL averages layers; missing layers rejected") {
    const std::vector<float> l1{0.5f, 0.3f, 0.1f, 0.1f};
    const std::vector<float> l2{0.1f, 0.1f, 0.4f, 0.4f};
    const auto cap = capture_from_rows({{l1}, {l2}}, 4);

    LotterySpec last;
    last.policy = ScorePolicy::Last;
    const auto s_last = patch_scores(cap, last);
    CHECK(s_last[1] == doctest::Approx(0.4).epsilon(1e-6));

    LotterySpec mean;
    mean.policy = ScorePolicy::MeanAll;
    const auto s_mean = patch_scores(cap, mean);
    CHECK(s_mean[0] == doctest::Approx(0.2).epsilon(1e-6));   // (0.3 + 0.1) / 2
    CHECK(s_mean[1] == doctest::Approx(0.25).epsilon(1e-6));  // (0.1 + 0.4) / 2

    AttentionCapture<float> empty;
    CHECK_THROWS_AS(patch_scores(empty, last), UsageError);
}

TEST_CASE("select_patches drops the k lowest with the stated tie rule") {
    CHECK(select_patches({0.3, 0.1, 0.2, 0.4}, 0.25) == std::vector<int>{0, 2, 3});
    CHECK(select_patches({0.3, 0.1, 0.2, 0.4}, 0.0) == std::vector<int>{0, 1, 2, 3});
    CHECK(select_patches({0.5, 0.5, 0.5, 0.5}, 0.5) == std::vector<int>{2, 3});
    CHECK_THROWS_AS(select_patches({0.1, 0.2}, 1.0), InputError);
}

TEST_CASE("count exactness over the X grid on random score vectors") {
    Rng rng(7);
    for (double x = 0.0; x <= 0.751; x += 0.05) {
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> scores(16);
            for (auto& v : scores) v = rng.uniform();
            const auto kept = select_patches(scores, x);
            const int expected_drop = static_cast<int>(floor_count(x, 16));
            CHECK(static_cast<int>(kept.size()) == 16 - expected_drop);
            CHECK(std::is_sorted(kept.begin(), kept.end()));
            // indices unique and in range
            for (size_t i = 1; i < kept.size(); ++i) CHECK(kept[i] > kept[i - 1]);
            if (!kept.empty()) {
                CHECK(kept.front() >= 0);
                CHECK(kept.back() < 16);
            }
        }
    }
}

TEST_CASE("selection is invariant to positive scaling of scores") {
    Rng rng(11);
    std::vector<double> scores(16);
    for (auto& v : scores) v = 0.1 + rng.uniform();
    const auto base = select_patches(scores, 0.25);
    for (double c : {0.5, 2.0, 3.0, 1024.0}) {
        std::vector<double> scaled(scores);
        for (auto& v : scaled) v *= c;
        CHECK(select_patches(scaled, 0.25) == base);
    }
}

TEST_CASE("build_lottery_dataset keeps a uniform count per image") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(13);
    const auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(20, 16, 4, 3, 4, 0.1, 17);

    LotterySpec spec;
    spec.drop_fraction = 0.10;
    const LotteryDataset lds = build_lottery_dataset(params, cfg, ds, spec);
    CHECK(lds.num_kept == 15);  // floor(0.1 * 16) = 1 dropped
    // kept-count histogram is a single spike
    for (const auto& ks : lds.kept) CHECK(static_cast<int>(ks.size()) == 15);
    for (int i = 0; i < lds.size(); ++i) CHECK(lds.labels[static_cast<size_t>(i)] == ds.labels[static_cast<size_t>(i)]);

    spec.drop_fraction = 0.25;
    const LotteryDataset lds2 = build_lottery_dataset(params, cfg, ds, spec);
    CHECK(lds2.num_kept == 12);
}

TEST_CASE("drop 0 lottery fine-tune is bit-identical to plain training") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(19);
    const auto scorer = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(24, 16, 4, 3, 4, 0.1, 23);
    const ImageDataset eval_ds = gen_synthetic(12, 16, 4, 3, 4, 0.1, 29);

    LotterySpec spec;
    spec.drop_fraction = 0.0;
    const LotteryDataset lds = build_lottery_dataset(scorer, cfg, ds, spec);
    CHECK(lds.num_kept == 16);

    Rng init1(31), init2(31);
    auto p1 = ViTParams<float>::init(cfg, init1);
    auto p2 = ViTParams<float>::init(cfg, init2);
    OptimizerConfig opt;
    opt.batch_size = 8;

    Rng t1(37), t2(37);
    const TrainResult r1 = finetune_on_lottery(p1, cfg, lds, ds, &eval_ds, 2, opt, t1);
    const TrainResult r2 = train_model(p2, cfg, ds, nullptr, &eval_ds, nullptr, 2, opt, t2);

    REQUIRE(r1.epochs.size() == r2.epochs.size());
    for (size_t i = 0; i < r1.epochs.size(); ++i) {
        CHECK(r1.epochs[i].train_loss == r2.epochs[i].train_loss);
        CHECK(r1.epochs[i].train_acc == r2.epochs[i].train_acc);
        CHECK(r1.epochs[i].eval_acc == r2.epochs[i].eval_acc);
    }
    for (const auto& [name, t] : p1.tensors) CHECK(t->data == p2.at(name)->data);
}

TEST_CASE("lr=0 fine-tuning is a no-op that still emits metrics") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(41);
    auto params = ViTParams<float>::init(cfg, rng);
    const auto before = params.clone();
    const ImageDataset ds = gen_synthetic(12, 16, 4, 3, 4, 0.1, 43);

    LotterySpec spec;
    spec.drop_fraction = 0.25;
    const LotteryDataset lds = build_lottery_dataset(params, cfg, ds, spec);

    OptimizerConfig opt;
    opt.lr = 0.0;
    Rng t(47);
    const TrainResult r = finetune_on_lottery(params, cfg, lds, ds, nullptr, 1, opt, t);
    REQUIRE(r.epochs.size() == 1);
    CHECK(r.epochs[0].train_loss > 0.0);
    for (const auto& [name, tns] : params.tensors) CHECK(tns->data == before.at(name)->data);
}

TEST_CASE("fine-tune preconditions") {
    const ViTConfig cfg = tiny_cfg();
    Rng rng(53);
    auto params = ViTParams<float>::init(cfg, rng);
    const ImageDataset ds = gen_synthetic(4, 16, 4, 3, 4, 0.1, 59);

    LotteryDataset lds;
    lds.num_patches = cfg.num_patches();
    lds.num_kept = 2;
    lds.labels = {0, 1, 2, 3};
    lds.kept = {{0, 1}, {2, 3}, {4, 5}, {6}};  // ragged
    OptimizerConfig opt;
    Rng t(61);
    CHECK_THROWS_AS(finetune_on_lottery(params, cfg, lds, ds, nullptr, 1, opt, t), UsageError);

    lds.kept = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
    CHECK_THROWS_AS(finetune_on_lottery(params, cfg, lds, ds, nullptr, 0, opt, t), UsageError);
}

TEST_CASE("lotd round trip is bit-exact") {
    LotteryDataset lds;
    lds.num_patches = 16;
    lds.num_kept = 3;
    lds.labels = {7, 0, 255};
    lds.kept = {{0, 5, 15}, {1, 2, 3}, {8, 9, 10}};

    const std::string path = tmp_path("roundtrip.lotd");
    save_lottery(path, lds);
    const LotteryDataset back = load_lottery(path);
    CHECK(back.num_kept == 3);
    CHECK(back.labels == lds.labels);
    CHECK(back.kept == lds.kept);

    // byte-level layout spot checks
    std::ifstream in(path, std::ios::binary);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() == 14u + 3u * (1u + 3u * 2u));
    CHECK(bytes[0] == 'L');
    CHECK(bytes[3] == 'D');
    CHECK(bytes[12] == 3);   // num_kept lo
    CHECK(bytes[14] == 7);   // first label
    CHECK(bytes[15] == 0);   // index 0 lo byte
    CHECK(bytes[17] == 5);   // index 5 lo byte
}

TEST_CASE("lotd loader rejects malformed files") {
    const std::string path = tmp_path("bad.lotd");
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_lottery(path), FormatError);

    LotteryDataset lds;
    lds.num_patches = 16;
    lds.num_kept = 2;
    lds.labels = {1};
    lds.kept = {{3, 9}};
    const std::string good = tmp_path("trunc.lotd");
    save_lottery(good, lds);
    // chop the final byte
    std::vector<uint8_t> bytes;
    {
        std::ifstream in(good, std::ios::binary);
        bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    {
        std::ofstream out(good, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size() - 1));
    }
    CHECK_THROWS_AS(load_lottery(good), FormatError);
}

TEST_CASE("blob patch ranks in the top 4 scores after baseline training") {
    const ViTConfig cfg = tiny_cfg();
    const ImageDataset train = gen_synthetic(160, 16, 4, 3, 4, 0.1, 301);
    const ImageDataset test = gen_synthetic(40, 16, 4, 3, 4, 0.1, 302);

    Rng init(303);
    auto params = ViTParams<float>::init(cfg, init);
    OptimizerConfig opt;
    opt.lr = 3e-3;
    opt.batch_size = 16;
    Rng t(304);
    train_model(params, cfg, train, nullptr, nullptr, nullptr, 6, opt, t);
    REQUIRE(evaluate(params, cfg, train) > 0.9);  // scorer actually learned the task

    const auto pc = PatchCache<float>::build(test, cfg);
    int hits = 0;
    for (int i = 0; i < test.size(); ++i) {
        Tape<float> tape;
        tape.set_grad_enabled(false);
        ForwardOptions opts;
        opts.capture = true;
        auto fwd = forward_batch(tape, params, cfg, pc, {i}, nullptr, opts);
        const auto scores = patch_scores(fwd.captures[0], LotterySpec{});
        std::vector<int> order(scores.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
        for (int r = 0; r < 4; ++r)
            if (order[static_cast<size_t>(r)] == test.blob_patch[static_cast<size_t>(i)]) {
                ++hits;
                break;
            }
    }
    CHECK(static_cast<double>(hits) / test.size() >= 0.8);
}
