#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "voxseek/rescls/model.hpp"
#include "voxseek/rescls/sequence.hpp"
#include "voxseek/rescls/training.hpp"

using namespace voxseek;
using namespace voxseek::rescls;
using voxel::Point;

namespace {

voxel::OccupancyGrid unit_grid() {
    return voxel::OccupancyGrid({8, 8, 8}, 1.0, {0, 0, 0});
}

rewardnet::CnnFeatures tiny_features(int dim, float fill = 0.25f) {
    rewardnet::CnnFeatures f;
    f.f1.assign(static_cast<size_t>(dim), fill);
    f.f2.assign(static_cast<size_t>(dim), fill);
    f.f3.assign(static_cast<size_t>(dim), fill);
    return f;
}

std::vector<Point> corner_points() {
    std::vector<Point> pts;
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                pts.push_back({x + 0.5, y + 0.5, z + 0.5, 10 * x, 10 * y, 10 * z, voxel::kNoLabel});
    return pts;
}

} // namespace

// Bit-interleave oracle.
TEST(Morton, MatchesHandInterleave) {
    auto ref = [](uint32_t x, uint32_t y, uint32_t z) {
        uint64_t out = 0;
        for (int b = 0; b < 21; ++b) {
            if ((x >> b) & 1u) out |= 1ull << (3 * b);
            if ((y >> b) & 1u) out |= 1ull << (3 * b + 1);
            if ((z >> b) & 1u) out |= 1ull << (3 * b + 2);
        }
        return out;
    };
    EXPECT_EQ(morton_code(0, 0, 0), 0u);
    EXPECT_EQ(morton_code(1, 0, 0), 1u);
    EXPECT_EQ(morton_code(0, 1, 0), 2u);
    EXPECT_EQ(morton_code(0, 0, 1), 4u);
    EXPECT_EQ(morton_code(1, 1, 1), 7u);
    EXPECT_EQ(morton_code(3, 5, 6), ref(3, 5, 6));
    num::RngState rng(1);
    for (int i = 0; i < 100; ++i) {
        uint32_t x = rng.uniform_int(1 << 16), y = rng.uniform_int(1 << 16), z = rng.uniform_int(1 << 16);
        ASSERT_EQ(morton_code(x, y, z), ref(x, y, z));
    }
}

TEST(Sequence, SinglePoint) {
    std::vector<Point> pts{{1.0, 2.0, 3.0, 255, 128, 0, voxel::kNoLabel}};
    Sequence s = build_point_sequence(pts, unit_grid(), tiny_features(2));
    ASSERT_EQ(s.length(), 1);
    EXPECT_EQ(s.input_dim, 12);
    EXPECT_FLOAT_EQ(s.row(0)[0], 1.0f);
    EXPECT_FLOAT_EQ(s.row(0)[3], 1.0f);       // r scaled
    EXPECT_FLOAT_EQ(s.row(0)[4], 128 / 255.0f);
    EXPECT_FLOAT_EQ(s.row(0)[6], 0.25f);      // first feature value
}

TEST(Sequence, CornersFollowMortonOrder) {
    std::vector<Point> pts = corner_points();
    Sequence s = build_point_sequence(pts, unit_grid(), tiny_features(2));
    ASSERT_EQ(s.length(), 8);
    // Morton order of unit cube corners is exactly the binary counting order
    for (int i = 0; i < 8; ++i) EXPECT_EQ(s.order[static_cast<size_t>(i)], i);
}

TEST(Sequence, PermutationInvariant) {
    std::vector<Point> pts;
    num::RngState rng(3);
    for (int i = 0; i < 40; ++i)
        pts.push_back({rng.uniform(0, 8), rng.uniform(0, 8), rng.uniform(0, 8), rng.uniform_int(0, 255),
                       rng.uniform_int(0, 255), rng.uniform_int(0, 255), voxel::kNoLabel});
    Sequence a = build_point_sequence(pts, unit_grid(), tiny_features(2));
    rng.shuffle(pts);
    Sequence b = build_point_sequence(pts, unit_grid(), tiny_features(2));
    EXPECT_EQ(a.inputs, b.inputs);
}

TEST(Sequence, EmptyIsInputError) {
    EXPECT_THROW(build_point_sequence({}, unit_grid(), tiny_features(2)), InputError);
}

TEST(Sequence, LexicographicOrderOption) {
    std::vector<Point> pts = corner_points();
    Sequence s = build_point_sequence(pts, unit_grid(), tiny_features(2), SequenceOrder::LexicographicZyx);
    // z-major: (0,0,0),(1,0,0),(0,1,0),(1,1,0),(0,0,1)...
    for (int i = 0; i < 8; ++i) EXPECT_EQ(s.order[static_cast<size_t>(i)], i);
}

// residual block structure: zero inner layers pass the input through
TEST(ResidualBlock, ZeroInnerLayersAreIdentity) {
    num::GraphT<float> g;
    num::ParameterT<float> w1("w1", {4, 4}), b1("b1", {4}), w2("w2", {4, 4}), b2("b2", {4});
    num::NodeId x = g.input({4});
    num::NodeId block = g.add(x, g.dense(g.dense(x, w1, b1, num::Activation::Relu), w2, b2,
                                         num::Activation::Identity));
    g.set_input(x, num::Tensor({4}, {0.5f, -1.5f, 2.0f, 0.0f}));
    g.forward();
    EXPECT_EQ(g.value(block).v, (std::vector<float>{0.5f, -1.5f, 2.0f, 0.0f}));
}

TEST(ResRnn, DistributionsSumToOne) {
    num::RngState rng(5);
    ResRnnModel m(4, 2, rng, 0.5f, 16);
    std::vector<Point> pts;
    num::RngState prng(6);
    for (int i = 0; i < 30; ++i)
        pts.push_back({prng.uniform(0, 8), prng.uniform(0, 8), prng.uniform(0, 8), 40, 80, 120, voxel::kNoLabel});
    Sequence s = build_point_sequence(pts, unit_grid(), tiny_features(2));
    auto dists = m.forward_classify(s);
    ASSERT_EQ(dists.size(), 30u);
    for (const auto& d : dists) {
        ASSERT_EQ(d.size(), 4u);
        double sum = 0;
        for (float p : d) sum += p;
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(ResRnn, ChunkedEqualsUnchunked) {
    num::RngState rng(7);
    ResRnnModel m(3, 2, rng, 0.5f, 16);
    std::vector<Point> pts;
    num::RngState prng(8);
    for (int i = 0; i < 23; ++i)
        pts.push_back({prng.uniform(0, 8), prng.uniform(0, 8), prng.uniform(0, 8), prng.uniform_int(0, 255), 10,
                       200, voxel::kNoLabel});
    Sequence s = build_point_sequence(pts, unit_grid(), tiny_features(2));
    auto whole = m.forward_classify(s, 1000);
    auto chunked = m.forward_classify(s, 5);
    ASSERT_EQ(whole.size(), chunked.size());
    double worst = 0;
    for (size_t i = 0; i < whole.size(); ++i)
        for (size_t c = 0; c < whole[i].size(); ++c)
            worst = std::max(worst, std::abs(static_cast<double>(whole[i][c]) - chunked[i][c]));
    EXPECT_LT(worst, 1e-5);
}

TEST(ResRnn, ClassifyIsPermutationInvariant) {
    num::RngState rng(9);
    ResRnnModel m(3, 2, rng, 0.5f, 16);
    std::vector<Point> pts;
    num::RngState prng(10);
    for (int i = 0; i < 17; ++i)
        pts.push_back({prng.uniform(0, 8), prng.uniform(0, 8), prng.uniform(0, 8), prng.uniform_int(0, 255),
                       prng.uniform_int(0, 255), prng.uniform_int(0, 255), voxel::kNoLabel});
    Sequence s1 = build_point_sequence(pts, unit_grid(), tiny_features(2));
    auto d1 = m.forward_classify(s1);
    num::RngState shuffle_rng(11);
    std::vector<Point> permuted = pts;
    shuffle_rng.shuffle(permuted);
    Sequence s2 = build_point_sequence(permuted, unit_grid(), tiny_features(2));
    auto d2 = m.forward_classify(s2);
    // same canonical sequence, so distributions agree pointwise
    ASSERT_EQ(d1.size(), d2.size());
    for (size_t i = 0; i < d1.size(); ++i) EXPECT_EQ(d1[i], d2[i]);
}

namespace {

std::vector<LabeledSequence> tiny_labeled_set(int n_seqs, uint64_t seed) {
    voxel::OccupancyGrid grid = unit_grid();
    num::RngState rng(seed);
    std::vector<LabeledSequence> data;
    for (int s = 0; s < n_seqs; ++s) {
        std::vector<Point> pts;
        std::vector<int> raw_labels;
        for (int i = 0; i < 24; ++i) {
            // two separable populations: dark-low vs bright-high
            int cls = rng.bernoulli(0.5) ? 0 : 1;
            double z = cls == 0 ? rng.uniform(0, 3) : rng.uniform(5, 8);
            int color = cls == 0 ? rng.uniform_int(0, 60) : rng.uniform_int(180, 255);
            pts.push_back({rng.uniform(0, 8), rng.uniform(0, 8), z, color, color, color, cls});
        }
        Sequence seq = build_point_sequence(pts, grid, tiny_features(2));
        std::vector<int> labels;
        for (int idx : seq.order) labels.push_back(pts[static_cast<size_t>(idx)].label);
        data.push_back({std::move(seq), std::move(labels)});
    }
    return data;
}

} // namespace

TEST(TrainRnn, LossDecreasesDeterministically) {
    auto data = tiny_labeled_set(3, 12);
    auto run = [&](uint64_t seed) {
        num::RngState rng(seed);
        ResRnnModel m(3, 2, rng, 0.2f, 16);
        num::RngState trng(seed + 1);
        return train_rnn(m, data, 12, 0.05f, trng).epoch_loss;
    };
    auto trace = run(13);
    ASSERT_EQ(trace.size(), 12u);
    EXPECT_LT(trace.back(), trace.front());
    EXPECT_EQ(trace, run(13));
}

TEST(TrainRnn, ZeroEpochsLeavesModelUnchanged) {
    auto data = tiny_labeled_set(1, 14);
    num::RngState rng(15);
    ResRnnModel m(3, 2, rng, 0.5f, 16);
    std::vector<float> before = m.params().find("lstm_wx")->value.v;
    num::RngState trng(16);
    auto trace = train_rnn(m, data, 0, 0.05f, trng);
    EXPECT_TRUE(trace.epoch_loss.empty());
    EXPECT_EQ(m.params().find("lstm_wx")->value.v, before);
}

TEST(TrainRnn, OverfitsTinySet) {
    auto data = tiny_labeled_set(2, 17);
    num::RngState rng(18);
    ResRnnModel m(3, 2, rng, 0.1f, 16);
    num::RngState trng(19);
    train_rnn(m, data, 60, 0.05f, trng);
    EXPECT_GE(per_point_accuracy(m, data), 0.95);
}

TEST(TrainRnn, BadLabelIsContractError) {
    auto data = tiny_labeled_set(1, 20);
    data[0].labels[0] = 7; // out of range for 3 classes
    num::RngState rng(21);
    ResRnnModel m(3, 2, rng, 0.5f, 16);
    num::RngState trng(22);
    EXPECT_THROW(train_rnn(m, data, 1, 0.05f, trng), ContractError);
}

TEST(TrainRnn, EmptyDataIsInputError) {
    num::RngState rng(23);
    ResRnnModel m(3, 2, rng, 0.5f, 16);
    num::RngState trng(24);
    EXPECT_THROW(train_rnn(m, {}, 1, 0.05f, trng), InputError);
}

// ---------------------------------------------------------------------------
// finite differences through a full unrolled network (length <= 4)
// ---------------------------------------------------------------------------

namespace {

using DG = num::GraphT<double>;
using DParam = num::ParameterT<double>;

struct UnrolledNet {
    DG g;
    std::deque<DParam> store;
    num::NodeId loss = -1;

    DParam& leaf(const std::string& name, std::vector<int> shape, num::RngState& rng) {
        store.emplace_back(name, std::move(shape));
        for (int i = 0; i < store.back().value.numel(); ++i) store.back().value[i] = rng.uniform(-0.5, 0.5);
        return store.back();
    }
};

// mirrors the ResRnnModel step structure, dropout off, in double precision
void build_unrolled(UnrolledNet& net, int len, int in, int h, int classes, num::RngState& rng) {
    DParam& in_w = net.leaf("in_w", {h, in}, rng);
    DParam& in_b = net.leaf("in_b", {h}, rng);
    DParam& r1a_w = net.leaf("r1a_w", {h, h}, rng);
    DParam& r1a_b = net.leaf("r1a_b", {h}, rng);
    DParam& r1b_w = net.leaf("r1b_w", {h, h}, rng);
    DParam& r1b_b = net.leaf("r1b_b", {h}, rng);
    DParam& wx = net.leaf("wx", {4 * h, h}, rng);
    DParam& wh = net.leaf("wh", {4 * h, h}, rng);
    DParam& wb = net.leaf("wb", {4 * h}, rng);
    DParam& r2a_w = net.leaf("r2a_w", {h, h}, rng);
    DParam& r2a_b = net.leaf("r2a_b", {h}, rng);
    DParam& r2b_w = net.leaf("r2b_w", {h, h}, rng);
    DParam& r2b_b = net.leaf("r2b_b", {h}, rng);
    DParam& fc_w = net.leaf("fc_w", {h / 2, h}, rng);
    DParam& fc_b = net.leaf("fc_b", {h / 2}, rng);
    DParam& out_w = net.leaf("out_w", {classes, h / 2}, rng);
    DParam& out_b = net.leaf("out_b", {classes}, rng);
    DParam& h0 = net.leaf("h0", {h}, rng);
    DParam& c0 = net.leaf("c0", {h}, rng);

    DG& g = net.g;
    num::NodeId hn = g.param(h0), cn = g.param(c0);
    num::NodeId loss_sum = -1;
    num::RngState xin(99);
    for (int t = 0; t < len; ++t) {
        DParam& x = net.leaf("x" + std::to_string(t), {in}, rng);
        num::NodeId a = g.dense(g.param(x), in_w, in_b, num::Activation::Relu);
        num::NodeId r1 = g.add(a, g.dense(g.dense(a, r1a_w, r1a_b, num::Activation::Relu), r1b_w, r1b_b,
                                          num::Activation::Identity));
        auto lstm = g.lstm_step(r1, hn, cn, wx, wh, wb);
        hn = lstm.h;
        cn = lstm.c;
        num::NodeId r2 = g.add(hn, g.dense(g.dense(hn, r2a_w, r2a_b, num::Activation::Relu), r2b_w, r2b_b,
                                           num::Activation::Identity));
        num::NodeId fc = g.dense(r2, fc_w, fc_b, num::Activation::Relu);
        num::NodeId ce = g.cross_entropy_logits(g.dense(fc, out_w, out_b, num::Activation::Identity),
                                                static_cast<int>(xin.uniform_int(static_cast<uint64_t>(classes))));
        loss_sum = (t == 0) ? ce : g.add(loss_sum, ce);
    }
    net.loss = g.scale(loss_sum, 1.0 / len);
}

} // namespace

TEST(ResRnn, UnrolledNetworkPassesFiniteDifferences) {
    for (int len : {1, 2, 4}) {
        UnrolledNet net;
        num::RngState rng(30 + static_cast<uint64_t>(len));
        build_unrolled(net, len, 5, 4, 3, rng);
        net.g.forward();
        for (auto& p : net.store) p.grad.fill(0.0);
        net.g.backward(net.loss);
        const double h = 1e-4;
        double worst = 0;
        for (auto& p : net.store) {
            for (int i = 0; i < p.value.numel(); ++i) {
                double orig = p.value[i];
                p.value[i] = orig + h;
                net.g.forward();
                double fp = net.g.value(net.loss)[0];
                p.value[i] = orig - h;
                net.g.forward();
                double fm = net.g.value(net.loss)[0];
                p.value[i] = orig;
                double fd = (fp - fm) / (2 * h);
                double err = std::abs(fd - p.grad[i]) / std::max({1.0, std::abs(fd), std::abs(p.grad[i])});
                worst = std::max(worst, err);
            }
        }
        EXPECT_LT(worst, 1e-4) << "len " << len;
    }
}
