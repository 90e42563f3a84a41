#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "voxseek/rewardnet/model.hpp"
#include "voxseek/rewardnet/training.hpp"

using namespace voxseek;
using namespace voxseek::rewardnet;
using voxel::EyeWindow;
using voxel::Index3;
using voxel::OccupancyGrid;

namespace {

// ---------------------------------------------------------------------------
// Independent double-precision layer-by-layer oracle (distinct loop structure
// from the production kernels).
// ---------------------------------------------------------------------------

struct RefTensor {
    std::vector<int> shape;
    std::vector<double> v;
};

RefTensor conv_relu_ref(const RefTensor& x, const num::Parameter& w, int stride) {
    int C = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
    int F = w.value.shape[0], K = w.value.shape[2];
    int OD = (D - K) / stride + 1, OH = (H - K) / stride + 1, OW = (W - K) / stride + 1;
    RefTensor out{{F, OD, OH, OW}, std::vector<double>(static_cast<size_t>(F) * OD * OH * OW, 0.0)};
    for (int kd = 0; kd < K; ++kd)
        for (int kh = 0; kh < K; ++kh)
            for (int kw = 0; kw < K; ++kw)
                for (int c = 0; c < C; ++c)
                    for (int f = 0; f < F; ++f) {
                        double wv = w.value[(((f * C + c) * K + kd) * K + kh) * K + kw];
                        for (int od = 0; od < OD; ++od)
                            for (int oh = 0; oh < OH; ++oh)
                                for (int ow = 0; ow < OW; ++ow) {
                                    double xv =
                                        x.v[((static_cast<size_t>(c) * D + (od * stride + kd)) * H + (oh * stride + kh)) * W +
                                            (ow * stride + kw)];
                                    out.v[((static_cast<size_t>(f) * OD + od) * OH + oh) * OW + ow] += wv * xv;
                                }
                    }
    for (double& v : out.v) v = std::max(v, 0.0);
    return out;
}

std::vector<double> dense_ref(const std::vector<double>& x, const num::Parameter& w, const num::Parameter& b,
                              bool relu) {
    int m = w.value.shape[0], n = w.value.shape[1];
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < m; ++r) out[static_cast<size_t>(r)] += static_cast<double>(w.value[r * n + c]) * x[static_cast<size_t>(c)];
    for (int r = 0; r < m; ++r) {
        out[static_cast<size_t>(r)] += b.value[r];
        if (relu) out[static_cast<size_t>(r)] = std::max(out[static_cast<size_t>(r)], 0.0);
    }
    return out;
}

num::Tensor random_window_input(uint64_t seed, double occupancy = 0.3) {
    num::RngState rng(seed);
    num::Tensor t({4, 32, 32, 32});
    const int spatial = 32 * 32 * 32;
    for (int i = 0; i < spatial; ++i)
        if (rng.bernoulli(occupancy)) {
            t[i] = 1.0f;
            t[spatial + i] = static_cast<float>(rng.uniform(0, 1));
            t[2 * spatial + i] = static_cast<float>(rng.uniform(0, 1));
            t[3 * spatial + i] = static_cast<float>(rng.uniform(0, 1));
        }
    return t;
}

// Scene fixture: grid with a colored cuboid object of the given class.
struct SceneFixture {
    OccupancyGrid grid;
    std::vector<int> labels;

    SceneFixture(Index3 dims, EyeWindow object, int class_id)
        : grid(dims, 0.1, {0, 0, 0}), labels(static_cast<size_t>(grid.unit_count()), voxel::kNoLabel) {
        for (int iz = object.lo[2]; iz < object.hi[2]; ++iz)
            for (int iy = object.lo[1]; iy < object.hi[1]; ++iy)
                for (int ix = object.lo[0]; ix < object.hi[0]; ++ix) {
                    voxel::GridUnit& u = grid.at(ix, iy, iz);
                    u.count = 3;
                    u.r = 200;
                    u.g = 40;
                    u.b = 40;
                    labels[grid.index(ix, iy, iz)] = class_id;
                }
    }
};

} // namespace

TEST(RewardNet, ConvShapeChain) {
    num::RngState rng(1);
    RewardNetModel m(16, rng);
    m.forward_reward(random_window_input(2));
    auto shapes = m.conv_output_shapes();
    ASSERT_EQ(shapes.size(), 3u);
    EXPECT_EQ(shapes[0], (std::vector<int>{8, 10, 10, 10}));
    EXPECT_EQ(shapes[1], (std::vector<int>{16, 4, 4, 4}));
    EXPECT_EQ(shapes[2], (std::vector<int>{32, 2, 2, 2}));
}

TEST(RewardNet, SymmetricHeadGivesHalfHalf) {
    num::RngState rng(3);
    RewardNetModel m(16, rng);
    num::Parameter* h2w = m.params().find("head2_w");
    num::Parameter* h2b = m.params().find("head2_b");
    ASSERT_NE(h2w, nullptr);
    for (int c = 0; c < RewardNetModel::kHeadHidden; ++c)
        h2w->value[RewardNetModel::kHeadHidden + c] = h2w->value[c]; // row 1 := row 0
    h2b->value[1] = h2b->value[0];
    RewardVector rv = m.forward_reward(random_window_input(4));
    EXPECT_NEAR(rv.r1, 0.5, 1e-6);
    EXPECT_NEAR(rv.r2, 0.5, 1e-6);
}

TEST(RewardNet, RewardVectorSumsToOne) {
    num::RngState rng(5);
    RewardNetModel m(16, rng);
    for (int i = 0; i < 100; ++i) {
        RewardVector rv = m.forward_reward(random_window_input(100 + static_cast<uint64_t>(i)));
        EXPECT_NEAR(rv.r1 + rv.r2, 1.0, 1e-6);
        // Eq-under-softmax identity: r collapses to 3*R1
        EXPECT_NEAR(confidence(rv), 3.0 * rv.r1, 3e-6);
    }
}

TEST(Confidence, TabulatedValues) {
    EXPECT_DOUBLE_EQ(confidence({1.0, 0.0}), 3.0);
    EXPECT_DOUBLE_EQ(confidence({0.0, 1.0}), 0.0);
    EXPECT_DOUBLE_EQ(confidence({0.5, 0.5}), 1.5);
}

TEST(Confidence, MonotoneInR1) {
    double prev = -1;
    for (double r1 = 0; r1 <= 1.0 + 1e-12; r1 += 0.05) {
        double r = confidence({r1, 1.0 - r1});
        EXPECT_GT(r, prev);
        prev = r;
    }
}

TEST(RewardNet, ZeroInputZeroBiasGivesZeroFeatures) {
    num::RngState rng(6);
    RewardNetModel m(16, rng); // projection biases start at zero
    num::Tensor zeros({4, 32, 32, 32});
    CnnFeatures f = m.encode_features(zeros);
    ASSERT_EQ(f.concatenated().size(), 48u);
    for (float v : f.concatenated()) EXPECT_EQ(v, 0.0f);
}

TEST(RewardNet, FeatureLengthIsThreeTimesDim) {
    num::RngState rng(7);
    RewardNetModel m(8, rng);
    CnnFeatures f = m.encode_features(random_window_input(8));
    EXPECT_EQ(f.f1.size(), 8u);
    EXPECT_EQ(f.f2.size(), 8u);
    EXPECT_EQ(f.f3.size(), 8u);
    EXPECT_EQ(f.concatenated().size(), 24u);
}

// Hand-rolled forward oracle: layer-by-layer double-precision evaluation.
TEST(RewardNet, MatchesLayerByLayerOracle) {
    num::RngState rng(9);
    RewardNetModel m(16, rng);
    num::Tensor in = random_window_input(10);
    const RewardNetModel::Output& out = m.evaluate(in);

    RefTensor x{{4, 32, 32, 32}, std::vector<double>(in.v.begin(), in.v.end())};
    RefTensor a1 = conv_relu_ref(x, *m.params().find("conv1_filters"), 3);
    RefTensor a2 = conv_relu_ref(a1, *m.params().find("conv2_filters"), 2);
    RefTensor a3 = conv_relu_ref(a2, *m.params().find("conv3_filters"), 1);
    std::vector<double> pooled(32, 0.0);
    for (int c = 0; c < 32; ++c) {
        for (int i = 0; i < 8; ++i) pooled[static_cast<size_t>(c)] += a3.v[static_cast<size_t>(c) * 8 + i];
        pooled[static_cast<size_t>(c)] /= 8.0;
    }
    std::vector<double> hidden = dense_ref(pooled, *m.params().find("head1_w"), *m.params().find("head1_b"), true);
    std::vector<double> logits = dense_ref(hidden, *m.params().find("head2_w"), *m.params().find("head2_b"), false);
    double mx = std::max(logits[0], logits[1]);
    double z = std::exp(logits[0] - mx) + std::exp(logits[1] - mx);
    double r1 = std::exp(logits[0] - mx) / z;
    EXPECT_NEAR(out.reward.r1, r1, 1e-4);
    EXPECT_NEAR(out.reward.r2, 1.0 - r1, 1e-4);

    // flatten-then-matrix-multiply oracle for the projections
    std::vector<double> f1 = dense_ref(a1.v, *m.params().find("feat1_w"), *m.params().find("feat1_b"), false);
    std::vector<double> f2 = dense_ref(a2.v, *m.params().find("feat2_w"), *m.params().find("feat2_b"), false);
    std::vector<double> f3 = dense_ref(a3.v, *m.params().find("feat3_w"), *m.params().find("feat3_b"), false);
    for (size_t i = 0; i < 16; ++i) {
        EXPECT_NEAR(out.features.f1[i], f1[i], 1e-3 * std::max(1.0, std::abs(f1[i])));
        EXPECT_NEAR(out.features.f2[i], f2[i], 1e-3 * std::max(1.0, std::abs(f2[i])));
        EXPECT_NEAR(out.features.f3[i], f3[i], 1e-3 * std::max(1.0, std::abs(f3[i])));
    }
}

TEST(RewardNet, RewardAndFeaturesShareOneConvPass) {
    num::RngState rng(11);
    RewardNetModel m(16, rng);
    num::Tensor in = random_window_input(12);
    long before = m.forward_count();
    RewardVector rv = m.forward_reward(in);
    CnnFeatures f = m.encode_features(in);
    EXPECT_EQ(m.forward_count(), before + 1);
    // identical input twice -> identical features
    CnnFeatures f2 = m.encode_features(in);
    EXPECT_EQ(f.f1, f2.f1);
    EXPECT_NEAR(rv.r1 + rv.r2, 1.0, 1e-6);
}

// ---------------------------------------------------------------------------
// IoU and training-set mining
// ---------------------------------------------------------------------------

// Brute-force unit-counting oracle.
TEST(Iou, MatchesUnitEnumeration) {
    num::RngState rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        auto rand_box = [&]() {
            EyeWindow w;
            for (size_t a = 0; a < 3; ++a) {
                w.lo[a] = rng.uniform_int(0, 8);
                w.hi[a] = w.lo[a] + rng.uniform_int(2, 6);
            }
            return w;
        };
        EyeWindow a = rand_box(), b = rand_box();
        long long inter = 0, auni = 0;
        for (int iz = 0; iz < 16; ++iz)
            for (int iy = 0; iy < 16; ++iy)
                for (int ix = 0; ix < 16; ++ix) {
                    bool ia = a.contains(ix, iy, iz), ib = b.contains(ix, iy, iz);
                    inter += ia && ib;
                    auni += ia || ib;
                }
        double expect = auni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(auni);
        ASSERT_NEAR(voxel::box_iou(a, b), expect, 1e-12);
    }
}

TEST(Iou, ExactAndDisjointCases) {
    EyeWindow box{{2, 2, 2}, {6, 6, 6}};
    EXPECT_DOUBLE_EQ(voxel::box_iou(box, box), 1.0);
    EXPECT_DOUBLE_EQ(voxel::box_iou(box, {{8, 8, 8}, {10, 10, 10}}), 0.0);
}

TEST(InstanceBoxes, TwoSeparateObjects) {
    SceneFixture fix({20, 20, 20}, {{2, 2, 2}, {6, 6, 6}}, 1);
    // second object of the same class
    for (int iz = 10; iz < 14; ++iz)
        for (int iy = 10; iy < 14; ++iy)
            for (int ix = 10; ix < 14; ++ix) {
                fix.grid.at(ix, iy, iz).count = 1;
                fix.labels[fix.grid.index(ix, iy, iz)] = 1;
            }
    auto boxes = class_instance_boxes(fix.grid, fix.labels, 1);
    ASSERT_EQ(boxes.size(), 2u);
    EXPECT_EQ(boxes[0], (EyeWindow{{2, 2, 2}, {6, 6, 6}}));
    EXPECT_EQ(boxes[1], (EyeWindow{{10, 10, 10}, {14, 14, 14}}));
}

TEST(MakeTrainingSet, MinedWindowsHonorIouThresholds) {
    SceneFixture fix({20, 20, 20}, {{3, 3, 3}, {9, 9, 9}}, 2);
    num::RngState rng(14);
    auto set = make_training_set(fix.grid, fix.labels, 2, 30, rng);
    ASSERT_EQ(set.size(), 30u);
    auto boxes = class_instance_boxes(fix.grid, fix.labels, 2);
    int pos = 0;
    for (const auto& ex : set) {
        double iou = max_iou_against(ex.window, boxes);
        if (ex.positive) {
            ++pos;
            EXPECT_GE(iou, 0.7);
        } else {
            EXPECT_LT(iou, 0.3);
        }
    }
    EXPECT_EQ(pos, 15);
}

TEST(MakeTrainingSet, ExactObjectBoxIsPositive) {
    EyeWindow object{{3, 3, 3}, {9, 9, 9}};
    SceneFixture fix({20, 20, 20}, object, 2);
    auto boxes = class_instance_boxes(fix.grid, fix.labels, 2);
    EXPECT_DOUBLE_EQ(max_iou_against(object, boxes), 1.0);
    EXPECT_DOUBLE_EQ(max_iou_against({{12, 12, 12}, {16, 16, 16}}, boxes), 0.0);
}

TEST(MakeTrainingSet, MissingClassIsInputError) {
    SceneFixture fix({12, 12, 12}, {{2, 2, 2}, {5, 5, 5}}, 1);
    num::RngState rng(15);
    EXPECT_THROW(make_training_set(fix.grid, fix.labels, 9, 10, rng), InputError);
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

TEST(TrainRewardNet, LossDecreasesAndIsDeterministic) {
    SceneFixture fix({16, 16, 16}, {{3, 3, 3}, {9, 9, 9}}, 1);
    num::RngState mine_rng(16);
    auto set = make_training_set(fix.grid, fix.labels, 1, 10, mine_rng);

    auto run = [&](uint64_t seed) {
        num::RngState rng(seed);
        RewardNetModel m(16, rng);
        num::RngState train_rng(seed + 1);
        return train_reward_net(m, set, 8, 0.01f, train_rng).epoch_loss;
    };
    auto trace = run(17);
    ASSERT_EQ(trace.size(), 8u);
    EXPECT_LT(trace.back(), trace.front());
    EXPECT_EQ(trace, run(17)); // fixed seed, identical trace
}

TEST(TrainRewardNet, ZeroEpochsLeavesModelUnchanged) {
    SceneFixture fix({16, 16, 16}, {{3, 3, 3}, {9, 9, 9}}, 1);
    num::RngState rng(18);
    auto set = make_training_set(fix.grid, fix.labels, 1, 6, rng);
    RewardNetModel m(16, rng);
    std::vector<float> before = m.params().find("conv1_filters")->value.v;
    num::RngState train_rng(19);
    auto trace = train_reward_net(m, set, 0, 0.01f, train_rng);
    EXPECT_TRUE(trace.epoch_loss.empty());
    EXPECT_EQ(m.params().find("conv1_filters")->value.v, before);
}

TEST(TrainRewardNet, EmptySetIsInputError) {
    num::RngState rng(20);
    RewardNetModel m(16, rng);
    EXPECT_THROW(train_reward_net(m, {}, 5, 0.01f, rng), InputError);
}
