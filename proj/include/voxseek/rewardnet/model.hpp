#pragma once

#include <string>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/graph.hpp"
#include "voxseek/num/optim.hpp"
#include "voxseek/voxel/grid.hpp"

namespace voxseek::rewardnet {

/// Softmax output [R1,R2] of the 3D CNN: probability of the window containing
/// the target class against not containing it.
struct RewardVector {
    double r1 = 0;
    double r2 = 0;
};

/// Scalar confidence r = 2*R1 + 1 - R2, used as the RL reward.
inline double confidence(const RewardVector& rv) { return 2.0 * rv.r1 + 1.0 - rv.r2; }

/// Per-scale linear projections of the three conv layer outputs.
struct CnnFeatures {
    std::vector<float> f1, f2, f3;

    std::vector<float> concatenated() const {
        std::vector<float> out;
        out.reserve(f1.size() + f2.size() + f3.size());
        out.insert(out.end(), f1.begin(), f1.end());
        out.insert(out.end(), f2.begin(), f2.end());
        out.insert(out.end(), f3.begin(), f3.end());
        return out;
    }
};

/// Binary per-class 3D CNN over a 4x32x32x32 window tensor.
///
/// Conv stack 8@5/3 -> 16@4/2 -> 32@3/1 (shapes 8x10^3, 16x4^3, 32x2^3),
/// global average pooling, dense 64 relu, dense 2, softmax. Each conv output
/// additionally feeds a learned projection to a feature vector f1/f2/f3.
class RewardNetModel {
public:
    static constexpr int kHeadHidden = 64;
    static constexpr int kDefaultFeatureDim = 16;

    RewardNetModel(int feature_dim, num::RngState& rng) : feature_dim_(feature_dim) {
        if (feature_dim < 1) throw ContractError("feature_dim must be positive");
        auto& w1 = params_.add("conv1_filters", {8, 4, 5, 5, 5});
        auto& w2 = params_.add("conv2_filters", {16, 8, 4, 4, 4});
        auto& w3 = params_.add("conv3_filters", {32, 16, 3, 3, 3});
        auto& h1w = params_.add("head1_w", {kHeadHidden, 32});
        auto& h1b = params_.add("head1_b", {kHeadHidden});
        auto& h2w = params_.add("head2_w", {2, kHeadHidden});
        auto& h2b = params_.add("head2_b", {2});
        auto& f1w = params_.add("feat1_w", {feature_dim, 8 * 10 * 10 * 10});
        auto& f1b = params_.add("feat1_b", {feature_dim});
        auto& f2w = params_.add("feat2_w", {feature_dim, 16 * 4 * 4 * 4});
        auto& f2b = params_.add("feat2_b", {feature_dim});
        auto& f3w = params_.add("feat3_w", {feature_dim, 32 * 2 * 2 * 2});
        auto& f3b = params_.add("feat3_b", {feature_dim});

        num::init_glorot(w1, rng, 4 * 125, 8 * 125);
        num::init_glorot(w2, rng, 8 * 64, 16 * 64);
        num::init_glorot(w3, rng, 16 * 27, 32 * 27);
        num::init_glorot(h1w, rng, 32, kHeadHidden);
        num::init_glorot(h2w, rng, kHeadHidden, 2);
        num::init_glorot(f1w, rng, 8000, feature_dim);
        num::init_glorot(f2w, rng, 1024, feature_dim);
        num::init_glorot(f3w, rng, 256, feature_dim);

        input_ = g_.input({voxel::kCnnInputChannels, 32, 32, 32});
        conv1_ = g_.relu(g_.conv3d(input_, g_.param(w1), 3));
        conv2_ = g_.relu(g_.conv3d(conv1_, g_.param(w2), 2));
        conv3_ = g_.relu(g_.conv3d(conv2_, g_.param(w3), 1));
        g_.set_label(conv1_, "conv1");
        g_.set_label(conv2_, "conv2");
        g_.set_label(conv3_, "conv3");
        pooled_ = g_.global_avg_pool(conv3_);
        hidden_ = g_.dense(pooled_, h1w, h1b, num::Activation::Relu);
        logits_ = g_.dense(hidden_, h2w, h2b, num::Activation::Identity);
        g_.set_label(logits_, "head");
        probs_ = g_.softmax(logits_);
        loss_ = g_.cross_entropy_logits(logits_);
        feat1_ = g_.dense(conv1_, f1w, f1b, num::Activation::Identity);
        feat2_ = g_.dense(conv2_, f2w, f2b, num::Activation::Identity);
        feat3_ = g_.dense(conv3_, f3w, f3b, num::Activation::Identity);
    }

    struct Output {
        RewardVector reward;
        CnnFeatures features;
    };

    /// One forward pass computing the reward vector and all three feature
    /// projections. Repeated calls with an identical input reuse the pass.
    const Output& evaluate(const num::Tensor& input) {
        if (have_cache_ && input.v == last_input_) return cache_;
        g_.set_input(input_, input);
        g_.forward();
        const num::Tensor& p = g_.value(probs_);
        if (!p.all_finite()) throw NumericError("reward net produced a non-finite activation in '" + g_.first_nonfinite() + "'");
        cache_.reward = {static_cast<double>(p[0]), static_cast<double>(p[1])};
        cache_.features.f1 = g_.value(feat1_).v;
        cache_.features.f2 = g_.value(feat2_).v;
        cache_.features.f3 = g_.value(feat3_).v;
        last_input_ = input.v;
        have_cache_ = true;
        return cache_;
    }

    RewardVector forward_reward(const num::Tensor& input) { return evaluate(input).reward; }

    CnnFeatures encode_features(const num::Tensor& input) { return evaluate(input).features; }

    /// One supervised step on a labeled window; returns the example loss.
    double train_step(const num::Tensor& input, bool positive, float learning_rate) {
        have_cache_ = false;
        g_.set_input(input_, input);
        g_.set_target(loss_, positive ? 0 : 1);
        g_.forward();
        double loss = g_.value(loss_)[0];
        params_.zero_grad();
        g_.backward(loss_);
        num::sgd_step(params_.all(), learning_rate);
        return loss;
    }

    /// Shapes of the three conv activations, assertable against the expected
    /// 8x10^3 / 16x4^3 / 32x2^3 chain.
    std::vector<std::vector<int>> conv_output_shapes() const {
        return {g_.value(conv1_).shape, g_.value(conv2_).shape, g_.value(conv3_).shape};
    }

    int feature_dim() const { return feature_dim_; }
    num::ParamSet& params() { return params_; }
    const num::ParamSet& params() const { return params_; }
    long forward_count() const { return g_.forward_count(); }

    void invalidate_cache() { have_cache_ = false; }

private:
    int feature_dim_;
    num::ParamSet params_;
    num::Graph g_;
    num::NodeId input_ = -1, conv1_ = -1, conv2_ = -1, conv3_ = -1, pooled_ = -1, hidden_ = -1;
    num::NodeId logits_ = -1, probs_ = -1, loss_ = -1, feat1_ = -1, feat2_ = -1, feat3_ = -1;
    std::vector<float> last_input_;
    Output cache_;
    bool have_cache_ = false;
};

} // namespace voxseek::rewardnet
