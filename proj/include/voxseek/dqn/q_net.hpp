#pragma once

#include <vector>

#include "voxseek/env/env.hpp"
#include "voxseek/error.hpp"
#include "voxseek/num/graph.hpp"
#include "voxseek/num/optim.hpp"
#include "voxseek/voxel/grid.hpp"

namespace voxseek::dqn {

/// Dueling Q-network over a window content tensor. Same conv structure as the
/// reward net but with independent parameters; the pooled trunk vector is
/// copied into a scalar value stream V and a 13-way advantage stream A, and
/// Q(s,a) = V + A(a) - mean(A).
class QNetModel {
public:
    static constexpr int kActionCount = env::Action::kCount;
    static constexpr int kTrunkHidden = 64;
    static constexpr int kDefaultValueHidden = 8;
    static constexpr int kDefaultAdvHidden = 96;

    /// Stream widths are configurable (depth stays equal); a narrow value
    /// stream keeps TD updates from shifting all actions uniformly, which is
    /// what lets greedy simulation sweep the action set.
    explicit QNetModel(num::RngState& rng, int value_hidden = kDefaultValueHidden,
                       int adv_hidden = kDefaultAdvHidden, float optimism = 0.0f) {
        auto& w1 = params_.add("conv1_filters", {8, 4, 5, 5, 5});
        auto& w2 = params_.add("conv2_filters", {16, 8, 4, 4, 4});
        auto& w3 = params_.add("conv3_filters", {32, 16, 3, 3, 3});
        auto& tw = params_.add("trunk_w", {kTrunkHidden, 32});
        auto& tb = params_.add("trunk_b", {kTrunkHidden});
        auto& v1w = params_.add("value1_w", {value_hidden, kTrunkHidden});
        auto& v1b = params_.add("value1_b", {value_hidden});
        auto& v2w = params_.add("value2_w", {1, value_hidden});
        auto& v2b = params_.add("value2_b", {1});
        auto& a1w = params_.add("adv1_w", {adv_hidden, kTrunkHidden});
        auto& a1b = params_.add("adv1_b", {adv_hidden});
        auto& a2w = params_.add("adv2_w", {kActionCount, adv_hidden});
        auto& a2b = params_.add("adv2_b", {kActionCount});

        num::init_glorot(w1, rng, 4 * 125, 8 * 125);
        num::init_glorot(w2, rng, 8 * 64, 16 * 64);
        num::init_glorot(w3, rng, 16 * 27, 32 * 27);
        num::init_glorot(tw, rng, 32, kTrunkHidden);
        num::init_glorot(v1w, rng, kTrunkHidden, value_hidden);
        num::init_glorot(v2w, rng, value_hidden, 1);
        num::init_glorot(a1w, rng, kTrunkHidden, adv_hidden);
        num::init_glorot(a2w, rng, adv_hidden, kActionCount);
        v2b.value[0] = optimism;

        input_ = g_.input({voxel::kCnnInputChannels, 32, 32, 32});
        num::NodeId c1 = g_.relu(g_.conv3d(input_, g_.param(w1), 3));
        num::NodeId c2 = g_.relu(g_.conv3d(c1, g_.param(w2), 2));
        num::NodeId c3 = g_.relu(g_.conv3d(c2, g_.param(w3), 1));
        g_.set_label(c1, "conv1");
        g_.set_label(c2, "conv2");
        g_.set_label(c3, "conv3");
        num::NodeId trunk = g_.dense(g_.global_avg_pool(c3), tw, tb, num::Activation::Relu);
        value_ = g_.dense(g_.dense(trunk, v1w, v1b, num::Activation::Relu), v2w, v2b, num::Activation::Identity);
        adv_ = g_.dense(g_.dense(trunk, a1w, a1b, num::Activation::Relu), a2w, a2b, num::Activation::Identity);
        g_.set_label(value_, "value_stream");
        g_.set_label(adv_, "advantage_stream");
        q_ = g_.dueling_combine(value_, adv_);
        picked_ = g_.pick(q_, 0);
        td_loss_ = g_.half_squared_diff(picked_, 0.0f);
    }

    /// Q(s,a) for all 13 actions.
    const std::vector<float>& q_values(const num::Tensor& input) {
        run_forward(input);
        return g_.value(q_).v;
    }

    struct Streams {
        double v = 0;
        std::vector<float> a;
        std::vector<float> q;
    };

    Streams value_and_advantage(const num::Tensor& input) {
        run_forward(input);
        return {static_cast<double>(g_.value(value_)[0]), g_.value(adv_).v, g_.value(q_).v};
    }

    /// One TD step pulling Q(s,a) toward q_tg (the target held constant).
    /// Returns Q(s,a) as it was before the update.
    double td_update(const num::Tensor& input, env::Action action, double q_tg, float learning_rate) {
        have_cache_ = false;
        g_.set_input(input_, input);
        g_.set_pick_index(picked_, action.id);
        g_.set_regression_target(td_loss_, static_cast<float>(q_tg));
        g_.forward();
        double q_before = g_.value(picked_)[0];
        params_.zero_grad();
        g_.backward(td_loss_);
        num::sgd_step(params_.all(), learning_rate);
        return q_before;
    }

    num::ParamSet& params() { return params_; }
    const num::ParamSet& params() const { return params_; }
    long forward_count() const { return g_.forward_count(); }

private:
    num::ParamSet params_;
    num::Graph g_;
    num::NodeId input_ = -1, value_ = -1, adv_ = -1, q_ = -1, picked_ = -1, td_loss_ = -1;
    std::vector<float> last_input_;
    bool have_cache_ = false;

    void run_forward(const num::Tensor& input) {
        if (have_cache_ && input.v == last_input_) return;
        g_.set_input(input_, input);
        g_.forward();
        if (!g_.value(q_).all_finite())
            throw NumericError("q net produced a non-finite activation in '" + g_.first_nonfinite() + "'");
        last_input_ = input.v;
        have_cache_ = true;
    }
};

} // namespace voxseek::dqn
