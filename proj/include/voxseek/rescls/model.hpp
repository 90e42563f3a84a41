#pragma once

#include <map>
#include <memory>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/graph.hpp"
#include "voxseek/num/optim.hpp"
#include "voxseek/rescls/sequence.hpp"

namespace voxseek::rescls {

constexpr int kDefaultChunkLen = 256;

/// Residual recurrent per-point classifier over ordered point sequences:
/// dense(in->H) -> dropout -> residual(dense,dense) -> LSTM(H) ->
/// residual(dense,dense) -> dropout -> dense(H->H/2) -> dropout ->
/// dense(->classes) -> softmax. 7 dense, 3 dropout, 2 residual blocks, 1 LSTM.
///
/// Sequences are processed in chunks with the LSTM state carried across chunk
/// boundaries; backpropagation is truncated at those boundaries.
class ResRnnModel {
public:
    ResRnnModel(int num_classes, int feature_dim, num::RngState& rng, float dropout_rate = 0.5f, int hidden = 128)
        : num_classes_(num_classes),
          feature_dim_(feature_dim),
          hidden_(hidden),
          dropout_rate_(dropout_rate),
          input_dim_(6 + 3 * feature_dim) {
        if (num_classes < 2) throw ContractError("ResRnnModel needs at least two output classes");
        int h = hidden_, in = input_dim_, half = hidden_ / 2;
        auto glorot = [&rng](num::Parameter& p, int fi, int fo) { num::init_glorot(p, rng, fi, fo); };
        glorot(params_.add("in_w", {h, in}), in, h);
        params_.add("in_b", {h});
        glorot(params_.add("res1a_w", {h, h}), h, h);
        params_.add("res1a_b", {h});
        glorot(params_.add("res1b_w", {h, h}), h, h);
        params_.add("res1b_b", {h});
        glorot(params_.add("lstm_wx", {4 * h, h}), h, 4 * h);
        glorot(params_.add("lstm_wh", {4 * h, h}), h, 4 * h);
        params_.add("lstm_b", {4 * h});
        glorot(params_.add("res2a_w", {h, h}), h, h);
        params_.add("res2a_b", {h});
        glorot(params_.add("res2b_w", {h, h}), h, h);
        params_.add("res2b_b", {h});
        glorot(params_.add("fc_w", {half, h}), h, half);
        params_.add("fc_b", {half});
        glorot(params_.add("out_w", {num_classes, half}), half, num_classes);
        params_.add("out_b", {num_classes});
    }

    int num_classes() const { return num_classes_; }
    int feature_dim() const { return feature_dim_; }
    int input_dim() const { return input_dim_; }
    int hidden() const { return hidden_; }
    float dropout_rate() const { return dropout_rate_; }
    num::ParamSet& params() { return params_; }
    const num::ParamSet& params() const { return params_; }

    /// Per-point class distributions; dropout disabled, state carried across
    /// chunks so the chunking is invisible in the result.
    std::vector<std::vector<float>> forward_classify(const Sequence& seq, int chunk_len = kDefaultChunkLen) {
        check_seq(seq, chunk_len);
        std::vector<std::vector<float>> out;
        out.reserve(static_cast<size_t>(seq.length()));
        std::vector<float> h(static_cast<size_t>(hidden_), 0.0f), c(static_cast<size_t>(hidden_), 0.0f);
        for (int start = 0; start < seq.length(); start += chunk_len) {
            int len = std::min(chunk_len, seq.length() - start);
            ChunkGraph& cg = chunk(len);
            load_chunk(cg, seq, start, len, h, c);
            cg.g.forward();
            for (int t = 0; t < len; ++t) {
                const num::Tensor& p = cg.g.value(cg.probs[static_cast<size_t>(t)]);
                if (!p.all_finite())
                    throw NumericError("residual rnn produced a non-finite distribution at step " +
                                       std::to_string(start + t));
                out.push_back(p.v);
            }
            h = cg.g.value(cg.h_out).v;
            c = cg.g.value(cg.c_out).v;
        }
        return out;
    }

    /// One truncated-BPTT pass over a labeled sequence; returns the mean
    /// per-point cross-entropy. Labels are per sequence step.
    double train_sequence(const Sequence& seq, const std::vector<int>& labels, float learning_rate,
                          num::RngState& rng, int chunk_len = kDefaultChunkLen) {
        check_seq(seq, chunk_len);
        if (static_cast<int>(labels.size()) != seq.length())
            throw ContractError("train_sequence: one label per sequence step required");
        double total = 0;
        std::vector<float> h(static_cast<size_t>(hidden_), 0.0f), c(static_cast<size_t>(hidden_), 0.0f);
        num::ForwardOpts opts;
        opts.training = true;
        opts.rng = &rng;
        for (int start = 0; start < seq.length(); start += chunk_len) {
            int len = std::min(chunk_len, seq.length() - start);
            ChunkGraph& cg = chunk(len);
            load_chunk(cg, seq, start, len, h, c);
            for (int t = 0; t < len; ++t) {
                int label = labels[static_cast<size_t>(start + t)];
                if (label < 0 || label >= num_classes_)
                    throw ContractError("train_sequence: label " + std::to_string(label) + " out of range");
                cg.g.set_target(cg.losses[static_cast<size_t>(t)], label);
            }
            cg.g.forward(opts);
            total += cg.g.value(cg.mean_loss)[0] * len;
            h = cg.g.value(cg.h_out).v;
            c = cg.g.value(cg.c_out).v;
            params_.zero_grad();
            cg.g.backward(cg.mean_loss);
            num::sgd_step(params_.all(), learning_rate);
        }
        return total / seq.length();
    }

private:
    struct ChunkGraph {
        num::Graph g;
        std::vector<num::NodeId> inputs;
        std::vector<num::NodeId> probs;
        std::vector<num::NodeId> losses;
        num::NodeId h_in = -1, c_in = -1, h_out = -1, c_out = -1, mean_loss = -1;
    };

    int num_classes_, feature_dim_, hidden_;
    float dropout_rate_;
    int input_dim_;
    num::ParamSet params_;
    std::map<int, std::unique_ptr<ChunkGraph>> chunks_; // keyed by chunk length

    void check_seq(const Sequence& seq, int chunk_len) const {
        if (seq.length() == 0) throw InputError("empty sequence");
        if (seq.input_dim != input_dim_)
            throw ShapeError("sequence input dim " + std::to_string(seq.input_dim) + " does not match model " +
                             std::to_string(input_dim_));
        if (chunk_len < 1) throw ContractError("chunk length must be positive");
    }

    ChunkGraph& chunk(int len) {
        auto it = chunks_.find(len);
        if (it != chunks_.end()) return *it->second;
        auto cg = std::make_unique<ChunkGraph>();
        build_chunk(*cg, len);
        return *chunks_.emplace(len, std::move(cg)).first->second;
    }

    void build_chunk(ChunkGraph& cg, int len) {
        num::Graph& g = cg.g;
        auto p = [this](const char* name) -> num::Parameter& { return *params_.find(name); };
        cg.h_in = g.input({hidden_});
        cg.c_in = g.input({hidden_});
        num::NodeId h = cg.h_in, c = cg.c_in;
        num::NodeId loss_sum = -1;
        for (int t = 0; t < len; ++t) {
            num::NodeId x = g.input({input_dim_});
            cg.inputs.push_back(x);
            num::NodeId a = g.dropout(g.dense(x, p("in_w"), p("in_b"), num::Activation::Relu), dropout_rate_);
            num::NodeId r1 = g.add(a, g.dense(g.dense(a, p("res1a_w"), p("res1a_b"), num::Activation::Relu),
                                              p("res1b_w"), p("res1b_b"), num::Activation::Identity));
            auto lstm = g.lstm_step(r1, h, c, p("lstm_wx"), p("lstm_wh"), p("lstm_b"));
            h = lstm.h;
            c = lstm.c;
            num::NodeId r2 = g.add(h, g.dense(g.dense(h, p("res2a_w"), p("res2a_b"), num::Activation::Relu),
                                              p("res2b_w"), p("res2b_b"), num::Activation::Identity));
            num::NodeId fc = g.dropout(g.dense(g.dropout(r2, dropout_rate_), p("fc_w"), p("fc_b"),
                                               num::Activation::Relu),
                                       dropout_rate_);
            num::NodeId logits = g.dense(fc, p("out_w"), p("out_b"), num::Activation::Identity);
            cg.probs.push_back(g.softmax(logits));
            num::NodeId ce = g.cross_entropy_logits(logits);
            cg.losses.push_back(ce);
            loss_sum = (t == 0) ? ce : g.add(loss_sum, ce);
        }
        cg.h_out = h;
        cg.c_out = c;
        cg.mean_loss = g.scale(loss_sum, 1.0f / static_cast<float>(len));
    }

    void load_chunk(ChunkGraph& cg, const Sequence& seq, int start, int len, const std::vector<float>& h,
                    const std::vector<float>& c) {
        cg.g.set_input(cg.h_in, num::Tensor({hidden_}, h));
        cg.g.set_input(cg.c_in, num::Tensor({hidden_}, c));
        for (int t = 0; t < len; ++t) {
            const float* row = seq.row(start + t);
            cg.g.set_input(cg.inputs[static_cast<size_t>(t)],
                           num::Tensor({input_dim_}, std::vector<float>(row, row + input_dim_)));
        }
    }
};

} // namespace voxseek::rescls
