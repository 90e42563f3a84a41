#pragma once

#include <cmath>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/rescls/model.hpp"

namespace voxseek::rescls {

/// A canonically ordered sequence with one class label per step.
struct LabeledSequence {
    Sequence seq;
    std::vector<int> labels;
};

struct RnnTrainTrace {
    std::vector<double> epoch_loss;
};

/// Epochs of truncated BPTT over the labeled sequences, deterministically
/// shuffled from the caller's RNG.
inline RnnTrainTrace train_rnn(ResRnnModel& model, const std::vector<LabeledSequence>& data, int epochs,
                               float learning_rate, num::RngState& rng, int chunk_len = kDefaultChunkLen) {
    if (data.empty()) throw InputError("train_rnn: no labeled sequences");
    RnnTrainTrace trace;
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        double total = 0;
        long points = 0;
        for (size_t i : order) {
            total += model.train_sequence(data[i].seq, data[i].labels, learning_rate, rng, chunk_len) *
                     data[i].seq.length();
            points += data[i].seq.length();
        }
        double mean = total / static_cast<double>(points);
        if (!std::isfinite(mean)) throw TrainingError("residual rnn diverged at epoch " + std::to_string(e));
        trace.epoch_loss.push_back(mean);
    }
    return trace;
}

/// Fraction of points whose argmax class matches the label.
inline double per_point_accuracy(ResRnnModel& model, const std::vector<LabeledSequence>& data,
                                 int chunk_len = kDefaultChunkLen) {
    long correct = 0, total = 0;
    for (const auto& ls : data) {
        auto dists = model.forward_classify(ls.seq, chunk_len);
        for (size_t t = 0; t < dists.size(); ++t) {
            int best = 0;
            for (int c = 1; c < model.num_classes(); ++c)
                if (dists[t][static_cast<size_t>(c)] > dists[t][static_cast<size_t>(best)]) best = c;
            if (best == ls.labels[t]) ++correct;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

} // namespace voxseek::rescls
