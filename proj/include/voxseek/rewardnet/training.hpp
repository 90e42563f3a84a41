#pragma once

#include <algorithm>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/rng.hpp"
#include "voxseek/rewardnet/model.hpp"
#include "voxseek/voxel/grid.hpp"

namespace voxseek::rewardnet {

/// Bounding boxes of the connected components (26-connectivity) formed by
/// units carrying a class label. Non-overlapping object instances map to one
/// box each.
inline std::vector<voxel::EyeWindow> class_instance_boxes(const voxel::OccupancyGrid& grid,
                                                          const std::vector<int>& unit_labels, int class_id) {
    const voxel::Index3& d = grid.dims();
    std::vector<char> seen(static_cast<size_t>(grid.unit_count()), 0);
    std::vector<voxel::EyeWindow> boxes;
    std::vector<voxel::Index3> stack;
    for (int iz = 0; iz < d[2]; ++iz)
        for (int iy = 0; iy < d[1]; ++iy)
            for (int ix = 0; ix < d[0]; ++ix) {
                size_t u = grid.index(ix, iy, iz);
                if (seen[u] || unit_labels[u] != class_id) continue;
                voxel::Index3 lo{ix, iy, iz}, hi{ix, iy, iz};
                stack.push_back({ix, iy, iz});
                seen[u] = 1;
                while (!stack.empty()) {
                    voxel::Index3 c = stack.back();
                    stack.pop_back();
                    for (size_t a = 0; a < 3; ++a) {
                        lo[a] = std::min(lo[a], c[a]);
                        hi[a] = std::max(hi[a], c[a]);
                    }
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                int nx = c[0] + dx, ny = c[1] + dy, nz = c[2] + dz;
                                if (nx < 0 || ny < 0 || nz < 0 || nx >= d[0] || ny >= d[1] || nz >= d[2]) continue;
                                size_t nu = grid.index(nx, ny, nz);
                                if (!seen[nu] && unit_labels[nu] == class_id) {
                                    seen[nu] = 1;
                                    stack.push_back({nx, ny, nz});
                                }
                            }
                }
                // exclusive upper corner, minimum side 2 for a valid window
                voxel::EyeWindow box{lo, {hi[0] + 1, hi[1] + 1, hi[2] + 1}};
                for (size_t a = 0; a < 3; ++a)
                    if (box.side(static_cast<int>(a)) < 2) {
                        if (box.hi[a] < d[a])
                            ++box.hi[a];
                        else
                            --box.lo[a];
                    }
                boxes.push_back(box);
            }
    return boxes;
}

struct TrainingExample {
    num::Tensor input;
    bool positive = false;
    voxel::EyeWindow window;
};

inline double max_iou_against(const voxel::EyeWindow& w, const std::vector<voxel::EyeWindow>& boxes) {
    double best = 0;
    for (const auto& b : boxes) best = std::max(best, voxel::box_iou(w, b));
    return best;
}

/// IoU-mined positives (>= pos_iou against some class instance) and negatives
/// (< neg_iou against all of them), half/half, with seeded jitter.
inline std::vector<TrainingExample> make_training_set(const voxel::OccupancyGrid& scene,
                                                      const std::vector<int>& unit_labels, int class_id,
                                                      int count, num::RngState& rng, double pos_iou = 0.7,
                                                      double neg_iou = 0.3) {
    std::vector<voxel::EyeWindow> boxes = class_instance_boxes(scene, unit_labels, class_id);
    if (boxes.empty()) throw InputError("make_training_set: no instance of class " + std::to_string(class_id));
    const voxel::Index3& d = scene.dims();

    auto clamp_window = [&](voxel::EyeWindow w) {
        for (size_t a = 0; a < 3; ++a) {
            w.lo[a] = std::max(0, w.lo[a]);
            w.hi[a] = std::min(d[a], w.hi[a]);
            if (w.hi[a] - w.lo[a] < 2) {
                w.hi[a] = std::min(d[a], w.lo[a] + 2);
                w.lo[a] = w.hi[a] - 2;
            }
        }
        return w;
    };

    std::vector<TrainingExample> set;
    int pos_target = count / 2, neg_target = count - count / 2;
    for (int i = 0; i < pos_target; ++i) {
        const voxel::EyeWindow& base = boxes[rng.uniform_int(static_cast<uint64_t>(boxes.size()))];
        voxel::EyeWindow w = base;
        for (int attempt = 0; attempt < 50; ++attempt) {
            voxel::EyeWindow cand = base;
            for (size_t a = 0; a < 3; ++a) {
                int jitter = std::max(1, base.side(static_cast<int>(a)) / 6);
                cand.lo[a] += rng.uniform_int(-jitter, jitter);
                cand.hi[a] += rng.uniform_int(-jitter, jitter);
            }
            cand = clamp_window(cand);
            if (max_iou_against(cand, boxes) >= pos_iou) {
                w = cand;
                break;
            }
        }
        set.push_back({voxel::resample_to_cnn_input(voxel::extract_window(scene, w)), true, w});
    }
    for (int i = 0; i < neg_target; ++i) {
        voxel::EyeWindow w;
        bool found = false;
        for (int attempt = 0; attempt < 200 && !found; ++attempt) {
            voxel::EyeWindow cand;
            for (size_t a = 0; a < 3; ++a) {
                int side = rng.uniform_int(2, std::max(3, d[a] / 2));
                side = std::min(side, d[a]);
                int lo = rng.uniform_int(0, d[a] - side);
                cand.lo[a] = lo;
                cand.hi[a] = lo + side;
            }
            if (max_iou_against(cand, boxes) < neg_iou) {
                w = cand;
                found = true;
            }
        }
        if (!found) throw InputError("make_training_set: could not mine a negative window");
        set.push_back({voxel::resample_to_cnn_input(voxel::extract_window(scene, w)), false, w});
    }
    return set;
}

struct TrainTrace {
    std::vector<double> epoch_loss; // mean example loss per epoch
};

/// Supervised training over the mined window set. The shuffle order is drawn
/// from the caller's RNG, so a fixed seed reproduces the run exactly.
inline TrainTrace train_reward_net(RewardNetModel& model, const std::vector<TrainingExample>& set, int epochs,
                                   float learning_rate, num::RngState& rng) {
    if (set.empty()) throw InputError("train_reward_net: empty training set");
    TrainTrace trace;
    std::vector<size_t> order(set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        double total = 0;
        for (size_t i : order) total += model.train_step(set[i].input, set[i].positive, learning_rate);
        double mean = total / static_cast<double>(set.size());
        if (!std::isfinite(mean)) throw TrainingError("reward net diverged at epoch " + std::to_string(e));
        trace.epoch_loss.push_back(mean);
    }
    return trace;
}

inline double training_accuracy(RewardNetModel& model, const std::vector<TrainingExample>& set) {
    if (set.empty()) return 0;
    int correct = 0;
    for (const auto& ex : set) {
        RewardVector rv = model.forward_reward(ex.input);
        bool pred_pos = rv.r1 >= rv.r2;
        if (pred_pos == ex.positive) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

} // namespace voxseek::rewardnet
