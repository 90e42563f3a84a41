#pragma once

#include <unordered_map>
#include <vector>

#include "voxseek/rewardnet/model.hpp"
#include "voxseek/voxel/grid.hpp"
#include "voxseek/voxel/window.hpp"

namespace voxseek::dqn {

/// Reward evaluation backend for the search: either the trained per-class CNN
/// or a ground-truth IoU oracle for benchmarking.
class RewardSource {
public:
    virtual ~RewardSource() = default;

    rewardnet::RewardVector evaluate(const voxel::EyeWindow& w) {
        ++evaluations_;
        return do_evaluate(w);
    }

    long evaluations() const { return evaluations_; }

private:
    virtual rewardnet::RewardVector do_evaluate(const voxel::EyeWindow& w) = 0;
    long evaluations_ = 0;
};

/// Reward from the per-class 3D CNN applied to the active grid's window
/// content. The grid pointer tracks the live (mutating) search grid.
class CnnRewardSource : public RewardSource {
public:
    CnnRewardSource(rewardnet::RewardNetModel& model, const voxel::OccupancyGrid& grid)
        : model_(&model), grid_(&grid) {}

    void set_grid(const voxel::OccupancyGrid& grid) { grid_ = &grid; }

private:
    rewardnet::RewardVector do_evaluate(const voxel::EyeWindow& w) override {
        return model_->forward_reward(voxel::resample_to_cnn_input(voxel::extract_window(*grid_, w)));
    }

    rewardnet::RewardNetModel* model_;
    const voxel::OccupancyGrid* grid_;
};

/// Ground-truth oracle: R1 is the best IoU of the window against any target
/// box, R2 its complement. A perfectly enclosing window scores [1,0].
class IouRewardSource : public RewardSource {
public:
    explicit IouRewardSource(std::vector<voxel::EyeWindow> targets) : targets_(std::move(targets)) {}

private:
    rewardnet::RewardVector do_evaluate(const voxel::EyeWindow& w) override {
        double best = 0;
        for (const auto& t : targets_) best = std::max(best, voxel::box_iou(w, t));
        return {best, 1.0 - best};
    }

    std::vector<voxel::EyeWindow> targets_;
};

/// State-reward dictionary: memoizes reward evaluations per window state.
/// Must be cleared whenever the underlying scene or reward weights change.
class RewardDict {
public:
    const rewardnet::RewardVector& get(const voxel::EyeWindow& w, RewardSource& source) {
        auto [it, inserted] = map_.try_emplace(voxel::key_of(w));
        if (inserted)
            it->second = source.evaluate(w);
        else
            ++hits_;
        return it->second;
    }

    bool contains(const voxel::EyeWindow& w) const { return map_.count(voxel::key_of(w)) > 0; }
    size_t size() const { return map_.size(); }
    long hits() const { return hits_; }
    void clear() { map_.clear(); }

private:
    std::unordered_map<voxel::WindowKey, rewardnet::RewardVector, voxel::WindowKeyHash> map_;
    long hits_ = 0;
};

} // namespace voxseek::dqn
