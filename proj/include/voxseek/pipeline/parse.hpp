#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "voxseek/dqn/search.hpp"
#include "voxseek/error.hpp"
#include "voxseek/pipeline/config.hpp"
#include "voxseek/pipeline/metrics.hpp"
#include "voxseek/rescls/model.hpp"
#include "voxseek/rescls/training.hpp"
#include "voxseek/rewardnet/training.hpp"
#include "voxseek/voxel/grid.hpp"

namespace voxseek::pipeline {

enum class Provenance : int8_t {
    Unlabeled = 0,
    DirectRnn = 1,  // phase 1, whole-scene residual RNN
    Refined = 2,    // phase 2, window lock refined by the RNN
    WindowLock = 3, // phase 2, lock without refinement
    Fallback = 4,   // leftover points labeled "other"
};

/// Final parse product: one label and one provenance per point.
struct LabeledScene {
    voxel::PointCloud cloud; // points carry the predicted label
    std::vector<int> predicted;
    std::vector<Provenance> provenance;
    std::map<std::string, dqn::SearchStats> search_stats; // per hard class
};

/// Trained models handed to parse_scene; reward nets are per hard class.
struct ParseModels {
    std::map<std::string, rewardnet::RewardNetModel*> reward_nets;
    std::map<std::string, dqn::QNetModel*> q_nets; // optional warm starts
    rescls::ResRnnModel* rnn = nullptr;
};

namespace detail {

inline std::vector<std::vector<int>> points_per_unit(const voxel::OccupancyGrid& grid,
                                                     const voxel::PointCloud& cloud) {
    std::vector<std::vector<int>> out(static_cast<size_t>(grid.unit_count()));
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const voxel::Point& p = cloud.points[i];
        voxel::Index3 u = grid.unit_of(p.x, p.y, p.z);
        out[grid.index(u[0], u[1], u[2])].push_back(static_cast<int>(i));
    }
    return out;
}

// occupancy grid restricted to the not-yet-labeled points
inline voxel::OccupancyGrid active_grid_of(const voxel::OccupancyGrid& full,
                                           const std::vector<std::vector<int>>& unit_points,
                                           const voxel::PointCloud& cloud, const std::vector<int>& predicted) {
    voxel::OccupancyGrid g(full.dims(), full.unit_size(), full.origin());
    for (size_t u = 0; u < unit_points.size(); ++u) {
        int count = 0;
        double r = 0, gg = 0, b = 0;
        for (int pi : unit_points[u]) {
            if (predicted[static_cast<size_t>(pi)] >= 0) continue;
            const voxel::Point& p = cloud.points[static_cast<size_t>(pi)];
            ++count;
            r += p.r;
            gg += p.g;
            b += p.b;
        }
        if (count > 0) {
            voxel::GridUnit& unit = g.at(static_cast<int>(u % static_cast<size_t>(full.dims()[0])),
                                         static_cast<int>((u / static_cast<size_t>(full.dims()[0])) % static_cast<size_t>(full.dims()[1])),
                                         static_cast<int>(u / (static_cast<size_t>(full.dims()[0]) * static_cast<size_t>(full.dims()[1]))));
            unit.count = count;
            unit.r = static_cast<float>(r / count);
            unit.g = static_cast<float>(gg / count);
            unit.b = static_cast<float>(b / count);
        }
    }
    return g;
}

} // namespace detail

/// Two-phase parse: easy classes labeled by the residual RNN over the whole
/// scene, then each remaining class located by the DQN search with per-window
/// RNN refinement; points the refiner rejects return to the pool, and
/// whatever remains at the end is labeled "other".
inline LabeledScene parse_scene(const voxel::PointCloud& scene, ParseModels& models, const Config& cfg,
                                num::RngState& rng) {
    if (scene.empty()) throw InputError("parse_scene: empty scene");
    if (!models.rnn) throw ConfigError("parse_scene: residual RNN model is required");
    for (const std::string& name : cfg.hard_classes())
        if (!models.reward_nets.count(name))
            throw ConfigError("parse_scene: missing reward net for class '" + name + "'");

    LabeledScene out;
    out.cloud = scene;
    out.predicted.assign(scene.size(), -1);
    out.provenance.assign(scene.size(), Provenance::Unlabeled);

    voxel::OccupancyGrid full = voxelize(scene, cfg.unit_size, cfg.unit_budget);
    std::vector<std::vector<int>> unit_points = detail::points_per_unit(full, scene);

    // phase 1: whole scene through the RNN with zero window features
    rewardnet::CnnFeatures zero_features;
    zero_features.f1.assign(static_cast<size_t>(cfg.feature_dim), 0.0f);
    zero_features.f2.assign(static_cast<size_t>(cfg.feature_dim), 0.0f);
    zero_features.f3.assign(static_cast<size_t>(cfg.feature_dim), 0.0f);
    rescls::Sequence whole = rescls::build_point_sequence(scene.points, full, zero_features);
    auto dists = models.rnn->forward_classify(whole, cfg.rnn_chunk);
    for (size_t t = 0; t < dists.size(); ++t) {
        int best = 0;
        for (int c = 1; c < models.rnn->num_classes(); ++c)
            if (dists[t][static_cast<size_t>(c)] > dists[t][static_cast<size_t>(best)]) best = c;
        if (best < static_cast<int>(cfg.classes.size()) && cfg.is_easy(cfg.classes[static_cast<size_t>(best)])) {
            int pi = whole.order[t];
            out.predicted[static_cast<size_t>(pi)] = best;
            out.provenance[static_cast<size_t>(pi)] = Provenance::DirectRnn;
        }
    }

    // phase 2: per-class DQN search over the shrinking active grid
    for (const std::string& cls : cfg.hard_classes()) {
        int class_id = cfg.class_id(cls);
        rewardnet::RewardNetModel* reward_model = models.reward_nets.at(cls);
        voxel::OccupancyGrid active = detail::active_grid_of(full, unit_points, scene, out.predicted);
        if (active.occupied_count() == 0) break;

        std::unique_ptr<dqn::QNetModel> fresh;
        dqn::QNetModel* qnet = nullptr;
        if (auto it = models.q_nets.find(cls); it != models.q_nets.end()) {
            qnet = it->second;
        } else {
            fresh = std::make_unique<dqn::QNetModel>(rng, dqn::QNetModel::kDefaultValueHidden,
                                                     dqn::QNetModel::kDefaultAdvHidden, cfg.qnet_optimism);
            qnet = fresh.get();
        }

        dqn::CnnRewardSource reward(*reward_model, active);

        auto refiner = [&](const voxel::EyeWindow& w) {
            // points still unlabeled inside the window
            std::vector<int> pts;
            for (int iz = w.lo[2]; iz < w.hi[2]; ++iz)
                for (int iy = w.lo[1]; iy < w.hi[1]; ++iy)
                    for (int ix = w.lo[0]; ix < w.hi[0]; ++ix)
                        for (int pi : unit_points[full.index(ix, iy, iz)])
                            if (out.predicted[static_cast<size_t>(pi)] < 0) pts.push_back(pi);
            std::vector<size_t> emptied;
            if (pts.empty()) return emptied;

            rewardnet::CnnFeatures features =
                reward_model->encode_features(voxel::resample_to_cnn_input(voxel::extract_window(active, w)));
            std::vector<voxel::Point> subset;
            subset.reserve(pts.size());
            for (int pi : pts) subset.push_back(scene.points[static_cast<size_t>(pi)]);
            rescls::Sequence seq = rescls::build_point_sequence(subset, full, features);
            auto d = models.rnn->forward_classify(seq, cfg.rnn_chunk);
            for (size_t t = 0; t < d.size(); ++t) {
                int best = 0;
                for (int c = 1; c < models.rnn->num_classes(); ++c)
                    if (d[t][static_cast<size_t>(c)] > d[t][static_cast<size_t>(best)]) best = c;
                if (best == class_id) {
                    int pi = pts[static_cast<size_t>(seq.order[t])];
                    out.predicted[static_cast<size_t>(pi)] = class_id;
                    out.provenance[static_cast<size_t>(pi)] = Provenance::Refined;
                }
            }
            // report units that no longer hold unlabeled points
            for (int iz = w.lo[2]; iz < w.hi[2]; ++iz)
                for (int iy = w.lo[1]; iy < w.hi[1]; ++iy)
                    for (int ix = w.lo[0]; ix < w.hi[0]; ++ix) {
                        size_t u = full.index(ix, iy, iz);
                        bool any_unlabeled = false;
                        for (int pi : unit_points[u])
                            if (out.predicted[static_cast<size_t>(pi)] < 0) any_unlabeled = true;
                        if (!any_unlabeled) emptied.push_back(u);
                    }
            return emptied;
        };

        dqn::SearchResult res = dqn::search_class(active, reward, *qnet, cfg.search, rng, refiner);
        out.search_stats.emplace(cls, std::move(res.stats));
    }

    // leftovers become "other"
    for (size_t i = 0; i < out.predicted.size(); ++i) {
        if (out.predicted[i] < 0) {
            out.predicted[i] = cfg.other_id();
            out.provenance[i] = Provenance::Fallback;
        }
        out.cloud.points[i].label = out.predicted[i];
    }
    return out;
}

/// Metrics against ground truth labels carried by the original scene;
/// class_names should include the trailing "other".
inline MetricsTable metrics_for(const LabeledScene& parsed, const voxel::PointCloud& truth,
                                const Config& cfg) {
    if (truth.size() != parsed.predicted.size()) throw InputError("metrics_for: point set mismatch");
    std::vector<int> truth_ids(truth.size());
    for (size_t i = 0; i < truth.size(); ++i) {
        int t = truth.points[i].label;
        truth_ids[i] = (t == voxel::kNoLabel || t >= cfg.num_output_classes()) ? cfg.other_id() : t;
    }
    std::vector<std::string> names = cfg.classes;
    names.push_back("other");
    return evaluate_metrics(parsed.predicted, truth_ids, names);
}

} // namespace voxseek::pipeline
