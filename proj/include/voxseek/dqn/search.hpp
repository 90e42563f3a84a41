#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "voxseek/dqn/q_net.hpp"
#include "voxseek/dqn/reward_source.hpp"
#include "voxseek/env/env.hpp"
#include "voxseek/env/heatmap.hpp"
#include "voxseek/error.hpp"
#include "voxseek/num/rng.hpp"

namespace voxseek::dqn {

struct SearchConfig {
    int mis = 5000;       // max iterate steps per class
    int mrs = 4;          // reside rounds per iteration
    int mss = 8;          // simulated steps per rollout (N)
    int k = 4;            // rollouts per reside round
    double lambda = 0.9;  // reward decay
    float eta = 1e-3f;    // TD learning rate
    double mth = 0.9;     // lock threshold on R1
    int patience = 5;     // stalled decisions before a random walk
    bool winner_replay = true;

    void validate() const {
        if (mis < 1 || mrs < 1 || mss < 1 || k < 1) throw ConfigError("search config: mis, mrs, mss, k must be >= 1");
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("search config: lambda must be in [0,1]");
        if (mth <= 0.0 || mth >= 1.0) throw ConfigError("search config: mth must be in (0,1)");
        if (patience < 1) throw ConfigError("search config: patience must be >= 1");
    }
};

/// N-step simulated target: tanh(sum_t lambda^t r_t + lambda^N Q').
inline double n_step_target(std::span<const double> rewards, double lambda, double terminal_q) {
    double acc = 0.0, scale = 1.0;
    for (double r : rewards) {
        acc += scale * r;
        scale *= lambda;
    }
    return std::tanh(acc + scale * terminal_q);
}

/// Lock test: the window envelops the object once R1 reaches the threshold.
inline bool check_lock(const rewardnet::RewardVector& rv, double mth) { return rv.r1 >= mth; }

/// Greedy argmax over Q values; ties break toward the lowest action id.
inline env::Action greedy_action(std::span<const float> q) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(q.size()); ++i)
        if (q[static_cast<size_t>(i)] > q[static_cast<size_t>(best)]) best = i;
    return env::Action{best};
}

/// Per-state memory of the action whose Q best matched its simulated target.
/// Keeps the minimum |Q - Q_tg| seen for each window state.
class WinnerMemory {
public:
    struct Entry {
        env::Action action;
        double score = std::numeric_limits<double>::infinity();
    };

    void offer(const voxel::EyeWindow& w, env::Action action, double score) {
        auto [it, inserted] = map_.try_emplace(voxel::key_of(w));
        if (inserted || score < it->second.score) it->second = {action, score};
    }

    const Entry* find(const voxel::EyeWindow& w) const {
        auto it = map_.find(voxel::key_of(w));
        return it == map_.end() ? nullptr : &it->second;
    }

    size_t size() const { return map_.size(); }
    void clear() { map_.clear(); }

private:
    std::unordered_map<voxel::WindowKey, Entry, voxel::WindowKeyHash> map_;
};

struct ActionChoice {
    env::Action action;
    double q = 0;            // Q(s, action) at selection time
    bool from_winner = false;
    bool random_walk = false;
};

/// Policy: a stored winner is replayed with probability one half; otherwise
/// greedy argmax. A stall of `patience` consecutive decisions without a Q
/// improvement triggers one uniformly random action.
inline ActionChoice select_action(const std::vector<float>& qvals, const voxel::EyeWindow& window,
                                  const WinnerMemory& winners, num::RngState& rng, bool use_winner_replay = true,
                                  bool force_random_walk = false) {
    if (force_random_walk) {
        env::Action a{rng.uniform_int(0, env::Action::kCount - 1)};
        return {a, static_cast<double>(qvals[static_cast<size_t>(a.id)]), false, true};
    }
    if (use_winner_replay) {
        if (const WinnerMemory::Entry* w = winners.find(window); w && rng.bernoulli(0.5))
            return {w->action, static_cast<double>(qvals[static_cast<size_t>(w->action.id)]), true, false};
    }
    env::Action a = greedy_action(qvals);
    return {a, static_cast<double>(qvals[static_cast<size_t>(a.id)]), false, false};
}

/// Everything a rollout needs: the live grid, both networks and the caches.
struct SearchContext {
    const voxel::OccupancyGrid* grid = nullptr;
    QNetModel* qnet = nullptr;
    RewardSource* reward = nullptr;
    RewardDict* rdict = nullptr;

    num::Tensor window_content(const voxel::EyeWindow& w) const {
        return voxel::resample_to_cnn_input(voxel::extract_window(*grid, w));
    }
};

struct SimResult {
    double q_tg = 0;
    env::Action first_action;
    double first_q = 0; // Q at the rollout root for the first action
    std::vector<env::Action> actions;
};

/// Roll N greedy steps on a copy of the state, fetching rewards through the
/// state-reward dictionary, and bootstrap with the best terminal Q. The live
/// state is never touched.
inline SimResult simulate_nstep(const env::EnvState& state, const SearchContext& ctx, int n, double lambda) {
    SimResult res;
    env::EnvState sim = state;
    std::vector<double> rewards;
    rewards.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        const std::vector<float>& q = ctx.qnet->q_values(ctx.window_content(sim.window));
        env::Action a = greedy_action(q);
        if (t == 0) {
            res.first_action = a;
            res.first_q = q[static_cast<size_t>(a.id)];
        }
        sim = env::apply_action(sim, a);
        res.actions.push_back(a);
        rewards.push_back(rewardnet::confidence(ctx.rdict->get(sim.window, *ctx.reward)));
    }
    const std::vector<float>& qf = ctx.qnet->q_values(ctx.window_content(sim.window));
    double terminal = qf[static_cast<size_t>(greedy_action(qf).id)];
    res.q_tg = n_step_target(rewards, lambda, terminal);
    return res;
}

struct LockEvent {
    voxel::EyeWindow window;
    long step = 0;
    double r1 = 0;
    long long units_labeled = 0;
};

struct SearchStats {
    long steps = 0;
    long locks = 0;
    long random_walks = 0;
    long winner_uses = 0;
    std::vector<std::string> log; // key=value lines, one per step and lock
};

struct SearchResult {
    std::vector<LockEvent> locks;
    std::vector<char> labeled; // per-unit flag over the scene grid
    env::VisitHeatmap heatmap;
    SearchStats stats;
    long long first_lock_step = -1;
};

/// Chooses which units inside a locked window actually get labeled; the
/// default labels every occupied unit. Returns unit indices.
using LockRefiner = std::function<std::vector<size_t>(const voxel::EyeWindow&)>;

namespace detail {

inline std::string step_line(long step, const ActionChoice& c, const env::EnvState& s, double r, int lock) {
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "step=%ld action=%s q=%.6f r=%.6f lo=%d,%d,%d hi=%d,%d,%d winner=%d walk=%d lock=%d", step,
                  env::to_string(c.action).c_str(), c.q, r, s.window.lo[0], s.window.lo[1], s.window.lo[2],
                  s.window.hi[0], s.window.hi[1], s.window.hi[2], c.from_winner ? 1 : 0, c.random_walk ? 1 : 0,
                  lock);
    return buf;
}

} // namespace detail

/// One class search over a scene: the Algorithm-1 loop of act, simulate,
/// update, with winner replay, random-walk escape, reward memoization and
/// target locking. Locked windows are labeled and removed from the active
/// scene, then the window re-initializes and the search continues until the
/// step budget is spent or no unlabeled occupied units remain.
inline SearchResult search_class(voxel::OccupancyGrid scene, RewardSource& reward, QNetModel& qnet,
                                 const SearchConfig& cfg, num::RngState& rng, LockRefiner refiner = nullptr) {
    cfg.validate();
    const voxel::Index3 dims = scene.dims();
    SearchResult res{{}, std::vector<char>(static_cast<size_t>(scene.unit_count()), 0), env::VisitHeatmap(dims), {}, -1};

    RewardDict rdict;
    WinnerMemory winners;
    SearchContext ctx{&scene, &qnet, &reward, &rdict};
    if (auto* cnn = dynamic_cast<CnnRewardSource*>(&reward)) cnn->set_grid(scene);

    // windows whose lock labeled nothing (refiner rejected every point); the
    // search must not burn its budget relocking them
    std::unordered_set<voxel::WindowKey, voxel::WindowKeyHash> sterile;

    long long unlabeled = scene.occupied_count();
    env::EnvState state = env::EnvState::initial(dims);

    int stall = 0;
    double prev_qmax = -std::numeric_limits<double>::infinity();

    for (long is = 0; is < cfg.mis && unlabeled > 0; ++is) {
        const std::vector<float>& qv = qnet.q_values(ctx.window_content(state.window));
        double qmax = qv[static_cast<size_t>(greedy_action(qv).id)];
        // stall: the last decision did not lead to a state with a better Q
        if (qmax > prev_qmax + 1e-9)
            stall = 0;
        else
            ++stall;
        prev_qmax = qmax;
        bool walk = stall >= cfg.patience;
        ActionChoice choice = select_action(qv, state.window, winners, rng, cfg.winner_replay, walk);
        if (walk) {
            stall = 0;
            ++res.stats.random_walks;
        }
        if (choice.from_winner) ++res.stats.winner_uses;

        state = env::apply_action(state, choice.action);
        res.heatmap.record_visit(state.window);
        ++res.stats.steps;

        rewardnet::RewardVector rv = rdict.get(state.window, reward);
        bool locked = check_lock(rv, cfg.mth) && !sterile.count(voxel::key_of(state.window));
        res.stats.log.push_back(detail::step_line(res.stats.steps, choice, state, rewardnet::confidence(rv), locked));

        if (locked) {
            std::vector<size_t> units;
            if (refiner) {
                units = refiner(state.window);
            } else {
                for (int iz = state.window.lo[2]; iz < state.window.hi[2]; ++iz)
                    for (int iy = state.window.lo[1]; iy < state.window.hi[1]; ++iy)
                        for (int ix = state.window.lo[0]; ix < state.window.hi[0]; ++ix)
                            if (scene.at(ix, iy, iz).occupied()) units.push_back(scene.index(ix, iy, iz));
            }
            long long labeled_now = 0;
            for (size_t u : units) {
                if (res.labeled[u]) continue;
                if (!scene.units()[u].occupied()) continue;
                res.labeled[u] = 1;
                scene.clear_unit(u);
                ++labeled_now;
            }
            if (labeled_now == 0) {
                sterile.insert(voxel::key_of(state.window));
                continue;
            }
            sterile.clear();
            unlabeled -= labeled_now;
            ++res.stats.locks;
            if (res.first_lock_step < 0) res.first_lock_step = res.stats.steps;
            res.locks.push_back({state.window, res.stats.steps, rv.r1, labeled_now});
            res.stats.log.push_back("lock=1 step=" + std::to_string(res.stats.steps) + " window=" +
                                    voxel::to_string(state.window) + " r1=" + std::to_string(rv.r1) +
                                    " units=" + std::to_string(labeled_now));
            // the active scene changed: cached rewards and winners are stale
            rdict.clear();
            winners.clear();
            state = env::EnvState::initial(dims);
            stall = 0;
            prev_qmax = -std::numeric_limits<double>::infinity();
            continue;
        }

        for (int rs = 0; rs < cfg.mrs; ++rs) {
            for (int j = 0; j < cfg.k; ++j) {
                SimResult sim = simulate_nstep(state, ctx, cfg.mss, cfg.lambda);
                qnet.td_update(ctx.window_content(state.window), sim.first_action, sim.q_tg, cfg.eta);
                winners.offer(state.window, sim.first_action, std::abs(sim.first_q - sim.q_tg));
            }
        }
    }
    return res;
}

} // namespace voxseek::dqn
