#pragma once

#include <array>
#include <string>

#include "voxseek/voxel/window.hpp"

namespace voxseek::env {

using voxel::EyeWindow;
using voxel::Index3;

/// Discrete deformation of the eye window: one of six sides either expands or
/// contracts by one unit, plus a distinguished no-op. 13 actions total.
struct Action {
    int id = kNoOpId; // [0,12]

    static constexpr int kCount = 13;
    static constexpr int kNoOpId = 12;

    bool is_noop() const { return id == kNoOpId; }
    int axis() const { return id / 4; }          // 0=x 1=y 2=z
    bool positive_side() const { return (id / 2) % 2 == 0; }
    bool is_expand() const { return id % 2 == 0; }

    bool operator==(const Action& o) const = default;
};

inline std::string to_string(const Action& a) {
    if (a.is_noop()) return "noop";
    static const char* side[] = {"+x", "-x", "+y", "-y", "+z", "-z"};
    return std::string(a.is_expand() ? "expand" : "contract") + side[a.id / 2];
}

/// Environment state: the paper's DQN stores only window size and position.
struct EnvState {
    EyeWindow window;
    Index3 grid_dims{2, 2, 2};
    long step = 0;

    static EnvState initial(const Index3& dims) {
        return {EyeWindow::centered_half(dims), dims, 0};
    }
};

/// Apply an action, returning the new state. Expansions clamp at grid bounds
/// and contractions stop at side length 2; an absorbed action still counts as
/// a step. Pure: the input state is untouched.
inline EnvState apply_action(const EnvState& s, const Action& a) {
    EnvState next = s;
    ++next.step;
    if (a.is_noop()) return next;
    size_t axis = static_cast<size_t>(a.axis());
    EyeWindow& w = next.window;
    if (a.is_expand()) {
        if (a.positive_side()) {
            if (w.hi[axis] < s.grid_dims[axis]) ++w.hi[axis];
        } else {
            if (w.lo[axis] > 0) --w.lo[axis];
        }
    } else {
        if (w.hi[axis] - w.lo[axis] > 2) {
            if (a.positive_side())
                --w.hi[axis];
            else
                ++w.lo[axis];
        }
    }
    return next;
}

struct ActionEffect {
    Action action;
    bool effective = false; // false when bounds clamping would absorb it
};

/// All 13 actions annotated with whether they would change the window. The
/// no-op is never absorbed and reports effective.
inline std::array<ActionEffect, Action::kCount> legal_actions(const EnvState& s) {
    std::array<ActionEffect, Action::kCount> out;
    for (int id = 0; id < Action::kCount; ++id) {
        Action a{id};
        out[static_cast<size_t>(id)].action = a;
        if (a.is_noop()) {
            out[static_cast<size_t>(id)].effective = true;
            continue;
        }
        size_t axis = static_cast<size_t>(a.axis());
        const EyeWindow& w = s.window;
        bool eff;
        if (a.is_expand())
            eff = a.positive_side() ? w.hi[axis] < s.grid_dims[axis] : w.lo[axis] > 0;
        else
            eff = w.hi[axis] - w.lo[axis] > 2;
        out[static_cast<size_t>(id)].effective = eff;
    }
    return out;
}

} // namespace voxseek::env
