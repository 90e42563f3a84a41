#include <gtest/gtest.h>

#include <sstream>

#include "voxseek/env/env.hpp"
#include "voxseek/env/heatmap.hpp"
#include "voxseek/num/rng.hpp"

using namespace voxseek;
using namespace voxseek::env;

namespace {
constexpr int kExpandPosX = 0;
constexpr int kContractPosX = 1;
constexpr int kExpandNegX = 2;
constexpr int kContractNegX = 3;
} // namespace

TEST(Action, EncodingCoversAllDeformations) {
    int expands = 0, contracts = 0;
    for (int id = 0; id < Action::kCount; ++id) {
        Action a{id};
        if (a.is_noop()) continue;
        (a.is_expand() ? expands : contracts)++;
    }
    EXPECT_EQ(expands, 6);
    EXPECT_EQ(contracts, 6);
    EXPECT_EQ(to_string(Action{kExpandPosX}), "expand+x");
    EXPECT_EQ(to_string(Action{kContractNegX}), "contract-x");
    EXPECT_EQ(to_string(Action{Action::kNoOpId}), "noop");
}

TEST(ApplyAction, ExpandPosX) {
    EnvState s{{{2, 2, 2}, {6, 6, 6}}, {10, 10, 10}, 0};
    EnvState n = apply_action(s, Action{kExpandPosX});
    EXPECT_EQ(n.window, (EyeWindow{{2, 2, 2}, {7, 6, 6}}));
    EXPECT_EQ(n.step, 1);
    // purity: source state unchanged
    EXPECT_EQ(s.window, (EyeWindow{{2, 2, 2}, {6, 6, 6}}));
    EXPECT_EQ(s.step, 0);
}

TEST(ApplyAction, ContractAtMinSideIsAbsorbed) {
    EnvState s{{{4, 4, 4}, {6, 8, 8}}, {10, 10, 10}, 5};
    EnvState n = apply_action(s, Action{kContractPosX});
    EXPECT_EQ(n.window, s.window);
    EXPECT_EQ(n.step, 6);
}

TEST(ApplyAction, ExpandThenContractIsIdentityAwayFromBounds) {
    EnvState s{{{3, 3, 3}, {7, 7, 7}}, {12, 12, 12}, 0};
    for (int side = 0; side < 6; ++side) {
        Action expand{side * 2};
        Action contract{side * 2 + 1};
        EnvState round = apply_action(apply_action(s, expand), contract);
        EXPECT_EQ(round.window, s.window) << "side " << side;
    }
}

TEST(ApplyAction, NoOpLeavesWindow) {
    EnvState s{{{1, 1, 1}, {4, 4, 4}}, {6, 6, 6}, 0};
    EnvState n = apply_action(s, Action{Action::kNoOpId});
    EXPECT_EQ(n.window, s.window);
    EXPECT_EQ(n.step, 1);
}

TEST(LegalActions, InteriorWindowAllEffective) {
    EnvState s{{{2, 2, 2}, {6, 6, 6}}, {10, 10, 10}, 0};
    for (const ActionEffect& e : legal_actions(s)) EXPECT_TRUE(e.effective) << to_string(e.action);
}

TEST(LegalActions, FullGridOnlyContractionsAndNoOp) {
    EnvState s{{{0, 0, 0}, {8, 8, 8}}, {8, 8, 8}, 0};
    for (const ActionEffect& e : legal_actions(s)) {
        bool expect = e.action.is_noop() || !e.action.is_expand();
        EXPECT_EQ(e.effective, expect) << to_string(e.action);
    }
}

// Bound-arithmetic oracle over fixture states.
TEST(LegalActions, FlagsMatchDirectBoundChecks) {
    num::RngState rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        Index3 dims{rng.uniform_int(4, 12), rng.uniform_int(4, 12), rng.uniform_int(4, 12)};
        EyeWindow w;
        for (size_t a = 0; a < 3; ++a) {
            int lo = rng.uniform_int(0, dims[a] - 2);
            int hi = rng.uniform_int(lo + 2, dims[a]);
            w.lo[a] = lo;
            w.hi[a] = hi;
        }
        EnvState s{w, dims, 0};
        auto flags = legal_actions(s);
        for (const ActionEffect& e : flags) {
            EnvState n = apply_action(s, e.action);
            bool changed = !(n.window == s.window);
            if (e.action.is_noop())
                EXPECT_TRUE(e.effective);
            else
                EXPECT_EQ(e.effective, changed) << to_string(e.action);
        }
    }
}

// Property: window invariants hold after arbitrary action sequences.
TEST(ApplyAction, InvariantsHoldUnderRandomSequences) {
    num::RngState rng(32);
    for (int trial = 0; trial < 30; ++trial) {
        Index3 dims{rng.uniform_int(4, 20), rng.uniform_int(4, 20), rng.uniform_int(4, 20)};
        EnvState s = EnvState::initial(dims);
        ASSERT_TRUE(s.window.valid_within(dims));
        for (int step = 0; step < 500; ++step) {
            s = apply_action(s, Action{rng.uniform_int(0, Action::kCount - 1)});
            ASSERT_TRUE(s.window.valid_within(dims)) << voxel::to_string(s.window);
        }
        EXPECT_EQ(s.step, 500);
    }
}

TEST(Heatmap, SingleWindowVisit) {
    VisitHeatmap h({6, 6, 6});
    h.record_visit({{1, 1, 1}, {3, 3, 3}});
    EXPECT_EQ(h.total(), 8u);
    EXPECT_EQ(h.at(1, 1, 1), 1u);
    EXPECT_EQ(h.at(2, 2, 2), 1u);
    EXPECT_EQ(h.at(3, 3, 3), 0u);
}

TEST(Heatmap, DisjointVisitsPartition) {
    VisitHeatmap h({8, 8, 8});
    h.record_visit({{0, 0, 0}, {2, 2, 2}});
    h.record_visit({{4, 4, 4}, {6, 6, 6}});
    EXPECT_EQ(h.total(), 16u);
    EXPECT_EQ(h.at(0, 0, 0), 1u);
    EXPECT_EQ(h.at(4, 4, 4), 1u);
    EXPECT_EQ(h.at(2, 2, 2), 0u);
}

// Overlap oracle by direct enumeration.
TEST(Heatmap, OverlappingVisitsAccumulate) {
    VisitHeatmap h({6, 6, 6});
    EyeWindow a{{0, 0, 0}, {4, 4, 4}};
    EyeWindow b{{2, 2, 2}, {6, 6, 6}};
    h.record_visit(a);
    h.record_visit(b);
    for (int iz = 0; iz < 6; ++iz)
        for (int iy = 0; iy < 6; ++iy)
            for (int ix = 0; ix < 6; ++ix) {
                uint64_t expect = (a.contains(ix, iy, iz) ? 1u : 0u) + (b.contains(ix, iy, iz) ? 1u : 0u);
                ASSERT_EQ(h.at(ix, iy, iz), expect);
            }
}

// Property: heatmap total equals the sum of recorded window volumes.
TEST(Heatmap, TotalEqualsSumOfVolumes) {
    num::RngState rng(33);
    VisitHeatmap h({10, 10, 10});
    long long volumes = 0;
    EnvState s = EnvState::initial({10, 10, 10});
    for (int i = 0; i < 300; ++i) {
        s = apply_action(s, Action{rng.uniform_int(0, Action::kCount - 1)});
        h.record_visit(s.window);
        volumes += s.window.volume();
    }
    EXPECT_EQ(h.total(), static_cast<uint64_t>(volumes));
    EXPECT_EQ(h.visits(), 300u);
}

TEST(Heatmap, TextAndCsvExports) {
    VisitHeatmap h({3, 2, 2});
    h.record_visit({{0, 0, 0}, {2, 2, 2}});
    std::ostringstream text;
    write_heatmap_text(text, h);
    std::string expect = "3 2 2\n";
    // x-fastest: z0y0: 1 1 0, z0y1: 1 1 0, z1y0: 1 1 0, z1y1: 1 1 0
    for (int i = 0; i < 4; ++i) expect += "1\n1\n0\n";
    EXPECT_EQ(text.str(), expect);

    std::ostringstream csv;
    write_heatmap_slice_csv(csv, h, 0);
    EXPECT_EQ(csv.str(), "1,1,0\n1,1,0\n");
    EXPECT_THROW(write_heatmap_slice_csv(csv, h, 5), BoundsError);
}
