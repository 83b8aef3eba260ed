#include <gtest/gtest.h>

#include "emaint/automaton.hpp"
#include "emaint/simulation.hpp"
#include "../support/fixtures.hpp"

using namespace emaint;

namespace {

struct Pump {
    ArMaintenanceModel model = import_model(fixture::pump_model());
    Pdfa pdfa = compile(model.task_model);
};

const Pump& pump() {
    static const Pump p;
    return p;
}

}  // namespace

TEST(SimRng, KnownEngineOutput) {
    // The standard pins the 10000th output of a default-seeded mt19937_64.
    std::mt19937_64 e;
    e.discard(9999);
    EXPECT_EQ(e(), 9981545732273789042ull);
    SimRng r(5);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(r.below(7), 7u);
    }
    EXPECT_EQ(r.pick({0, 0, 1, 0}), 2u);
}

TEST(Simulation, DurationsInBucket) {
    auto cfg = UserModelConfig::defaults();
    auto fast = durations_in_bucket(TimeBucket::Fast, 4, cfg);
    EXPECT_EQ(fast, (std::vector<std::int64_t>{0, 1, 2}));
    auto normal = durations_in_bucket(TimeBucket::Normal, 4, cfg);
    EXPECT_EQ(normal, (std::vector<std::int64_t>{3, 4, 5, 6}));
    auto slow = durations_in_bucket(TimeBucket::Slow, 4, cfg);
    EXPECT_EQ(slow, (std::vector<std::int64_t>{7, 8, 9, 10, 11, 12}));
    for (auto d : slow) EXPECT_EQ(bucket_time(static_cast<double>(d), 4, cfg), TimeBucket::Slow);
}

TEST(Simulation, SameSeedSameRun) {
    const auto& p = pump();
    auto a = format_simulation(simulate_user(p.model, p.pdfa, Level::Basic, 99, 40));
    auto b = format_simulation(simulate_user(p.model, p.pdfa, Level::Basic, 99, 40));
    EXPECT_EQ(a, b);
    EXPECT_NE(a, format_simulation(simulate_user(p.model, p.pdfa, Level::Basic, 100, 40)));
}

TEST(Simulation, TraceIsLegalAndConsistent) {
    const auto& p = pump();
    auto r = simulate_user(p.model, p.pdfa, Level::Advanced, 3, 60);
    ASSERT_EQ(r.trace.size(), 60u);
    StateId s = p.pdfa.initial();
    auto u = initial_user_state(p.model.user_config);
    std::size_t changes = 0;
    for (const auto& st : r.trace) {
        s = step(p.pdfa, s, st.action);  // throws if illegal
        if (st.action.kind == ActionKind::Complete) {
            ASSERT_TRUE(st.bucket && st.duration);
            const auto* leaf = find_leaf(p.model.task_model, st.action.node);
            EXPECT_EQ(bucket_time(static_cast<double>(*st.duration), static_cast<double>(leaf->nominal_duration),
                                  p.model.user_config),
                      *st.bucket);
            auto before = u.current_tier;
            u = observe(u, {st.action.node, st.help, *st.bucket}, p.model.user_config);
            changes += u.current_tier != before;
        } else {
            EXPECT_FALSE(st.bucket.has_value());
        }
        EXPECT_EQ(st.posterior, u.posterior);
        EXPECT_EQ(st.tier, u.current_tier);
        if (st.restarted) {
            EXPECT_TRUE(p.pdfa.is_accepting(s));
            s = p.pdfa.initial();
        }
    }
    EXPECT_EQ(changes, r.tier_changes);
    EXPECT_EQ(r.final_posterior, u.posterior);
}

TEST(Simulation, FirstStepAt) {
    SimulationResult r;
    r.initial_posterior = {0.25, 0.25, 0.25, 0.25};
    EXPECT_EQ(r.first_step_at(Level::None_), 0u);
    EXPECT_EQ(r.first_step_at(Level::Expert), std::nullopt);
    SimulationStep s;
    s.t = 1;
    s.posterior = {0.1, 0.1, 0.1, 0.7};
    r.trace.push_back(s);
    EXPECT_EQ(r.first_step_at(Level::Expert), 1u);
}

TEST(SimulationGolden, ExpertSeed7) {
    const auto& p = pump();
    auto text = format_simulation(simulate_user(p.model, p.pdfa, Level::Expert, 7, 30));
    EXPECT_EQ(text, fixture::read(EMAINT_SOURCE_DIR "/tests/golden/simulate_expert_seed7.txt"));
}
