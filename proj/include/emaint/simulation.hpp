#pragma once

// A synthetic technician of known expertise walking a compiled procedure,
// used to exercise the expertise inference end to end.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "emaint/automaton.hpp"
#include "emaint/maintenance_model.hpp"
#include "emaint/user_model.hpp"

namespace emaint {

/// std::mt19937_64 is fully specified by the standard; the distributions are
/// written out here because the standard ones are not.
class SimRng {
public:
    explicit SimRng(std::uint64_t seed);
    double uniform();                                   // [0, 1)
    std::uint64_t below(std::uint64_t n);               // [0, n)
    std::size_t pick(const std::vector<double>& weights);  // index by weight

private:
    std::mt19937_64 engine_;
};

struct SimulationStep {
    std::size_t t = 0;  // 1-based
    Action action;
    bool help = false;
    std::optional<TimeBucket> bucket;       // Complete actions only
    std::optional<std::int64_t> duration;   // seconds, Complete actions only
    Distribution posterior{};
    InterfaceTier tier = InterfaceTier::Video;
    bool tier_changed = false;
    bool restarted = false;  // procedure finished and started over after this step
};

struct SimulationResult {
    Level true_level = Level::None_;
    std::uint64_t seed = 0;
    Distribution initial_posterior{};
    InterfaceTier initial_tier = InterfaceTier::Video;
    std::vector<SimulationStep> trace;
    Distribution final_posterior{};
    Level final_level = Level::None_;
    InterfaceTier final_tier = InterfaceTier::Video;
    std::size_t tier_changes = 0;
    std::size_t restarts = 0;

    /// First step after which classify(posterior) == l; 0 when the prior
    /// already does, nullopt when never.
    std::optional<std::size_t> first_step_at(Level l) const;
};

/// Every sampled action is one step. Complete actions emit an observation:
/// help ~ Bernoulli(p_help[level]), bucket ~ time_emission[level], and an
/// integer duration inside that bucket for the leaf's nominal time. When the
/// procedure completes it starts over.
SimulationResult simulate_user(const ArMaintenanceModel& m, const Pdfa& p, Level true_level,
                               std::uint64_t seed, std::size_t max_steps);

/// Smallest-first list of integer durations whose bucket is `b`, within
/// [0, 3 * nominal]; empty when the bucket contains no integer.
std::vector<std::int64_t> durations_in_bucket(TimeBucket b, std::int64_t nominal,
                                              const UserModelConfig& cfg);

/// `t=<k> action=<a> help=<0|1> bucket=<b> posterior=(..)` lines, preceded by
/// the prior and followed by a summary.
std::string format_simulation(const SimulationResult& r);

}  // namespace emaint
