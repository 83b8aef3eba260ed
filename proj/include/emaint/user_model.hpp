#pragma once

// Online expertise inference. The user's level is the hidden state of a
// four-state Markov chain; every completed step emits (help requested?,
// time bucket). The posterior is maintained with the forward recursion and
// drives the interface tier through a hysteresis rule.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emaint/diagnostic.hpp"
#include "emaint/levels.hpp"

namespace emaint {

enum class TimeBucket { Fast = 0, Normal = 1, Slow = 2 };

std::string_view to_string(TimeBucket b);
std::optional<TimeBucket> parse_bucket(std::string_view s);

using Distribution = std::array<double, kLevelCount>;

struct Observation {
    std::string leaf_id;
    bool help_requested = false;
    TimeBucket time_bucket = TimeBucket::Normal;

    bool operator==(const Observation&) const = default;
};

struct UserModelConfig {
    Distribution prior{0.25, 0.25, 0.25, 0.25};
    std::array<Distribution, kLevelCount> transition{};
    Distribution p_help{0.60, 0.35, 0.15, 0.05};
    std::array<std::array<double, 3>, kLevelCount> time_emission{};
    double fast_ratio = 0.75;
    double slow_ratio = 1.5;
    double switch_threshold = 0.6;
    std::uint32_t switch_streak = 2;

    /// Shipped defaults (see models/user_model.default.yaml).
    static UserModelConfig defaults();

    bool operator==(const UserModelConfig&) const = default;
};

/// Every violated config invariant, with `path` naming the offending field.
Diagnostics check_config(const UserModelConfig& cfg);

/// Structured-text (YAML) form of the config; the same keys appear under
/// `user_config:` in `.amm` files. Missing keys take default values.
UserModelConfig parse_user_config(std::string_view yaml_text);
std::string format_user_config(const UserModelConfig& cfg);

struct UserState {
    Distribution posterior{0.25, 0.25, 0.25, 0.25};
    InterfaceTier current_tier = InterfaceTier::Video;
    std::optional<Level> streak_level;
    std::uint32_t streak_count = 0;
    std::vector<Observation> history;

    bool operator==(const UserState&) const = default;
};

class DegenerateLikelihood : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

TimeBucket bucket_time(double duration, double nominal, const UserModelConfig& cfg);

/// Per-level likelihood of one observation.
Distribution emission(const Observation& o, const UserModelConfig& cfg);

/// One forward step plus history append and the tier hysteresis rule.
/// Throws DegenerateLikelihood (leaving `u` untouched) when every level
/// assigns the observation zero probability.
UserState observe(const UserState& u, const Observation& o, const UserModelConfig& cfg);

/// Argmax; ties go to the lower (more supported) level.
Level classify(const Distribution& posterior);

InterfaceTier select_tier(Level l);
Level level_of(InterfaceTier t);

/// One step more supportive (Text -> Visual -> Ar -> Video), saturating.
InterfaceTier more_supportive(InterfaceTier t);

UserState maybe_switch_tier(const UserState& u, const UserModelConfig& cfg);

/// Initial state: prior (optionally biased toward a known level, putting
/// 0.55 on it and spreading the rest uniformly) and the tier of its argmax.
UserState initial_user_state(const UserModelConfig& cfg, std::optional<Level> initial_level = {});

}  // namespace emaint
