#include "emaint/user_model.hpp"

#include <cmath>
#include <numeric>

#include <yaml-cpp/yaml.h>

#include "emaint/numeric_text.hpp"
#include "yaml_support.hpp"

namespace emaint {

std::string_view to_string(TimeBucket b) {
    switch (b) {
        case TimeBucket::Fast: return "fast";
        case TimeBucket::Normal: return "normal";
        case TimeBucket::Slow: return "slow";
    }
    return "normal";
}

std::optional<TimeBucket> parse_bucket(std::string_view s) {
    for (auto b : {TimeBucket::Fast, TimeBucket::Normal, TimeBucket::Slow})
        if (to_string(b) == s) return b;
    return std::nullopt;
}

UserModelConfig UserModelConfig::defaults() {
    UserModelConfig c;
    c.prior = {0.25, 0.25, 0.25, 0.25};
    c.transition = {{
        {0.90, 0.10, 0.00, 0.00},
        {0.05, 0.90, 0.05, 0.00},
        {0.00, 0.05, 0.90, 0.05},
        {0.00, 0.00, 0.10, 0.90},
    }};
    c.p_help = {0.60, 0.35, 0.15, 0.05};
    c.time_emission = {{
        {0.05, 0.40, 0.55},
        {0.15, 0.55, 0.30},
        {0.35, 0.50, 0.15},
        {0.60, 0.35, 0.05},
    }};
    c.fast_ratio = 0.75;
    c.slow_ratio = 1.5;
    c.switch_threshold = 0.6;
    c.switch_streak = 2;
    return c;
}

namespace {

constexpr double kTolerance = 1e-9;

template <std::size_t N>
bool is_distribution(const std::array<double, N>& v) {
    double sum = 0;
    for (double x : v) {
        if (!(x >= 0) || !std::isfinite(x)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= kTolerance;
}

}  // namespace

Diagnostics check_config(const UserModelConfig& cfg) {
    Diagnostics out;
    auto bad = [&](std::string path, std::string msg) {
        out.push_back({Severity::Error, "InvalidUserConfig", std::move(path), std::move(msg), std::nullopt});
    };
    if (!is_distribution(cfg.prior)) bad("prior", "prior must be a probability vector summing to 1");
    for (std::size_t i = 0; i < kLevelCount; ++i) {
        if (!is_distribution(cfg.transition[i]))
            bad("transition[" + std::to_string(i) + "]", "row must sum to 1 with entries >= 0");
        if (!is_distribution(cfg.time_emission[i]))
            bad("time_emission[" + std::to_string(i) + "]", "row must sum to 1 with entries >= 0");
        if (!(cfg.p_help[i] > 0 && cfg.p_help[i] < 1))
            bad("p_help[" + std::to_string(i) + "]", "help probability must lie in (0, 1)");
    }
    if (!(cfg.fast_ratio > 0)) bad("fast_ratio", "fast_ratio must be > 0");
    if (!(cfg.slow_ratio > cfg.fast_ratio)) bad("slow_ratio", "slow_ratio must exceed fast_ratio");
    if (!(cfg.switch_threshold >= 0 && cfg.switch_threshold <= 1))
        bad("switch_threshold", "switch_threshold must be a probability");
    if (cfg.switch_streak == 0) bad("switch_streak", "switch_streak must be >= 1");
    return out;
}

UserModelConfig parse_user_config(std::string_view yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml_text));
    } catch (const YAML::Exception& e) {
        throw std::runtime_error(std::string("user config is not valid YAML: ") + e.what());
    }
    Diagnostics diags;
    UserModelConfig cfg = detail::read_user_config(root, "", diags);
    if (!diags.empty()) {
        std::string msg = "invalid user config:";
        for (const auto& d : diags) msg += "\n  " + format_diagnostic(d);
        throw std::runtime_error(msg);
    }
    return cfg;
}

std::string format_user_config(const UserModelConfig& cfg) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    detail::write_user_config(out, cfg);
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

TimeBucket bucket_time(double duration, double nominal, const UserModelConfig& cfg) {
    double ratio = duration / nominal;
    if (ratio < cfg.fast_ratio) return TimeBucket::Fast;
    if (ratio > cfg.slow_ratio) return TimeBucket::Slow;
    return TimeBucket::Normal;
}

Distribution emission(const Observation& o, const UserModelConfig& cfg) {
    Distribution e{};
    for (std::size_t l = 0; l < kLevelCount; ++l) {
        double help = o.help_requested ? cfg.p_help[l] : 1.0 - cfg.p_help[l];
        e[l] = help * cfg.time_emission[l][static_cast<std::size_t>(o.time_bucket)];
    }
    return e;
}

UserState observe(const UserState& u, const Observation& o, const UserModelConfig& cfg) {
    Distribution e = emission(o, cfg);
    Distribution next{};
    for (std::size_t to = 0; to < kLevelCount; ++to) {
        double predicted = 0;
        for (std::size_t from = 0; from < kLevelCount; ++from)
            predicted += u.posterior[from] * cfg.transition[from][to];
        next[to] = predicted * e[to];
    }
    double z = std::accumulate(next.begin(), next.end(), 0.0);
    if (!(z > 0))
        throw DegenerateLikelihood("observation on '" + o.leaf_id +
                                   "' has zero likelihood under every level");
    for (double& x : next) x /= z;

    UserState out = u;
    out.posterior = next;
    out.history.push_back(o);
    return maybe_switch_tier(out, cfg);
}

Level classify(const Distribution& posterior) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < kLevelCount; ++l)
        if (posterior[l] > posterior[best]) best = l;
    return static_cast<Level>(best);
}

InterfaceTier select_tier(Level l) {
    switch (l) {
        case Level::Expert: return InterfaceTier::Text;
        case Level::Advanced: return InterfaceTier::Visual;
        case Level::Basic: return InterfaceTier::Ar;
        case Level::None_: return InterfaceTier::Video;
    }
    return InterfaceTier::Video;
}

Level level_of(InterfaceTier t) {
    switch (t) {
        case InterfaceTier::Text: return Level::Expert;
        case InterfaceTier::Visual: return Level::Advanced;
        case InterfaceTier::Ar: return Level::Basic;
        case InterfaceTier::Video: return Level::None_;
    }
    return Level::None_;
}

InterfaceTier more_supportive(InterfaceTier t) {
    switch (t) {
        case InterfaceTier::Text: return InterfaceTier::Visual;
        case InterfaceTier::Visual: return InterfaceTier::Ar;
        case InterfaceTier::Ar:
        case InterfaceTier::Video: return InterfaceTier::Video;
    }
    return InterfaceTier::Video;
}

UserState maybe_switch_tier(const UserState& u, const UserModelConfig& cfg) {
    UserState out = u;
    Level best = classify(u.posterior);
    double peak = u.posterior[index(best)];
    if (best == level_of(u.current_tier) || peak < cfg.switch_threshold) {
        out.streak_level.reset();
        out.streak_count = 0;
        return out;
    }
    if (out.streak_level == best) {
        ++out.streak_count;
    } else {
        out.streak_level = best;
        out.streak_count = 1;
    }
    if (out.streak_count >= cfg.switch_streak) {
        out.current_tier = select_tier(best);
        out.streak_level.reset();
        out.streak_count = 0;
    }
    return out;
}

UserState initial_user_state(const UserModelConfig& cfg, std::optional<Level> initial_level) {
    UserState u;
    u.posterior = cfg.prior;
    if (initial_level) {
        u.posterior.fill(0.45 / 3.0);
        u.posterior[index(*initial_level)] = 0.55;
    }
    u.current_tier = select_tier(classify(u.posterior));
    return u;
}

}  // namespace emaint
