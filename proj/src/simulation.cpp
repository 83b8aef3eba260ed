#include "emaint/simulation.hpp"

#include "emaint/numeric_text.hpp"

namespace emaint {

SimRng::SimRng(std::uint64_t seed) : engine_(seed) {}

double SimRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t SimRng::below(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
}

std::size_t SimRng::pick(const std::vector<double>& weights) {
    double total = 0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

std::optional<std::size_t> SimulationResult::first_step_at(Level l) const {
    if (classify(initial_posterior) == l) return 0;
    for (const auto& s : trace)
        if (classify(s.posterior) == l) return s.t;
    return std::nullopt;
}

std::vector<std::int64_t> durations_in_bucket(TimeBucket b, std::int64_t nominal, const UserModelConfig& cfg) {
    std::vector<std::int64_t> out;
    for (std::int64_t d = 0; d <= 3 * nominal; ++d)
        if (bucket_time(static_cast<double>(d), static_cast<double>(nominal), cfg) == b) out.push_back(d);
    return out;
}

SimulationResult simulate_user(const ArMaintenanceModel& m, const Pdfa& p, Level true_level,
                               std::uint64_t seed, std::size_t max_steps) {
    const auto& cfg = m.user_config;
    SimRng rng(seed);
    SimulationResult r;
    r.true_level = true_level;
    r.seed = seed;
    UserState user = initial_user_state(cfg);
    r.initial_posterior = user.posterior;
    r.initial_tier = user.current_tier;
    StateId state = p.initial();
    const auto lv = index(true_level);
    const auto& row = cfg.time_emission[lv];
    std::vector<double> bucket_weights(row.begin(), row.end());

    for (std::size_t t = 1; t <= max_steps; ++t) {
        auto out = p.transitions(state);
        std::vector<double> weights;
        for (const auto& tr : out) weights.push_back(tr.probability);
        const Transition& chosen = out[rng.pick(weights)];

        SimulationStep s;
        s.t = t;
        s.action = chosen.action;
        if (chosen.action.kind == ActionKind::Complete) {
            s.help = rng.uniform() < cfg.p_help[lv];
            auto bucket = static_cast<TimeBucket>(rng.pick(bucket_weights));
            s.bucket = bucket;
            const auto* leaf = find_leaf(m.task_model, chosen.action.node);
            auto candidates = durations_in_bucket(bucket, leaf ? leaf->nominal_duration : 1, cfg);
            if (!candidates.empty()) s.duration = candidates[rng.below(candidates.size())];
            InterfaceTier before = user.current_tier;
            user = observe(user, Observation{chosen.action.node, s.help, bucket}, cfg);
            s.tier_changed = user.current_tier != before;
            if (s.tier_changed) ++r.tier_changes;
        }
        state = chosen.target;
        if (p.is_accepting(state) && p.transitions(state).empty()) {
            state = p.initial();
            s.restarted = true;
            ++r.restarts;
        }
        s.posterior = user.posterior;
        s.tier = user.current_tier;
        r.trace.push_back(std::move(s));
    }
    r.final_posterior = user.posterior;
    r.final_level = classify(user.posterior);
    r.final_tier = user.current_tier;
    return r;
}

namespace {

std::string posterior_text(const Distribution& d) {
    std::string s = "(";
    for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + format_fixed(d[i], 4);
    return s + ")";
}

}  // namespace

std::string format_simulation(const SimulationResult& r) {
    std::string out = "level=" + std::string(to_string(r.true_level)) + " seed=" + std::to_string(r.seed) +
                      " steps=" + std::to_string(r.trace.size()) + "\n";
    out += "t=0 prior posterior=" + posterior_text(r.initial_posterior) +
           " tier=" + std::string(to_string(r.initial_tier)) + "\n";
    for (const auto& s : r.trace) {
        out += "t=" + std::to_string(s.t) + " action=" + to_string(s.action) + " help=" + (s.help ? "1" : "0") +
               " bucket=" + (s.bucket ? std::string(to_string(*s.bucket)) : std::string("-")) +
               " posterior=" + posterior_text(s.posterior);
        if (s.tier_changed) out += " tier=" + std::string(to_string(s.tier));
        if (s.restarted) out += " restart";
        out += "\n";
    }
    out += "final level=" + std::string(to_string(r.final_level)) +
           " tier=" + std::string(to_string(r.final_tier)) + " posterior=" + posterior_text(r.final_posterior) +
           " switches=" + std::to_string(r.tier_changes) + "\n";
    return out;
}

}  // namespace emaint
