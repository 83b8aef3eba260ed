// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>

#include "emaint/automaton.hpp"
#include "emaint/maintenance_model.hpp"
#include "emaint/simulation.hpp"
#include "emaint/task_model.hpp"
#include "emaint/user_model.hpp"
#include "../support/fixtures.hpp"
#include "../support/http_harness.hpp"
#include "../support/oracles.hpp"

using namespace emaint;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

const ArMaintenanceModel& pump() {
    static const ArMaintenanceModel m = import_model(fixture::pump_model());
    return m;
}

const Pdfa& pump_pdfa() {
    static const Pdfa p = compile(pump().task_model);
    return p;
}

Outcome pdfa_well_formed() {
    std::mt19937_64 rng(20240601);
    std::size_t states = 0;
    for (int i = 0; i < 200; ++i) {
        auto m = oracle::random_task_model(rng, oracle::TreeShape{12, 4, 3});
        auto p = compile(m);
        states += p.state_count();
        if (auto bad = check_well_formed(p); !bad.empty())
            return {false, "model " + std::to_string(i) + ": " + bad.front()};
        for (std::uint32_t s = 0; s < p.state_count(); ++s) {
            if (p.is_accepting(StateId{s})) continue;
            double sum = 0;
            for (const auto& e : enabled(p, StateId{s})) sum += e.probability.value_or(0);
            if (std::abs(sum - 1.0) > 1e-9) return {false, "model " + std::to_string(i) + " state " + std::to_string(s)};
        }
    }
    return {true, "200 models, " + std::to_string(states) + " states"};
}

Outcome semantics_oracle() {
    std::mt19937_64 rng(777);
    int checked = 0, rejected = 0;
    std::size_t traces = 0;
    while (checked < 500) {
        auto m = oracle::random_task_model(rng, oracle::TreeShape{8, 4, 3});
        auto profile = oracle::trace_length_profile(m.root);
        double count = 0;
        for (const auto& [l, c] : profile) count += c;
        if (profile.rbegin()->first > 20 || count > 20'000) {
            ++rejected;
            continue;
        }
        auto want = oracle::traces(m.root);
        auto len = oracle::max_length(want);
        if (language(compile(m), len) != want) return {false, "mismatch:\n" + serialize_model(m)};
        traces += want.size();
        ++checked;
    }
    return {true, "500 models, " + std::to_string(traces) + " traces, " + std::to_string(rejected) +
                      " skipped (longer than 20 actions or over 20000 traces)"};
}

Outcome hmm_oracle() {
    // Observations come from a fixed three-leaf procedure; the leaf cycles a, b, c.
    const auto cfg = UserModelConfig::defaults();
    const char* ids[] = {"a", "b", "c"};
    std::size_t sequences = 0;
    double worst = 0;
    auto check = [&](const std::vector<Observation>& obs) {
        UserState u = initial_user_state(cfg);
        for (const auto& o : obs) u = observe(u, o, cfg);
        auto want = oracle::brute_force_posterior(obs, cfg);
        for (std::size_t l = 0; l < 4; ++l) worst = std::max(worst, std::abs(u.posterior[l] - want[l]));
        ++sequences;
    };
    auto symbol = [&](std::size_t i, std::size_t s) { return Observation{ids[i % 3], s >= 3, static_cast<TimeBucket>(s % 3)}; };
    for (std::size_t n = 0; n <= 6; ++n) {
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= 6;
        for (std::size_t code = 0; code < total; ++code) {
            std::vector<Observation> obs;
            for (std::size_t i = 0, x = code; i < n; ++i, x /= 6) obs.push_back(symbol(i, x % 6));
            check(obs);
        }
    }
    std::mt19937_64 rng(8);
    for (std::size_t n = 7; n <= 8; ++n)
        for (int k = 0; k < 1000; ++k) {
            std::vector<Observation> obs;
            for (std::size_t i = 0; i < n; ++i) obs.push_back(symbol(i, rng() % 6));
            check(obs);
        }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1e", worst);
    return {worst <= 1e-9, std::to_string(sequences) + " sequences (all up to length 6, 1000 each of length 7 and 8), max error " + buf};
}

Outcome convergence() {
    int expert = 0, none = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto r = simulate_user(pump(), pump_pdfa(), Level::Expert, seed, 15);
        expert += r.first_step_at(Level::Expert).has_value();
        // The uniform prior already shows Video, so the novice check asks for
        // a step where the posterior backs that tier past the switch threshold.
        auto n = simulate_user(pump(), pump_pdfa(), Level::None_, seed, 15);
        double threshold = pump().user_config.switch_threshold;
        none += std::any_of(n.trace.begin(), n.trace.end(), [&](const SimulationStep& s) {
            return s.tier == InterfaceTier::Video && classify(s.posterior) == Level::None_ &&
                   s.posterior[index(Level::None_)] >= threshold;
        });
    }
    return {expert >= 95 && none >= 95,
            "expert argmax reached in " + std::to_string(expert) + "/100, video backed by none >= threshold in " +
                std::to_string(none) + "/100"};
}

Outcome hysteresis() {
    std::string detail;
    bool ok = true;
    for (auto level : kAllLevels) {
        int calm = 0;
        std::size_t worst = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            auto changes = simulate_user(pump(), pump_pdfa(), level, seed, 50).tier_changes;
            calm += changes <= 2;
            worst = std::max(worst, changes);
        }
        ok = ok && calm >= 95;
        detail += (detail.empty() ? "" : ", ") + std::string(to_string(level)) + " " + std::to_string(calm) +
                  "/100 (max " + std::to_string(worst) + ")";
    }
    return {ok, detail};
}

Outcome round_trips() {
    std::mt19937_64 rng(4242);
    for (int i = 0; i < 300; ++i) {
        auto m = oracle::random_task_model(rng, oracle::TreeShape{16, 5, 4});
        if (parse_model(serialize_model(m)) != m) return {false, "task model " + std::to_string(i)};
    }
    for (int i = 0; i < 200; ++i) {
        auto m = oracle::random_maintenance_model(rng);
        try {
            if (import_model(export_model(m)) != m) return {false, "maintenance model " + std::to_string(i)};
        } catch (const ModelImportError& e) {
            return {false, "maintenance model " + std::to_string(i) + ": " + format_diagnostic(e.diagnostics().front())};
        }
    }
    if (import_model(export_model(pump())) != pump()) return {false, "fixture"};
    auto dot = to_dot(pump_pdfa(), pump().id);
    if (dot != fixture::read(EMAINT_SOURCE_DIR "/tests/golden/hp200_seal.dot") || dot != to_dot(compile(pump().task_model), pump().id))
        return {false, "DOT differs from golden"};
    auto sim = format_simulation(simulate_user(pump(), pump_pdfa(), Level::Expert, 7, 30));
    if (sim != fixture::read(EMAINT_SOURCE_DIR "/tests/golden/simulate_expert_seed7.txt"))
        return {false, "simulation differs from golden"};
    return {true, "300 task models, 200 maintenance models, DOT and simulation goldens"};
}

Outcome end_to_end() {
    fixture::TempDir dir;
    std::string sid;
    Json finished, fetched;
    {
        fixture::LiveServer server({dir.path(), std::nullopt, {}, 10});
        auto c = server.client();
        auto call = [&](const std::string& path, const Json& body, int want) {
            auto res = c.Post(path, body.dump(), "application/json");
            if (!res || res->status != want)
                throw std::runtime_error(path + " -> " + (res ? std::to_string(res->status) + " " + res->body : "no response"));
            return Json::parse(res->body);
        };
        auto res = c.Post("/api/v1/models", fixture::pump_model(), "application/yaml");
        if (!res || res->status != 201) return {false, "import failed"};
        sid = call("/api/v1/sessions", {{"model", "hp200_seal"}, {"user", "tech_rui"}}, 201)["session"];
        std::string base = "/api/v1/sessions/" + sid;
        auto danger = call(base + "/signals", {{"signals", {{"line_pressure", 35}, {"fluid_temp", 25}}}}, 200);
        if (danger["alerts"].size() != 1 || danger["alerts"][0]["severity"] != "danger") return {false, "no danger alert"};
        call(base + "/help", {{"leaf", "lockout"}}, 200);
        auto complete = [&](const char* leaf, int s) { call(base + "/complete", {{"leaf", leaf}, {"duration", s}}, 200); };
        complete("lockout", 140);
        complete("gather_tools", 80);
        complete("drain_fluid", 290);
        complete("remove_old_seal", 400);
        complete("check_shaft", 170);
        complete("confirm_clean", 70);
        complete("fit_cartridge_seal", 310);
        call(base + "/problem", {{"category", "incorrect_documentation"}, {"leaf", "fit_cartridge_seal"},
                                 {"note", "collar torque missing from manual"}}, 201);
        complete("replace_wear_ring", 330);
        complete("torque_bolts", 160);
        complete("torque_bolts", 120);
        call(base + "/exit-loop", {{"node", "torque_pass"}}, 200);
        complete("pressure_test", 610);
        auto fin = call(base + "/finish", Json::object(), 200);
        finished = fin["report"];
        auto got = c.Get(base + "/report");
        if (!got || got->status != 200) return {false, "report fetch failed"};
        fetched = Json::parse(got->body);
    }
    const Json& r = finished;
    std::vector<std::string> missing;
    if (r["user"]["id"] != "tech_rui" || r["user"]["name"] != "Rui Costa") missing.push_back("user");
    if (!r["final_level"].is_string()) missing.push_back("final level");
    std::int64_t sum = 0;
    for (const auto& d : r["durations"]) sum += d["seconds"].get<std::int64_t>();
    std::int64_t per_leaf = 0;
    for (const auto& [k, v] : r["per_leaf_durations"].items()) per_leaf += v.get<std::int64_t>();
    if (r["durations"].size() != 11 || sum != r["total_duration"] || per_leaf != sum) missing.push_back("durations");
    bool alert = false, help = false;
    for (const auto& a : r["contexts"]) alert = alert || (a["rule"] == "residual_pressure" && a["severity"] == "danger");
    for (const auto& x : r["extra_information"]) help = help || (x["kind"] == "help" && x["leaf"] == "lockout");
    if (!alert) missing.push_back("alert");
    if (!help) missing.push_back("help access");
    if (r["problems"].size() != 1 || r["problems"][0]["category"] != "incorrect_documentation") missing.push_back("problem");
    if (!missing.empty()) {
        std::string m;
        for (const auto& x : missing) m += " " + x;
        return {false, "report lacks:" + m};
    }
    SessionService reopened({dir.path(), std::nullopt, {}, 10});
    if (reopened.report_from_log(sid) != finished || fetched != finished) return {false, "regenerated report differs"};
    auto outbox = fixture::read(dir.path() / "outbox" / (sid + ".report.json"));
    if (Json::parse(outbox) != finished) return {false, "outbox copy differs"};
    return {true, "11 steps, total " + std::to_string(sum) + " s, final level " + r["final_level"].get<std::string>()};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"pdfa-well-formedness", 30, pdfa_well_formed},
        {"semantics-oracle", 60, semantics_oracle},
        {"hmm-oracle", 10, hmm_oracle},
        {"adaptation-convergence", 20, convergence},
        {"tier-hysteresis", 0, hysteresis},
        {"round-trips", 0, round_trips},
        {"end-to-end-session", 0, end_to_end},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0 && secs > c.budget_s) {
            o.ok = false;
            o.detail += "; over the " + std::to_string(static_cast<int>(c.budget_s)) + " s budget";
        }
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.2fs", secs);
        std::cout << (o.ok ? "PASS " : "FAIL ") << c.name << " (" << timing << ") " << o.detail << "\n" << std::flush;
        failed += !o.ok;
    }
    return failed == 0 ? 0 : 1;
}
