#include "oracles.hpp"

#include <algorithm>

namespace oracle {

using namespace emaint;

namespace {

std::set<Trace> concat(const std::set<Trace>& a, const std::set<Trace>& b) {
    std::set<Trace> out;
    for (const auto& x : a)
        for (const auto& y : b) {
            Trace t = x;
            t.insert(t.end(), y.begin(), y.end());
            out.insert(std::move(t));
        }
    return out;
}

void interleave(const Trace& a, std::size_t i, const Trace& b, std::size_t j, Trace& cur, std::set<Trace>& out) {
    if (i == a.size() && j == b.size()) {
        out.insert(cur);
        return;
    }
    if (i < a.size()) {
        cur.push_back(a[i]);
        interleave(a, i + 1, b, j, cur, out);
        cur.pop_back();
    }
    if (j < b.size()) {
        cur.push_back(b[j]);
        interleave(a, i, b, j + 1, cur, out);
        cur.pop_back();
    }
}

std::set<Trace> shuffle(const std::set<Trace>& a, const std::set<Trace>& b) {
    std::set<Trace> out;
    Trace cur;
    for (const auto& x : a)
        for (const auto& y : b) interleave(x, 0, y, 0, cur, out);
    return out;
}

}  // namespace

std::set<Trace> traces(const TaskNode& n) {
    if (n.is_leaf()) return {Trace{Action::complete(n.leaf().id)}};
    const auto& c = n.composite();
    std::vector<std::set<Trace>> kids;
    for (const auto& ch : c.children) kids.push_back(traces(ch));
    switch (c.op) {
        case TaskOperator::Seq: {
            std::set<Trace> acc = kids[0];
            for (std::size_t i = 1; i < kids.size(); ++i) acc = concat(acc, kids[i]);
            return acc;
        }
        case TaskOperator::Choice: {
            std::set<Trace> acc;
            for (const auto& k : kids) acc.insert(k.begin(), k.end());
            return acc;
        }
        case TaskOperator::Par: {
            std::set<Trace> acc = kids[0];
            for (std::size_t i = 1; i < kids.size(); ++i) acc = shuffle(acc, kids[i]);
            return acc;
        }
        case TaskOperator::Disable: {
            std::set<Trace> prefixes;
            for (const auto& t : kids[0])
                for (std::size_t k = 0; k <= t.size(); ++k) prefixes.insert(Trace(t.begin(), t.begin() + k));
            return concat(prefixes, kids[1]);
        }
        case TaskOperator::Opt: {
            std::set<Trace> acc = kids[0];
            acc.insert(Trace{Action::skip(c.id)});
            return acc;
        }
        case TaskOperator::Loop: {
            std::set<Trace> acc, reps = kids[0];
            const std::set<Trace> exit{Trace{Action::exit_loop(c.id)}};
            for (std::uint32_t j = 1; j <= *c.loop_bound; ++j) {
                auto done = concat(reps, exit);
                acc.insert(done.begin(), done.end());
                if (j < *c.loop_bound) reps = concat(reps, kids[0]);
            }
            return acc;
        }
    }
    return {};
}

std::size_t max_length(const std::set<Trace>& ts) {
    std::size_t m = 0;
    for (const auto& t : ts) m = std::max(m, t.size());
    return m;
}

namespace {

void walk_paths(const UserModelConfig& cfg, const std::vector<std::array<double, 4>>& e, std::size_t t,
                std::size_t prev, double w, Distribution& total) {
    if (t == e.size()) {
        total[prev] += w;
        return;
    }
    for (std::size_t x = 0; x < 4; ++x) walk_paths(cfg, e, t + 1, x, w * cfg.transition[prev][x] * e[t][x], total);
}

}  // namespace

namespace {

using Profile = std::map<std::size_t, double>;

Profile convolve(const Profile& a, const Profile& b) {
    Profile out;
    for (const auto& [la, ca] : a)
        for (const auto& [lb, cb] : b) out[la + lb] += ca * cb;
    return out;
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

}  // namespace

std::map<std::size_t, double> trace_length_profile(const TaskNode& n) {
    if (n.is_leaf()) return {{1, 1.0}};
    const auto& c = n.composite();
    std::vector<Profile> kids;
    for (const auto& ch : c.children) kids.push_back(trace_length_profile(ch));
    Profile acc;
    switch (c.op) {
        case TaskOperator::Seq:
            acc = kids[0];
            for (std::size_t i = 1; i < kids.size(); ++i) acc = convolve(acc, kids[i]);
            break;
        case TaskOperator::Choice:
            for (const auto& k : kids)
                for (const auto& [l, cnt] : k) acc[l] += cnt;
            break;
        case TaskOperator::Par:
            acc = kids[0];
            for (std::size_t i = 1; i < kids.size(); ++i) {
                Profile next;
                for (const auto& [la, ca] : acc)
                    for (const auto& [lb, cb] : kids[i]) next[la + lb] += ca * cb * binomial(la + lb, lb);
                acc = std::move(next);
            }
            break;
        case TaskOperator::Disable: {
            Profile prefixes;
            for (const auto& [l, cnt] : kids[0])
                for (std::size_t k = 0; k <= l; ++k) prefixes[k] += cnt;
            acc = convolve(prefixes, kids[1]);
            break;
        }
        case TaskOperator::Opt:
            acc = kids[0];
            acc[1] += 1;
            break;
        case TaskOperator::Loop: {
            Profile reps = kids[0];
            for (std::uint32_t j = 1; j <= *c.loop_bound; ++j) {
                for (const auto& [l, cnt] : reps) acc[l + 1] += cnt;
                if (j < *c.loop_bound) reps = convolve(reps, kids[0]);
            }
            break;
        }
    }
    return acc;
}

Distribution brute_force_posterior(const std::vector<Observation>& obs, const UserModelConfig& cfg) {
    const std::size_t n = obs.size();
    std::vector<std::array<double, 4>> e(n);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t l = 0; l < 4; ++l)
            e[t][l] = (obs[t].help_requested ? cfg.p_help[l] : 1.0 - cfg.p_help[l]) *
                      cfg.time_emission[l][static_cast<std::size_t>(obs[t].time_bucket)];

    // Depth-first over x_0..x_n; each path's weight is the product along it.
    Distribution total{};
    for (std::size_t x0 = 0; x0 < 4; ++x0) walk_paths(cfg, e, 0, x0, cfg.prior[x0], total);
    double z = total[0] + total[1] + total[2] + total[3];
    for (auto& v : total) v /= z;
    return total;
}

// ------------------------------------------------------------ generators

namespace {

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::size_t between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p = 0.5) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

struct TreeGen {
    std::mt19937_64& rng;
    TreeShape shape;
    std::size_t leaf_n = 0, node_n = 0;

    TaskNode leaf() {
        LeafTask l;
        l.id = "l" + std::to_string(++leaf_n);
        if (coin(rng)) l.description = random_text(rng);
        l.nominal_duration = static_cast<std::int64_t>(between(rng, 1, 600));
        l.weight = pick(rng, std::vector<double>{1, 1, 2, 0.25, 3, 1.5});
        return TaskNode{l};
    }

    TaskNode node(std::size_t depth, std::size_t budget) {
        if (depth >= shape.max_depth || (budget == 1 && coin(rng, 0.6)) || (budget <= 2 && coin(rng, 0.2))) return leaf();
        std::vector<TaskOperator> ops{TaskOperator::Opt, TaskOperator::Loop};
        if (budget >= 2)
            ops.insert(ops.end(), {TaskOperator::Seq, TaskOperator::Seq, TaskOperator::Choice, TaskOperator::Par,
                                   TaskOperator::Disable});
        CompositeTask c;
        c.op = pick(rng, ops);
        c.id = "n" + std::to_string(++node_n);
        c.weight = pick(rng, std::vector<double>{1, 1, 0.5, 2});
        std::size_t k = 1;
        if (c.op == TaskOperator::Disable) k = 2;
        else if (c.op != TaskOperator::Opt && c.op != TaskOperator::Loop) k = between(rng, 2, std::min<std::size_t>(4, budget));
        if (c.op == TaskOperator::Loop) c.loop_bound = static_cast<std::uint32_t>(between(rng, 1, shape.max_loop_bound));
        // Every child gets one leaf; the rest of the budget is spread at random.
        std::vector<std::size_t> share(k, 1);
        std::size_t spare = budget - k;
        for (std::size_t i = 0; i < k && spare; ++i) {
            std::size_t extra = between(rng, 0, spare);
            share[i] += extra;
            spare -= extra;
        }
        for (std::size_t i = 0; i < k; ++i) c.children.push_back(node(depth + 1, share[i]));
        return TaskNode{c};
    }
};

std::string asset_key(std::mt19937_64& rng) {
    return pick(rng, std::vector<std::string>{"pump.jpg", "valve_03.png", "clip-7.mp4", "overlay.glb", "a"}) +
           (coin(rng) ? std::string("") : std::to_string(between(rng, 0, 99)));
}

}  // namespace

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> parts{
        "Remove bolt", "check: pressure", "# not a comment", "\"quoted\"", "it's",  "a\\b",
        "- dash",      "[list]",          "{map}",           "yes",            "null", "~",
        "12.50",       "  padded ",       "tab\there",       "two\nlines",     "ø ring µm", "@at",
        "50%",         "&anchor",         "*alias",          "!tag",           "| pipe", "> fold",
        "key: value",  "true",            "0x1F",            ":",              "",
    };
    std::string s;
    std::size_t n = between(rng, 1, 3);
    for (std::size_t i = 0; i < n; ++i) s += pick(rng, parts);
    return s;
}

TaskModel random_task_model(std::mt19937_64& rng, const TreeShape& shape) {
    TreeGen g{rng, shape};
    TaskModel m;
    m.name = coin(rng) ? random_text(rng) : "untitled";
    m.version = std::to_string(between(rng, 1, 9));
    std::size_t budget = between(rng, 1, shape.max_leaves);
    // The root is always composite so generated models have structure.
    std::size_t saved = shape.max_depth;
    m.root = g.node(0, budget);
    while (m.root.is_leaf() && saved > 0) {
        g.leaf_n = 0;
        g.node_n = 0;
        m.root = g.node(0, budget);
    }
    return m;
}

ArMaintenanceModel random_maintenance_model(std::mt19937_64& rng) {
    ArMaintenanceModel m;
    m.id = "m" + std::to_string(between(rng, 1, 999));
    m.name = coin(rng) ? random_text(rng) : "";
    m.task_model = random_task_model(rng, TreeShape{6, 3, 2});
    auto ls = leaves(m.task_model);

    m.equipment.id = "eq" + std::to_string(between(rng, 1, 9));
    m.equipment.name = random_text(rng);
    for (std::size_t i = 0, n = between(rng, 0, 2); i < n; ++i) m.equipment.documentation.push_back(random_text(rng));
    for (std::size_t i = 0, n = between(rng, 0, 3); i < n; ++i) {
        Part p{"p" + std::to_string(i), random_text(rng), {}};
        if (coin(rng)) p.tools = {random_text(rng), "wrench"};
        m.equipment.parts.push_back(p);
    }
    if (coin(rng)) m.equipment.media["front"] = asset_key(rng);
    if (!m.equipment.parts.empty() && coin(rng)) m.equipment.target_part = m.equipment.parts.front().id;
    m.environment.id = "env" + std::to_string(between(rng, 1, 9));
    for (std::size_t i = 0, n = between(rng, 0, 2); i < n; ++i) m.environment.safety_notes.push_back(random_text(rng));
    if (coin(rng)) m.environment.neighbors.push_back({"nb1", random_text(rng), coin(rng) ? random_text(rng) : ""});

    for (std::size_t i = 0, n = between(rng, 0, 3); i < n; ++i) {
        UserRecord u{"u" + std::to_string(i), random_text(rng), coin(rng) ? UserRole::Engineer : UserRole::Technician, {}};
        if (coin(rng)) u.initial_level = pick(rng, std::vector<Level>{Level::None_, Level::Basic, Level::Advanced, Level::Expert});
        m.users.push_back(u);
    }

    std::vector<std::string> signals;
    for (std::size_t i = 0, n = between(rng, 0, 2); i < n; ++i) {
        ExternalSource s;
        s.id = "src" + std::to_string(i);
        s.kind = pick(rng, std::vector<SourceKind>{SourceKind::Sensor, SourceKind::EMaintenanceService, SourceKind::Wsn});
        s.transport = coin(rng) ? SourceTransport::HttpPush : SourceTransport::ReplayFile;
        for (std::size_t j = 0, k = between(rng, 1, 2); j < k; ++j) {
            s.signals.push_back("sig" + std::to_string(i) + "_" + std::to_string(j));
            signals.push_back(s.signals.back());
        }
        m.sources.push_back(s);
    }
    if (!signals.empty() && coin(rng)) {
        DerivedSignal d;
        d.name = "derived_a";
        d.input = signals.front();
        d.window = static_cast<std::uint32_t>(between(rng, 1, 10));
        if (coin(rng)) {
            d.function = DerivedSignal::Function::ThresholdCount;
            d.threshold = pick(rng, std::vector<double>{0.1, 42, -3.25, 1e6});
        }
        m.derived_signals.push_back(d);
        signals.push_back(d.name);
    }
    for (std::size_t i = 0, n = between(rng, 0, 3); i < n; ++i) {
        ContextRule r;
        r.id = "ctx" + std::to_string(i);
        if (coin(rng)) r.scope.push_back(pick(rng, ls).id);
        Comparison c;
        if (!signals.empty() && coin(rng, 0.7)) {
            c.operand = Comparison::Operand::Signal;
            c.signal = pick(rng, signals);
        } else {
            c.operand = coin(rng) ? Comparison::Operand::Elapsed : Comparison::Operand::Surprisal;
        }
        c.op = pick(rng, std::vector<CompareOp>{CompareOp::Less, CompareOp::LessEqual, CompareOp::Greater,
                                                 CompareOp::GreaterEqual, CompareOp::Equal, CompareOp::NotEqual});
        c.value = pick(rng, std::vector<double>{0, 5, 7.5, -1.125, 300, 0.1});
        r.predicate.terms.push_back(c);
        if (coin(rng, 0.3)) r.predicate.terms.push_back(Comparison{Comparison::Operand::Elapsed, "", CompareOp::Greater, 60});
        r.severity = pick(rng, std::vector<AlertSeverity>{AlertSeverity::Info, AlertSeverity::Warning, AlertSeverity::Danger});
        r.message = coin(rng) ? random_text(rng) : "";
        m.contexts.push_back(r);
    }
    if (coin(rng)) m.dependencies[ls.front().id] = {"external_task", ls.back().id};

    if (coin(rng)) {
        m.user_config.switch_threshold = 0.7;
        m.user_config.switch_streak = 3;
        m.user_config.p_help = {0.5, 0.3, 0.2, 0.1};
        m.user_config.fast_ratio = 0.6;
    }

    for (const auto& l : ls) {
        m.bindings.push_back({l.id, InterfaceTier::Text, std::nullopt, {{ComponentKind::Text, "Do " + random_text(rng), std::nullopt}}});
        if (coin(rng)) {
            ContentBinding b{l.id, InterfaceTier::Ar, std::nullopt, {}};
            b.components.push_back({ComponentKind::Image, asset_key(rng), std::nullopt});
            b.components.push_back({ComponentKind::Overlay3d, asset_key(rng), std::string("anchor_") + l.id});
            if (coin(rng)) b.key = "key_" + l.id;
            m.bindings.push_back(b);
        }
    }
    return m;
}

}  // namespace oracle
