#include "emaint/automaton.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>
#include <unordered_map>

#include "emaint/numeric_text.hpp"

namespace emaint {

std::string to_string(const Action& a) {
    switch (a.kind) {
        case ActionKind::Complete: return "complete(" + a.node + ")";
        case ActionKind::Skip: return "skip(" + a.node + ")";
        case ActionKind::ExitLoop: return "exit(" + a.node + ")";
        case ActionKind::RequestHelp: return "help";
    }
    return "help";
}

std::optional<Action> parse_action(std::string_view text) {
    if (text == "help") return Action::request_help();
    auto open = text.find('(');
    if (open == std::string_view::npos || text.back() != ')') return std::nullopt;
    std::string_view head = text.substr(0, open);
    std::string node(text.substr(open + 1, text.size() - open - 2));
    if (!is_identifier(node)) return std::nullopt;
    if (head == "complete") return Action::complete(node);
    if (head == "skip") return Action::skip(node);
    if (head == "exit") return Action::exit_loop(node);
    return std::nullopt;
}

bool Pdfa::is_accepting(StateId s) const {
    if (s.value >= accepting_.size())
        throw AutomatonError(AutomatonErrorKind::InvalidState,
                             "invalid state " + std::to_string(s.value));
    return accepting_[s.value];
}

std::vector<StateId> Pdfa::accepting_states() const {
    std::vector<StateId> out;
    for (std::uint32_t i = 0; i < accepting_.size(); ++i)
        if (accepting_[i]) out.push_back(StateId{i});
    return out;
}

std::span<const Transition> Pdfa::transitions(StateId s) const {
    is_accepting(s);  // range check
    return std::span<const Transition>(transitions_.data() + offsets_[s.value],
                                       offsets_[s.value + 1] - offsets_[s.value]);
}

const std::vector<std::uint16_t>& Pdfa::configuration(StateId s) const {
    is_accepting(s);
    return configs_[s.value];
}

namespace {

using Config = std::vector<std::uint16_t>;

struct ConfigHash {
    std::size_t operator()(const Config& c) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (auto v : c) {
            h ^= v;
            h *= 1099511628211ull;
        }
        return h;
    }
};

enum class NodeKind { Leaf, Seq, Choice, Par, Disable, Opt, Loop };

struct FlatNode {
    NodeKind kind = NodeKind::Leaf;
    std::string id;
    std::vector<std::size_t> children;
    std::size_t subtree_end = 0;  // preorder index, exclusive
    std::size_t slot = 0;
    std::size_t slot_end = 0;
    std::uint32_t loop_bound = 0;
    double weight = 1.0;
};

struct InternalAction {
    ActionKind kind;
    std::size_t target;  // preorder node index
};

std::size_t slot_width(NodeKind k) {
    switch (k) {
        case NodeKind::Leaf:
        case NodeKind::Par: return 1;
        case NodeKind::Loop: return 3;
        default: return 2;
    }
}

NodeKind kind_of(TaskOperator op) {
    switch (op) {
        case TaskOperator::Seq: return NodeKind::Seq;
        case TaskOperator::Choice: return NodeKind::Choice;
        case TaskOperator::Par: return NodeKind::Par;
        case TaskOperator::Disable: return NodeKind::Disable;
        case TaskOperator::Opt: return NodeKind::Opt;
        case TaskOperator::Loop: return NodeKind::Loop;
    }
    return NodeKind::Seq;
}

// Operational semantics over a flat configuration vector. Every node owns
// a contiguous slot range; slot 0 of a node is its "done" flag. The all-zero
// configuration is the initial one, and a finished subtree is canonicalised
// to "done flag only", so equivalent configurations share one encoding.
class Semantics {
public:
    explicit Semantics(const TaskModel& m) {
        flatten(m.root);
        slots_ = nodes_.empty() ? 0 : nodes_[0].slot_end;
    }

    std::size_t slot_count() const { return slots_; }
    const FlatNode& node(std::size_t i) const { return nodes_[i]; }

    bool done(const Config& c, std::size_t n) const { return c[nodes_[n].slot] != 0; }

    void enabled(const Config& c, std::size_t n, std::vector<InternalAction>& out) const {
        const FlatNode& f = nodes_[n];
        if (done(c, n)) return;
        const auto s = f.slot;
        switch (f.kind) {
            case NodeKind::Leaf: out.push_back({ActionKind::Complete, n}); break;
            case NodeKind::Seq: enabled(c, f.children[c[s + 1]], out); break;
            case NodeKind::Choice:
                if (c[s + 1] != 0)
                    enabled(c, f.children[c[s + 1] - 1u], out);
                else
                    for (auto ch : f.children) enabled(c, ch, out);
                break;
            case NodeKind::Par:
                for (auto ch : f.children) enabled(c, ch, out);
                break;
            case NodeKind::Disable:
                if (c[s + 1] == 0) enabled(c, f.children[0], out);
                enabled(c, f.children[1], out);
                break;
            case NodeKind::Opt:
                if (c[s + 1] == 0) out.push_back({ActionKind::Skip, n});
                enabled(c, f.children[0], out);
                break;
            case NodeKind::Loop:
                if (c[s + 2] != 0) {
                    out.push_back({ActionKind::ExitLoop, n});
                    if (c[s + 1] < f.loop_bound) enabled(c, f.children[0], out);
                } else {
                    enabled(c, f.children[0], out);
                }
                break;
        }
    }

    void apply(Config& c, std::size_t n, const InternalAction& a) const {
        const FlatNode& f = nodes_[n];
        const auto s = f.slot;
        switch (f.kind) {
            case NodeKind::Leaf: mark_done(c, n); break;
            case NodeKind::Seq: {
                std::size_t cur = c[s + 1];
                std::size_t child = f.children[cur];
                apply(c, child, a);
                if (done(c, child)) {
                    ++cur;
                    if (cur == f.children.size())
                        mark_done(c, n);
                    else
                        c[s + 1] = static_cast<std::uint16_t>(cur);
                }
                break;
            }
            case NodeKind::Choice: {
                std::size_t i = c[s + 1] != 0 ? c[s + 1] - 1u : child_containing(f, a.target);
                c[s + 1] = static_cast<std::uint16_t>(i + 1);
                apply(c, f.children[i], a);
                if (done(c, f.children[i])) mark_done(c, n);
                break;
            }
            case NodeKind::Par: {
                std::size_t i = child_containing(f, a.target);
                apply(c, f.children[i], a);
                bool all = std::all_of(f.children.begin(), f.children.end(),
                                       [&](std::size_t ch) { return done(c, ch); });
                if (all) mark_done(c, n);
                break;
            }
            case NodeKind::Disable: {
                std::size_t first = f.children[0], second = f.children[1];
                if (contains(second, a.target)) {
                    if (c[s + 1] == 0) {
                        c[s + 1] = 1;
                        reset(c, first);
                    }
                    apply(c, second, a);
                    if (done(c, second)) mark_done(c, n);
                } else {
                    apply(c, first, a);
                }
                break;
            }
            case NodeKind::Opt:
                if (a.kind == ActionKind::Skip && a.target == n) {
                    mark_done(c, n);
                } else {
                    c[s + 1] = 1;
                    apply(c, f.children[0], a);
                    if (done(c, f.children[0])) mark_done(c, n);
                }
                break;
            case NodeKind::Loop:
                if (a.kind == ActionKind::ExitLoop && a.target == n) {
                    mark_done(c, n);
                } else {
                    c[s + 2] = 0;
                    apply(c, f.children[0], a);
                    if (done(c, f.children[0])) {
                        reset(c, f.children[0]);
                        c[s + 1] = static_cast<std::uint16_t>(c[s + 1] + 1);
                        c[s + 2] = 1;
                    }
                }
                break;
        }
    }

    double weight(const InternalAction& a) const { return nodes_[a.target].weight; }

    Action external(const InternalAction& a) const { return Action{a.kind, nodes_[a.target].id}; }

private:
    bool contains(std::size_t n, std::size_t target) const {
        return target >= n && target < nodes_[n].subtree_end;
    }

    std::size_t child_containing(const FlatNode& f, std::size_t target) const {
        for (std::size_t i = 0; i < f.children.size(); ++i)
            if (contains(f.children[i], target)) return i;
        throw AutomatonError(AutomatonErrorKind::IllegalAction, "action outside of subtree");
    }

    void reset(Config& c, std::size_t n) const {
        std::fill(c.begin() + static_cast<std::ptrdiff_t>(nodes_[n].slot),
                  c.begin() + static_cast<std::ptrdiff_t>(nodes_[n].slot_end), 0);
    }

    void mark_done(Config& c, std::size_t n) const {
        reset(c, n);
        c[nodes_[n].slot] = 1;
    }

    std::size_t flatten(const TaskNode& t) {
        std::size_t idx = nodes_.size();
        nodes_.emplace_back();
        FlatNode f;
        f.slot = next_slot_;
        if (t.is_leaf()) {
            f.kind = NodeKind::Leaf;
            f.id = t.leaf().id;
            f.weight = t.leaf().weight;
            next_slot_ += slot_width(f.kind);
        } else {
            const auto& c = t.composite();
            f.kind = kind_of(c.op);
            f.id = c.id;
            f.weight = c.weight;
            f.loop_bound = c.loop_bound.value_or(0);
            next_slot_ += slot_width(f.kind);
            for (const auto& child : c.children) f.children.push_back(flatten(child));
        }
        f.subtree_end = nodes_.size();
        f.slot_end = next_slot_;
        nodes_[idx] = std::move(f);
        return idx;
    }

    std::vector<FlatNode> nodes_;
    std::size_t next_slot_ = 0;
    std::size_t slots_ = 0;
};

}  // namespace

class PdfaBuilder {
public:
    static Pdfa build(const TaskModel& m, const CompileOptions& opts) {
        Semantics sem(m);
        Pdfa p;
        std::unordered_map<Config, std::uint32_t, ConfigHash> index;
        std::deque<std::uint32_t> queue;

        auto intern = [&](Config cfg) -> std::uint32_t {
            auto it = index.find(cfg);
            if (it != index.end()) return it->second;
            if (p.configs_.size() >= opts.max_states)
                throw AutomatonError(AutomatonErrorKind::StateExplosion,
                                     "state cap of " + std::to_string(opts.max_states) +
                                         " exceeded");
            auto id = static_cast<std::uint32_t>(p.configs_.size());
            index.emplace(cfg, id);
            p.accepting_.push_back(sem.done(cfg, 0));
            p.configs_.push_back(std::move(cfg));
            queue.push_back(id);
            return id;
        };

        intern(Config(sem.slot_count(), 0));
        p.offsets_.push_back(0);
        std::vector<InternalAction> acts;
        // States are expanded in creation order, so offsets_ stays aligned.
        while (!queue.empty()) {
            std::uint32_t id = queue.front();
            queue.pop_front();
            acts.clear();
            Config cfg = p.configs_[id];
            sem.enabled(cfg, 0, acts);
            if (acts.empty() && !p.accepting_[id])
                throw AutomatonError(AutomatonErrorKind::DeadEnd,
                                     "state " + std::to_string(id) + " has no enabled action");
            double total = 0;
            for (const auto& a : acts) total += sem.weight(a);
            for (const auto& a : acts) {
                Config next = cfg;
                sem.apply(next, 0, a);
                std::uint32_t target = intern(std::move(next));
                p.transitions_.push_back(
                    Transition{sem.external(a), StateId{target}, sem.weight(a) / total});
            }
            p.offsets_.push_back(p.transitions_.size());
        }

        auto problems = check_well_formed(p);
        if (!problems.empty()) throw AutomatonError(AutomatonErrorKind::DeadEnd, problems.front());
        return p;
    }
};

Pdfa compile(const TaskModel& m, const CompileOptions& opts) { return PdfaBuilder::build(m, opts); }

std::vector<EnabledAction> enabled(const Pdfa& p, StateId s) {
    std::vector<EnabledAction> out;
    for (const auto& t : p.transitions(s)) out.push_back({t.action, t.probability});
    if (!p.is_accepting(s)) out.push_back({Action::request_help(), std::nullopt});
    return out;
}

namespace {

const Transition& find_transition(const Pdfa& p, StateId s, const Action& a) {
    for (const auto& t : p.transitions(s))
        if (t.action == a) return t;
    throw AutomatonError(AutomatonErrorKind::IllegalAction,
                         to_string(a) + " is not enabled in state " + std::to_string(s.value));
}

}  // namespace

StateId step(const Pdfa& p, StateId s, const Action& a) {
    if (a.kind == ActionKind::RequestHelp) {
        if (p.is_accepting(s))
            throw AutomatonError(AutomatonErrorKind::IllegalAction,
                                 "help is not available in an accepting state");
        return s;
    }
    return find_transition(p, s, a).target;
}

double probability(const Pdfa& p, StateId s, const Action& a) {
    return find_transition(p, s, a).probability;
}

double surprisal(const Pdfa& p, StateId s, const Action& a) {
    double v = -std::log2(probability(p, s, a));
    return v == 0.0 ? 0.0 : v;  // normalise -0
}

std::set<Trace> language(const Pdfa& p, std::size_t max_len) {
    std::set<Trace> out;
    Trace path;
    auto dfs = [&](auto&& self, StateId s) -> void {
        if (p.is_accepting(s)) out.insert(path);
        if (path.size() == max_len) return;
        for (const auto& t : p.transitions(s)) {
            path.push_back(t.action);
            self(self, t.target);
            path.pop_back();
        }
    };
    dfs(dfs, p.initial());
    return out;
}

std::string to_dot(const Pdfa& p, std::string_view graph_name) {
    std::ostringstream os;
    os << "digraph " << graph_name << " {\n";
    os << "  rankdir=LR;\n";
    os << "  start [shape=point];\n";
    for (std::uint32_t i = 0; i < p.state_count(); ++i)
        os << "  s" << i << " [shape=" << (p.is_accepting(StateId{i}) ? "doublecircle" : "circle")
           << ", label=\"" << i << "\"];\n";
    os << "  start -> s0;\n";
    for (std::uint32_t i = 0; i < p.state_count(); ++i)
        for (const auto& t : p.transitions(StateId{i}))
            os << "  s" << i << " -> s" << t.target.value << " [label=\"" << to_string(t.action)
               << " " << format_real(t.probability) << "\"];\n";
    os << "}\n";
    return os.str();
}

std::vector<std::string> check_well_formed(const Pdfa& p, double tolerance) {
    std::vector<std::string> problems;
    const std::size_t n = p.state_count();
    if (n == 0) return {"automaton has no states"};
    std::vector<std::vector<std::uint32_t>> reverse(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        StateId s{i};
        auto ts = p.transitions(s);
        std::set<Action> seen;
        double sum = 0;
        for (const auto& t : ts) {
            if (!seen.insert(t.action).second)
                problems.push_back("state " + std::to_string(i) + ": nondeterministic on " +
                                   to_string(t.action));
            if (t.action.kind == ActionKind::RequestHelp)
                problems.push_back("state " + std::to_string(i) + ": help stored as transition");
            if (!(t.probability > 0 && t.probability <= 1))
                problems.push_back("state " + std::to_string(i) + ": probability out of (0,1]");
            if (t.target.value >= n) {
                problems.push_back("state " + std::to_string(i) + ": dangling target");
                continue;
            }
            reverse[t.target.value].push_back(i);
            sum += t.probability;
        }
        if (!p.is_accepting(s) && std::abs(sum - 1.0) > tolerance)
            problems.push_back("state " + std::to_string(i) + ": probabilities sum to " +
                               format_real(sum));
    }

    std::vector<bool> reached(n, false);
    std::deque<std::uint32_t> q{0};
    reached[0] = true;
    while (!q.empty()) {
        auto i = q.front();
        q.pop_front();
        for (const auto& t : p.transitions(StateId{i}))
            if (t.target.value < n && !reached[t.target.value]) {
                reached[t.target.value] = true;
                q.push_back(t.target.value);
            }
    }
    std::vector<bool> live(n, false);
    for (auto a : p.accepting_states()) {
        live[a.value] = true;
        q.push_back(a.value);
    }
    while (!q.empty()) {
        auto i = q.front();
        q.pop_front();
        for (auto pred : reverse[i])
            if (!live[pred]) {
                live[pred] = true;
                q.push_back(pred);
            }
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!reached[i]) problems.push_back("state " + std::to_string(i) + ": unreachable");
        if (!live[i]) problems.push_back("state " + std::to_string(i) + ": dead end");
    }
    return problems;
}

}  // namespace emaint
