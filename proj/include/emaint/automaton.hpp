#pragma once

// Compilation of task models into probabilistic deterministic finite
// automata (PDFA) and stepping over the result.
//
// A state is one configuration of the whole task tree. Transitions are
// labelled with configuration-changing actions (Complete, Skip, ExitLoop)
// and carry the action's weight normalized over everything enabled in the
// source state. RequestHelp is a meta-action: always available in
// non-accepting states, never changes the state, carries no probability.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emaint/task_model.hpp"

namespace emaint {

enum class ActionKind { Complete, Skip, ExitLoop, RequestHelp };

struct Action {
    ActionKind kind = ActionKind::Complete;
    std::string node;  // leaf id, opt id or loop id; empty for RequestHelp

    static Action complete(std::string leaf) { return {ActionKind::Complete, std::move(leaf)}; }
    static Action skip(std::string opt) { return {ActionKind::Skip, std::move(opt)}; }
    static Action exit_loop(std::string loop) { return {ActionKind::ExitLoop, std::move(loop)}; }
    static Action request_help() { return {ActionKind::RequestHelp, {}}; }

    auto operator<=>(const Action&) const = default;
    bool operator==(const Action&) const = default;
};

/// `complete(a)`, `skip(o)`, `exit(l)`, `help`.
std::string to_string(const Action& a);
std::optional<Action> parse_action(std::string_view text);

using Trace = std::vector<Action>;

struct StateId {
    std::uint32_t value = 0;
    auto operator<=>(const StateId&) const = default;
};

struct Transition {
    Action action;
    StateId target;
    double probability = 0;
};

struct EnabledAction {
    Action action;
    std::optional<double> probability;  // nullopt for RequestHelp
};

enum class AutomatonErrorKind { StateExplosion, DeadEnd, IllegalAction, InvalidState };

class AutomatonError : public std::runtime_error {
public:
    AutomatonError(AutomatonErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    AutomatonErrorKind kind() const { return kind_; }

private:
    AutomatonErrorKind kind_;
};

class Pdfa {
public:
    StateId initial() const { return StateId{0}; }
    std::size_t state_count() const { return accepting_.size(); }
    std::size_t transition_count() const { return transitions_.size(); }
    bool is_accepting(StateId s) const;
    std::vector<StateId> accepting_states() const;

    /// Outgoing configuration-changing transitions, in canonical action order.
    std::span<const Transition> transitions(StateId s) const;

    /// The internal configuration vector of a state (for diagnostics).
    const std::vector<std::uint16_t>& configuration(StateId s) const;

private:
    friend class PdfaBuilder;
    std::vector<std::vector<std::uint16_t>> configs_;
    std::vector<bool> accepting_;
    std::vector<std::size_t> offsets_;  // transitions_ index range per state, size = states + 1
    std::vector<Transition> transitions_;
};

struct CompileOptions {
    std::size_t max_states = 100'000;
};

Pdfa compile(const TaskModel& m, const CompileOptions& opts = {});

std::vector<EnabledAction> enabled(const Pdfa& p, StateId s);
StateId step(const Pdfa& p, StateId s, const Action& a);
double probability(const Pdfa& p, StateId s, const Action& a);
/// -log2 of the action's probability at `s`.
double surprisal(const Pdfa& p, StateId s, const Action& a);

/// All accepted traces of length <= max_len (max_len <= 20).
std::set<Trace> language(const Pdfa& p, std::size_t max_len);

/// Graphviz text; node and edge order follow the canonical numbering.
std::string to_dot(const Pdfa& p, std::string_view graph_name = "pdfa");

/// Structural self-check: determinism, normalization, reachability and the
/// absence of dead ends. Returns human-readable violations (empty if sound).
std::vector<std::string> check_well_formed(const Pdfa& p, double tolerance = 1e-9);

}  // namespace emaint
