#pragma once

// Situation awareness: context rules evaluated against live signals, and
// the team feed that keeps members aware of each other's progress.

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emaint/diagnostic.hpp"

namespace emaint {

// ------------------------------------------------------------ predicates

enum class CompareOp { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

struct Comparison {
    enum class Operand { Signal, Elapsed, Surprisal };
    Operand operand = Operand::Signal;
    std::string signal;  // only for Operand::Signal
    CompareOp op = CompareOp::Greater;
    double value = 0;

    bool operator==(const Comparison&) const = default;
};

/// Conjunction of comparisons: `temp > 80 and elapsed > 300`.
struct Predicate {
    std::vector<Comparison> terms;
    bool operator==(const Predicate&) const = default;
};

class PredicateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Predicate parse_predicate(std::string_view text);
std::string format_predicate(const Predicate& p);
/// Signal names referenced by the predicate, in order of first use.
std::vector<std::string> referenced_signals(const Predicate& p);

// ------------------------------------------------------------ rules

enum class AlertSeverity { Info, Warning, Danger };
std::string_view to_string(AlertSeverity s);
std::optional<AlertSeverity> parse_severity(std::string_view s);

struct ContextRule {
    std::string id;
    std::vector<std::string> scope;  // leaf ids; empty = global
    Predicate predicate;
    AlertSeverity severity = AlertSeverity::Warning;
    std::string message;

    bool operator==(const ContextRule&) const = default;
};

struct SignalSample {
    double value = 0;
    std::int64_t timestamp = 0;  // milliseconds
    bool operator==(const SignalSample&) const = default;
};

using SignalFrame = std::map<std::string, SignalSample>;

struct Alert {
    std::string rule_id;
    AlertSeverity severity = AlertSeverity::Warning;
    std::string message;
    std::optional<std::string> leaf_id;
    std::int64_t timestamp = 0;

    bool operator==(const Alert&) const = default;
};

struct ContextEvaluation {
    std::vector<Alert> alerts;
    /// One UnknownSignal diagnostic per rule referencing a signal missing
    /// from the frame; such rules raise no alert.
    Diagnostics problems;
};

/// A rule is in scope when it is global or lists one of `current_leaves`
/// (the leaves the user may act on right now). Output ordered by rule id.
ContextEvaluation evaluate_contexts(std::span<const ContextRule> rules,
                                    std::span<const std::string> current_leaves,
                                    const SignalFrame& frame, double elapsed_seconds,
                                    double surprisal_bits, std::int64_t timestamp = 0);

bool holds(const Predicate& p, const SignalFrame& frame, double elapsed_seconds,
           double surprisal_bits);

// ------------------------------------------------------------ team awareness

enum class TeamEventKind { Started, Completed, Blocked, Unblocked, HelpRequested };
std::string_view to_string(TeamEventKind k);
std::optional<TeamEventKind> parse_team_event_kind(std::string_view s);

/// Team situation-awareness breakdown levels, used purely as tags.
enum class TsaLevel { Tsa1_NotTransmitted, Tsa2_Miscomprehended, Tsa3_ImplicationsMissed };
std::string_view to_string(TsaLevel t);
std::optional<TsaLevel> parse_tsa_level(std::string_view s);

struct SaBreakdownTag {
    TsaLevel level = TsaLevel::Tsa1_NotTransmitted;
    std::string note;
    bool operator==(const SaBreakdownTag&) const = default;
};

struct TeamEvent {
    std::string team_id;
    std::string member_id;
    std::string session_id;
    std::string leaf_id;
    TeamEventKind kind = TeamEventKind::Started;
    std::int64_t timestamp = 0;
    /// For Unblocked: the completed leaf that released `leaf_id`.
    std::optional<std::string> cause_leaf;
    std::optional<SaBreakdownTag> tag;

    bool operator==(const TeamEvent&) const = default;
};

/// leaf -> tasks it blocks (leaf ids or external task names).
using DependencyMap = std::map<std::string, std::vector<std::string>>;

/// One Unblocked event per direct dependent of `completed` (no transitive
/// firing). Team, member, session and timestamp come from `cause`.
std::vector<TeamEvent> notify_unblocked(const TeamEvent& cause, const DependencyMap& deps);

enum class TeamErrorKind { UnknownSession, AlreadyCompleted, UnknownTeam };

class TeamError : public std::runtime_error {
public:
    TeamError(TeamErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    TeamErrorKind kind() const { return kind_; }

private:
    TeamErrorKind kind_;
};

struct MemberView {
    std::string member_id;
    std::string session_id;
    bool active = false;
    std::optional<std::string> current_leaf;
    std::string description;
    std::string line;
    std::vector<TeamEvent> recent;  // newest last
};

struct TeamView {
    std::string team_id;
    std::string status_line;
    std::vector<MemberView> members;  // ordered by member id

    std::string compact() const;  // status line + one line per member
    std::string detail() const;   // compact view plus recent events per member
};

std::string describe(const TeamEvent& e);

struct TeamMembership {
    std::string team_id;
    std::string member_id;
    bool finished = false;
};

/// Append-only, thread-safe log of team events.
class TeamFeed {
public:
    using Subscriber = std::function<void(const TeamEvent&)>;
    using LeafDescriber = std::function<std::string(const std::string& session_id,
                                                    const std::string& leaf_id)>;

    void register_session(const std::string& session_id, const std::string& team_id,
                          const std::string& member_id);
    void mark_finished(const std::string& session_id);

    /// Throws UnknownSession, or AlreadyCompleted for a second Completed
    /// event on the same (session, leaf).
    void record(const TeamEvent& e);

    std::size_t subscribe(Subscriber s);
    void unsubscribe(std::size_t token);

    std::vector<TeamEvent> events() const;
    std::vector<TeamEvent> team_events(const std::string& team_id) const;
    bool has_team(const std::string& team_id) const;
    std::vector<std::string> members(const std::string& team_id) const;

    TeamView summary(const std::string& team_id, const LeafDescriber& describe_leaf,
                     std::size_t recent_k = 10) const;

private:
    mutable std::mutex mu_;
    std::vector<TeamEvent> log_;
    std::map<std::string, TeamMembership> sessions_;
    std::map<std::pair<std::string, std::string>, bool> completed_;
    std::map<std::size_t, Subscriber> subscribers_;
    std::size_t next_token_ = 1;
};

/// Builds a team view from a fixed event log and session registry; the
/// output depends only on its inputs.
TeamView summarize_team(const std::string& team_id, std::span<const TeamEvent> log,
                        const std::map<std::string, TeamMembership>& sessions,
                        const TeamFeed::LeafDescriber& describe_leaf, std::size_t recent_k);

}  // namespace emaint
