#pragma once

// Guided maintenance sessions over imported models. Every session is an
// append-only event log; the in-memory state is whatever applying the log
// in order produces, so a restart (or any reader of the log file) sees the
// same automaton state, posterior and tier.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emaint/automaton.hpp"
#include "emaint/context_sa.hpp"
#include "emaint/maintenance_model.hpp"
#include "emaint/user_model.hpp"

namespace emaint {

using Json = nlohmann::json;

/// Milliseconds; injectable so tests get reproducible timestamps.
using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

enum class ServiceErrorKind {
    Validation,
    UnknownModel,
    UnknownUser,
    UnknownSession,
    UnknownTeam,
    UnknownSignal,
    UnknownView,
    SessionFinished,
    IllegalAction,
    ProcedureIncomplete,
    Conflict,
    Io,
};

std::string_view to_string(ServiceErrorKind k);

class ServiceError : public std::runtime_error {
public:
    ServiceError(ServiceErrorKind kind, const std::string& message, Diagnostics diags = {})
        : std::runtime_error(message), kind_(kind), diags_(std::move(diags)) {}
    ServiceErrorKind kind() const { return kind_; }
    const Diagnostics& diagnostics() const { return diags_; }

private:
    ServiceErrorKind kind_;
    Diagnostics diags_;
};

// ------------------------------------------------------------ events

enum class EventKind {
    Created,
    StepShown,
    Completed,
    HelpRequested,
    Skipped,
    LoopExited,
    Alert,
    TierChanged,
    ProblemReported,
    SignalFrame,
    TeamNote,
    ContextViewed,
    TeamViewed,
    ChecklistWarning,
    Unblocked,
    Finished,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);

struct SessionEvent {
    std::uint64_t seq = 0;  // 1-based position in the log
    std::int64_t timestamp = 0;
    EventKind kind = EventKind::Created;
    Json payload = Json::object();

    bool operator==(const SessionEvent&) const = default;
};

Json to_json(const SessionEvent& e);
/// Throws std::invalid_argument on malformed input.
SessionEvent event_from_json(const Json& j);

// ------------------------------------------------------------ reports

enum class ProblemCategory {
    IncorrectDocumentation,
    InaccurateTracking,
    PollutedInterface,
    InsufficientResponseTime,
};

std::string_view to_string(ProblemCategory c);
std::optional<ProblemCategory> parse_problem_category(std::string_view s);

struct ProblemReport {
    ProblemCategory category = ProblemCategory::IncorrectDocumentation;
    std::string leaf_id;
    std::string note;
};

/// The post-maintenance report, computed from the log alone.
Json build_report(std::span<const SessionEvent> log);

// ------------------------------------------------------------ state

struct CompiledModel {
    ArMaintenanceModel model;
    Pdfa pdfa;
};

enum class SessionStatus { Active, Finished };
std::string_view to_string(SessionStatus s);

/// Everything replay reconstructs.
struct SessionSnapshot {
    std::string session_id;
    std::string model_id;
    std::string user_id;
    std::optional<std::string> team_id;
    SessionStatus status = SessionStatus::Active;
    StateId state;
    UserState user;
    std::int64_t step_started_at = 0;
    std::set<std::string> pending_help;    // leaves with help requested since their last completion
    std::set<std::string> completed;       // leaves completed at least once
    std::set<std::string> team_started;    // leaves already announced to the team
    SignalFrame frame;
    std::map<std::string, std::vector<double>> signal_history;
    std::vector<Alert> active_alerts;
    double last_surprisal = 0;

    bool operator==(const SessionSnapshot&) const = default;
};

/// Applies one event; returns the team events it implies (empty without a
/// team). Throws std::invalid_argument when the event does not fit.
std::vector<TeamEvent> apply_event(SessionSnapshot& s, const CompiledModel& cm, const SessionEvent& e);

SessionSnapshot replay_session(const CompiledModel& cm, std::span<const SessionEvent> log);

// ------------------------------------------------------------ views

struct ChecklistItem {
    std::string leaf_id;
    std::string description;
    bool done = false;
    bool current = false;
};

struct StepView {
    std::string session_id;
    SessionStatus status = SessionStatus::Active;
    std::uint32_t state = 0;
    bool accepting = false;
    std::vector<EnabledAction> enabled;  // RequestHelp excluded
    /// Set when exactly one leaf can be completed and nothing else is enabled.
    std::optional<std::string> leaf;
    InterfaceTier tier = InterfaceTier::Video;
    InterfaceTier content_tier = InterfaceTier::Video;
    std::vector<ContentComponent> content;
    std::vector<Alert> alerts;
    std::vector<ChecklistItem> checklist;
    std::optional<std::string> team_line;
};

struct HelpResult {
    std::string leaf_id;
    InterfaceTier tier = InterfaceTier::Video;          // requested, one step more supportive
    InterfaceTier content_tier = InterfaceTier::Video;  // after fallback
    std::vector<ContentComponent> components;
    std::uint32_t count = 0;  // help requests on this leaf since its last completion
};

struct UserView {
    std::string user_id;
    Distribution posterior{};
    Level level = Level::None_;
    InterfaceTier tier = InterfaceTier::Video;
    std::size_t observations = 0;
};

struct FinishResult {
    Json report;
    std::string delivery;  // "http" or "outbox"
    std::string location;  // URL or file path
};

struct ModelInfo {
    std::string id;
    std::string name;
    std::size_t leaves = 0;
    std::size_t states = 0;
    std::size_t transitions = 0;
};

// ------------------------------------------------------------ service

struct ServiceOptions {
    std::filesystem::path data_dir;
    std::optional<std::string> report_url;
    Clock clock;  // defaults to system_clock_ms
    std::size_t team_recent = 10;
};

class SessionService {
public:
    /// Creates the data directory layout and loads existing models and
    /// sessions. Unreadable entries are skipped and listed in warnings().
    explicit SessionService(ServiceOptions opts);
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    std::vector<std::string> warnings() const;

    ModelInfo import_model(std::string_view document);
    std::vector<ModelInfo> list_models() const;
    std::shared_ptr<const CompiledModel> model(const std::string& id) const;

    std::string create_session(const std::string& model_id, const std::string& user_id,
                               const std::optional<std::string>& team_id = {});
    std::vector<std::string> list_sessions() const;

    StepView current_step(const std::string& sid) const;
    StepView complete_task(const std::string& sid, const std::string& leaf, std::int64_t duration_s);
    StepView skip(const std::string& sid, const std::string& node);
    StepView exit_loop(const std::string& sid, const std::string& node);
    HelpResult request_help(const std::string& sid, const std::string& leaf);

    /// Returns the alerts that became active with this frame.
    std::vector<Alert> ingest_signals(const std::string& sid, const SignalFrame& frame);
    /// One JSON frame per line; see parse_signal_frame. Returns all new alerts.
    std::vector<Alert> replay_signal_file(const std::string& sid, const std::filesystem::path& file);

    void report_problem(const std::string& sid, const ProblemReport& p);
    void add_team_note(const std::string& sid, const std::string& leaf, TeamEventKind kind,
                       const std::optional<SaBreakdownTag>& tag);

    FinishResult finish_session(const std::string& sid);
    /// Rebuilt from the log file on disk.
    Json report_from_log(const std::string& sid) const;

    UserView user_view(const std::string& sid) const;
    SectionView context_view(const std::string& sid, int step);
    SessionSnapshot snapshot(const std::string& sid) const;

    TeamView team_summary(const std::string& team_id) const;
    /// `viewer` (a session id) gets the access logged for its report.
    TeamView team_detail(const std::string& team_id, const std::optional<std::string>& viewer);
    std::vector<TeamEvent> team_events(const std::string& team_id) const;

    std::vector<SessionEvent> events(const std::string& sid, std::uint64_t since = 0) const;
    /// Current change counter; bumps on every appended session event.
    std::uint64_t version() const;
    /// Blocks until version() != seen or the timeout passes; returns version().
    std::uint64_t wait_for_change(std::uint64_t seen, std::chrono::milliseconds timeout) const;

    std::filesystem::path log_path(const std::string& sid) const;

private:
    struct Session;

    std::shared_ptr<Session> find(const std::string& sid) const;
    void append(Session& s, EventKind kind, Json payload);
    StepView view_locked(const Session& s) const;
    StepView advance(const std::string& sid, const Action& a);
    void check_active(const Session& s) const;
    void illegal(Session& s, const Action& a, const std::string& reason);
    std::string describe_leaf(const std::string& sid, const std::string& leaf) const;
    void deliver(const std::string& sid, const Json& report, FinishResult& out);
    void load();
    void warn(std::string msg);

    ServiceOptions opts_;
    mutable std::mutex warn_mu_;
    std::vector<std::string> warnings_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<const CompiledModel>> models_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_session_ = 1;
    TeamFeed feed_;

    mutable std::mutex change_mu_;
    mutable std::condition_variable change_cv_;
    std::uint64_t version_ = 0;
};

/// `{"signals": {"name": 1.5, "other": {"value": 2, "timestamp": 10}}}`; a
/// bare number takes `default_ts`. Throws std::invalid_argument.
SignalFrame parse_signal_frame(const Json& j, std::int64_t default_ts);

}  // namespace emaint
