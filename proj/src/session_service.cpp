#include "emaint/session_service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "emaint/json_codec.hpp"
#include "emaint/numeric_text.hpp"

namespace emaint {

namespace fs = std::filesystem;

std::int64_t system_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string_view to_string(ServiceErrorKind k) {
    switch (k) {
        case ServiceErrorKind::Validation: return "Validation";
        case ServiceErrorKind::UnknownModel: return "UnknownModel";
        case ServiceErrorKind::UnknownUser: return "UnknownUser";
        case ServiceErrorKind::UnknownSession: return "UnknownSession";
        case ServiceErrorKind::UnknownTeam: return "UnknownTeam";
        case ServiceErrorKind::UnknownSignal: return "UnknownSignal";
        case ServiceErrorKind::UnknownView: return "UnknownView";
        case ServiceErrorKind::SessionFinished: return "SessionFinished";
        case ServiceErrorKind::IllegalAction: return "IllegalAction";
        case ServiceErrorKind::ProcedureIncomplete: return "ProcedureIncomplete";
        case ServiceErrorKind::Conflict: return "Conflict";
        case ServiceErrorKind::Io: return "Io";
    }
    return "Validation";
}

namespace {

constexpr EventKind kEventKinds[] = {
    EventKind::Created,         EventKind::StepShown,     EventKind::Completed,
    EventKind::HelpRequested,   EventKind::Skipped,       EventKind::LoopExited,
    EventKind::Alert,           EventKind::TierChanged,   EventKind::ProblemReported,
    EventKind::SignalFrame,     EventKind::TeamNote,      EventKind::ContextViewed,
    EventKind::TeamViewed,      EventKind::ChecklistWarning, EventKind::Unblocked,
    EventKind::Finished,
};

constexpr ProblemCategory kCategories[] = {
    ProblemCategory::IncorrectDocumentation, ProblemCategory::InaccurateTracking,
    ProblemCategory::PollutedInterface, ProblemCategory::InsufficientResponseTime};

}  // namespace

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::Created: return "Created";
        case EventKind::StepShown: return "StepShown";
        case EventKind::Completed: return "Completed";
        case EventKind::HelpRequested: return "HelpRequested";
        case EventKind::Skipped: return "Skipped";
        case EventKind::LoopExited: return "LoopExited";
        case EventKind::Alert: return "Alert";
        case EventKind::TierChanged: return "TierChanged";
        case EventKind::ProblemReported: return "ProblemReported";
        case EventKind::SignalFrame: return "SignalFrame";
        case EventKind::TeamNote: return "TeamNote";
        case EventKind::ContextViewed: return "ContextViewed";
        case EventKind::TeamViewed: return "TeamViewed";
        case EventKind::ChecklistWarning: return "ChecklistWarning";
        case EventKind::Unblocked: return "Unblocked";
        case EventKind::Finished: return "Finished";
    }
    return "Created";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
    for (auto k : kEventKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::string_view to_string(ProblemCategory c) {
    switch (c) {
        case ProblemCategory::IncorrectDocumentation: return "incorrect_documentation";
        case ProblemCategory::InaccurateTracking: return "inaccurate_tracking";
        case ProblemCategory::PollutedInterface: return "polluted_interface";
        case ProblemCategory::InsufficientResponseTime: return "insufficient_response_time";
    }
    return "incorrect_documentation";
}

std::optional<ProblemCategory> parse_problem_category(std::string_view s) {
    for (auto c : kCategories)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::string_view to_string(SessionStatus s) { return s == SessionStatus::Active ? "active" : "finished"; }

Json to_json(const SessionEvent& e) {
    return {{"seq", e.seq}, {"t", e.timestamp}, {"kind", std::string(to_string(e.kind))}, {"data", e.payload}};
}

SessionEvent event_from_json(const Json& j) {
    try {
        SessionEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.timestamp = j.at("t").get<std::int64_t>();
        auto kind = parse_event_kind(j.at("kind").get<std::string>());
        if (!kind) throw std::invalid_argument("unknown event kind '" + j.at("kind").get<std::string>() + "'");
        e.kind = *kind;
        e.payload = j.at("data");
        return e;
    } catch (const Json::exception& ex) {
        throw std::invalid_argument(std::string("malformed event: ") + ex.what());
    }
}

SignalFrame parse_signal_frame(const Json& j, std::int64_t default_ts) {
    if (!j.is_object() || !j.contains("signals") || !j["signals"].is_object())
        throw std::invalid_argument("frame needs a 'signals' object");
    SignalFrame f;
    for (const auto& [name, v] : j["signals"].items()) {
        SignalSample s;
        s.timestamp = default_ts;
        if (v.is_number()) {
            s.value = v.get<double>();
        } else if (v.is_object() && v.contains("value") && v["value"].is_number()) {
            s.value = v["value"].get<double>();
            if (v.contains("timestamp")) {
                if (!v["timestamp"].is_number_integer())
                    throw std::invalid_argument("signal '" + name + "': timestamp must be an integer");
                s.timestamp = v["timestamp"].get<std::int64_t>();
            }
        } else {
            throw std::invalid_argument("signal '" + name + "' needs a numeric value");
        }
        f[name] = s;
    }
    return f;
}

// ------------------------------------------------------------ replay

namespace {

std::vector<std::string> completable_leaves(const Pdfa& p, StateId s) {
    std::vector<std::string> out;
    for (const auto& t : p.transitions(s))
        if (t.action.kind == ActionKind::Complete) out.push_back(t.action.node);
    return out;
}

bool is_enabled(const Pdfa& p, StateId s, const Action& a) {
    const auto ts = p.transitions(s);
    return std::any_of(ts.begin(), ts.end(), [&](const Transition& t) { return t.action == a; });
}

std::string str(const Json& p, const char* key) { return p.at(key).get<std::string>(); }

void merge_frame(SessionSnapshot& s, const CompiledModel& cm, const SignalFrame& signals, std::int64_t ts) {
    for (const auto& [name, sample] : signals) {
        s.frame[name] = sample;
        s.signal_history[name].push_back(sample.value);
    }
    for (const auto& d : cm.model.derived_signals) {
        auto it = s.signal_history.find(d.input);
        if (it == s.signal_history.end() || !signals.count(d.input)) continue;
        s.frame[d.name] = SignalSample{compute_derived(d, it->second), ts};
    }
}

StateId step_checked(const Pdfa& p, StateId s, const Action& a) {
    try {
        return step(p, s, a);
    } catch (const AutomatonError& e) {
        throw std::invalid_argument(std::string("event does not fit the automaton: ") + e.what());
    }
}

}  // namespace

std::vector<TeamEvent> apply_event(SessionSnapshot& s, const CompiledModel& cm, const SessionEvent& e) {
    std::vector<TeamEvent> out;
    const Json& p = e.payload;
    auto team = [&](TeamEventKind kind, const std::string& leaf) -> TeamEvent* {
        if (!s.team_id) return nullptr;
        out.push_back(TeamEvent{*s.team_id, s.user_id, s.session_id, leaf, kind, e.timestamp, {}, {}});
        return &out.back();
    };
    if (e.kind != EventKind::Created && s.status == SessionStatus::Finished)
        throw std::invalid_argument("event after the session finished");
    try {
        switch (e.kind) {
            case EventKind::Created: {
                s = SessionSnapshot{};
                s.session_id = str(p, "session");
                s.model_id = str(p, "model");
                s.user_id = str(p, "user");
                if (!p.at("team").is_null()) s.team_id = str(p, "team");
                std::optional<Level> initial;
                if (!p.at("initial_level").is_null()) {
                    initial = parse_level(str(p, "initial_level"));
                    if (!initial) throw std::invalid_argument("bad initial level");
                }
                s.user = initial_user_state(cm.model.user_config, initial);
                s.state = cm.pdfa.initial();
                s.step_started_at = e.timestamp;
                break;
            }
            case EventKind::StepShown:
                s.step_started_at = e.timestamp;
                for (const auto& leaf : completable_leaves(cm.pdfa, s.state))
                    if (s.team_started.insert(leaf).second) team(TeamEventKind::Started, leaf);
                break;
            case EventKind::Completed: {
                auto leaf = str(p, "leaf");
                auto a = Action::complete(leaf);
                StateId from = s.state;
                s.state = step_checked(cm.pdfa, from, a);
                s.last_surprisal = surprisal(cm.pdfa, from, a);
                auto bucket = parse_bucket(str(p, "bucket"));
                if (!bucket) throw std::invalid_argument("bad time bucket");
                s.user = observe(s.user, Observation{leaf, p.at("help").get<bool>(), *bucket}, cm.model.user_config);
                s.pending_help.erase(leaf);
                if (s.completed.insert(leaf).second) team(TeamEventKind::Completed, leaf);
                break;
            }
            case EventKind::HelpRequested: {
                auto leaf = str(p, "leaf");
                s.pending_help.insert(leaf);
                team(TeamEventKind::HelpRequested, leaf);
                break;
            }
            case EventKind::Skipped:
            case EventKind::LoopExited: {
                auto node = str(p, "node");
                auto a = e.kind == EventKind::Skipped ? Action::skip(node) : Action::exit_loop(node);
                StateId from = s.state;
                s.state = step_checked(cm.pdfa, from, a);
                s.last_surprisal = surprisal(cm.pdfa, from, a);
                break;
            }
            case EventKind::SignalFrame: {
                merge_frame(s, cm, parse_signal_frame(Json{{"signals", p.at("signals")}}, e.timestamp), e.timestamp);
                s.active_alerts.clear();
                for (const auto& a : p.at("active")) s.active_alerts.push_back(alert_from_json(a));
                break;
            }
            case EventKind::Unblocked:
                if (auto* t = team(TeamEventKind::Unblocked, str(p, "leaf"))) t->cause_leaf = str(p, "cause");
                break;
            case EventKind::TeamNote: {
                auto kind = parse_team_event_kind(str(p, "kind"));
                if (!kind) throw std::invalid_argument("bad team note kind");
                if (auto* t = team(*kind, str(p, "leaf"))) {
                    if (p.contains("tsa") && !p["tsa"].is_null()) {
                        auto level = parse_tsa_level(str(p, "tsa"));
                        if (!level) throw std::invalid_argument("bad tsa level");
                        t->tag = SaBreakdownTag{*level, p.value("note", "")};
                    }
                }
                break;
            }
            case EventKind::Finished:
                s.status = SessionStatus::Finished;
                break;
            case EventKind::Alert:
            case EventKind::TierChanged:
            case EventKind::ProblemReported:
            case EventKind::ContextViewed:
            case EventKind::TeamViewed:
            case EventKind::ChecklistWarning:
                break;
        }
    } catch (const Json::exception& ex) {
        throw std::invalid_argument(std::string("malformed ") + std::string(to_string(e.kind)) +
                                    " event: " + ex.what());
    } catch (const DegenerateLikelihood& ex) {
        throw std::invalid_argument(ex.what());
    }
    return out;
}

SessionSnapshot replay_session(const CompiledModel& cm, std::span<const SessionEvent> log) {
    if (log.empty() || log.front().kind != EventKind::Created)
        throw std::invalid_argument("a session log starts with a Created event");
    SessionSnapshot s;
    for (const auto& e : log) apply_event(s, cm, e);
    return s;
}

// ------------------------------------------------------------ report

Json build_report(std::span<const SessionEvent> log) {
    Json r;
    Json durations = Json::array(), extra = Json::array(), contexts = Json::array(),
         problems = Json::array(), notified = Json::array(), tier_changes = Json::array(),
         skipped = Json::array();
    Json per_leaf = Json::object();
    std::int64_t total = 0;
    r["status"] = "active";
    r["team_members"] = Json::array();
    r["finished_at"] = nullptr;
    for (const auto& e : log) {
        const Json& p = e.payload;
        switch (e.kind) {
            case EventKind::Created:
                r["session_id"] = p.at("session");
                r["model_id"] = p.at("model");
                r["user"] = {{"id", p.at("user")}, {"name", p.at("user_name")}, {"role", p.at("role")}};
                r["team_id"] = p.at("team");
                r["started_at"] = e.timestamp;
                r["final_posterior"] = p.at("posterior");
                r["final_level"] = p.at("level");
                r["final_tier"] = p.at("tier");
                break;
            case EventKind::Completed: {
                auto leaf = p.at("leaf").get<std::string>();
                auto d = p.at("duration").get<std::int64_t>();
                durations.push_back({{"leaf", leaf}, {"seconds", d}});
                per_leaf[leaf] = per_leaf.value(leaf, std::int64_t{0}) + d;
                total += d;
                r["final_posterior"] = p.at("posterior");
                r["final_level"] = p.at("level");
                r["final_tier"] = p.at("tier");
                break;
            }
            case EventKind::HelpRequested:
                extra.push_back({{"kind", "help"}, {"leaf", p.at("leaf")}, {"tier", p.at("tier")}, {"timestamp", e.timestamp}});
                break;
            case EventKind::ContextViewed:
                extra.push_back({{"kind", "context_view"}, {"step", p.at("step")}, {"timestamp", e.timestamp}});
                break;
            case EventKind::TeamViewed:
                extra.push_back({{"kind", "team_detail"}, {"team", p.at("team")}, {"timestamp", e.timestamp}});
                break;
            case EventKind::Alert:
                contexts.push_back(p);
                break;
            case EventKind::ProblemReported: {
                Json q = p;
                q["timestamp"] = e.timestamp;
                problems.push_back(std::move(q));
                break;
            }
            case EventKind::Unblocked:
                notified.push_back({{"leaf", p.at("leaf")}, {"cause", p.at("cause")}, {"timestamp", e.timestamp}});
                break;
            case EventKind::TierChanged:
                tier_changes.push_back({{"from", p.at("from")}, {"to", p.at("to")}, {"timestamp", e.timestamp}});
                break;
            case EventKind::Skipped:
            case EventKind::LoopExited:
                skipped.push_back({{"action", e.kind == EventKind::Skipped ? "skip" : "exit"},
                                   {"node", p.at("node")},
                                   {"timestamp", e.timestamp}});
                break;
            case EventKind::Finished:
                r["status"] = "finished";
                r["finished_at"] = e.timestamp;
                r["team_members"] = p.at("members");
                break;
            default:
                break;
        }
    }
    r["durations"] = std::move(durations);
    r["per_leaf_durations"] = std::move(per_leaf);
    r["total_duration"] = total;
    r["extra_information"] = std::move(extra);
    r["contexts"] = std::move(contexts);
    r["problems"] = std::move(problems);
    r["teams_notified"] = std::move(notified);
    r["tier_changes"] = std::move(tier_changes);
    r["skipped"] = std::move(skipped);
    return r;
}

// ------------------------------------------------------------ service

struct SessionService::Session {
    mutable std::mutex mu;
    std::shared_ptr<const CompiledModel> cm;
    SessionSnapshot snap;
    std::vector<SessionEvent> log;
    fs::path file;
};

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ServiceError(ServiceErrorKind::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out) throw ServiceError(ServiceErrorKind::Io, "cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::vector<SessionEvent> read_log(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ServiceError(ServiceErrorKind::Io, "cannot read " + p.string());
    std::vector<SessionEvent> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(event_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw std::invalid_argument(p.filename().string() + ": " + e.what());
        }
    }
    return out;
}

std::string session_name(std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%04llu", static_cast<unsigned long long>(n));
    return buf;
}

std::optional<std::uint64_t> session_number(const std::string& sid) {
    if (sid.size() < 2 || sid[0] != 's') return std::nullopt;
    auto n = parse_integer(std::string_view(sid).substr(1));
    if (!n || *n < 0) return std::nullopt;
    return static_cast<std::uint64_t>(*n);
}

Json enabled_json(const Pdfa& p, StateId s) {
    Json j = Json::array();
    for (const auto& t : p.transitions(s)) j.push_back(to_string(t.action));
    return j;
}

ModelInfo info_of(const CompiledModel& cm) {
    return {cm.model.id, cm.model.name, leaves(cm.model.task_model).size(), cm.pdfa.state_count(),
            cm.pdfa.transition_count()};
}

}  // namespace

SessionService::SessionService(ServiceOptions opts) : opts_(std::move(opts)) {
    if (!opts_.clock) opts_.clock = system_clock_ms;
    std::error_code ec;
    for (const char* sub : {"models", "sessions", "outbox"}) {
        fs::create_directories(opts_.data_dir / sub, ec);
        if (ec)
            throw ServiceError(ServiceErrorKind::Io,
                               "cannot create " + (opts_.data_dir / sub).string() + ": " + ec.message());
    }
    load();
}

SessionService::~SessionService() = default;

std::vector<std::string> SessionService::warnings() const {
    std::lock_guard lock(warn_mu_);
    return warnings_;
}

void SessionService::warn(std::string msg) {
    std::lock_guard lock(warn_mu_);
    warnings_.push_back(std::move(msg));
}

void SessionService::load() {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(opts_.data_dir / "models"))
        if (entry.path().extension() == ".amm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            auto m = emaint::import_model(read_file(f));
            auto pdfa = compile(m.task_model);
            auto id = m.id;
            models_[id] = std::make_shared<const CompiledModel>(CompiledModel{std::move(m), std::move(pdfa)});
        } catch (const std::exception& e) {
            warn("skipped model " + f.filename().string() + ": " + e.what());
        }
    }

    files.clear();
    for (const auto& entry : fs::directory_iterator(opts_.data_dir / "sessions"))
        if (entry.path().extension() == ".log") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::int64_t, TeamEvent>> team_log;
    std::vector<std::string> finished_team_sessions;
    for (const auto& f : files) {
        try {
            auto log = read_log(f);
            if (log.empty() || log.front().kind != EventKind::Created)
                throw std::invalid_argument("log does not start with Created");
            auto model_id = log.front().payload.at("model").get<std::string>();
            auto it = models_.find(model_id);
            if (it == models_.end()) throw std::invalid_argument("unknown model '" + model_id + "'");
            auto s = std::make_shared<Session>();
            s->cm = it->second;
            s->file = f;
            std::vector<TeamEvent> team;
            for (const auto& e : log) {
                auto more = apply_event(s->snap, *s->cm, e);
                team.insert(team.end(), more.begin(), more.end());
            }
            s->log = std::move(log);
            const auto& sid = s->snap.session_id;
            if (sid != f.stem().string()) throw std::invalid_argument("session id does not match file name");
            if (s->snap.team_id) {
                feed_.register_session(sid, *s->snap.team_id, s->snap.user_id);
                if (s->snap.status == SessionStatus::Finished) finished_team_sessions.push_back(sid);
            }
            for (auto& t : team) team_log.emplace_back(t.timestamp, std::move(t));
            if (auto n = session_number(sid)) next_session_ = std::max(next_session_, *n + 1);
            sessions_[sid] = std::move(s);
        } catch (const std::exception& e) {
            warn("skipped session " + f.filename().string() + ": " + e.what());
        }
    }
    std::stable_sort(team_log.begin(), team_log.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [ts, e] : team_log) {
        try {
            feed_.record(e);
        } catch (const TeamError&) {
        }
    }
    for (const auto& sid : finished_team_sessions) feed_.mark_finished(sid);
}

ModelInfo SessionService::import_model(std::string_view document) {
    ArMaintenanceModel m;
    try {
        m = emaint::import_model(document);
    } catch (const ModelImportError& e) {
        throw ServiceError(ServiceErrorKind::Validation, "model import failed", e.diagnostics());
    }
    auto pdfa = compile(m.task_model);
    auto canonical = export_model(m);
    std::unique_lock lock(mu_);
    if (auto it = models_.find(m.id); it != models_.end()) {
        if (it->second->model == m) return info_of(*it->second);
        throw ServiceError(ServiceErrorKind::Conflict,
                           "model '" + m.id + "' already exists with different content");
    }
    write_file(opts_.data_dir / "models" / (m.id + ".amm"), canonical);
    auto cm = std::make_shared<const CompiledModel>(CompiledModel{std::move(m), std::move(pdfa)});
    models_[cm->model.id] = cm;
    return info_of(*cm);
}

std::vector<ModelInfo> SessionService::list_models() const {
    std::shared_lock lock(mu_);
    std::vector<ModelInfo> out;
    for (const auto& [id, cm] : models_) out.push_back(info_of(*cm));
    return out;
}

std::shared_ptr<const CompiledModel> SessionService::model(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = models_.find(id);
    if (it == models_.end()) throw ServiceError(ServiceErrorKind::UnknownModel, "unknown model '" + id + "'");
    return it->second;
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& sid) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end())
        throw ServiceError(ServiceErrorKind::UnknownSession, "unknown session '" + sid + "'");
    return it->second;
}

std::vector<std::string> SessionService::list_sessions() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [sid, s] : sessions_) out.push_back(sid);
    return out;
}

fs::path SessionService::log_path(const std::string& sid) const {
    return opts_.data_dir / "sessions" / (sid + ".log");
}

void SessionService::append(Session& s, EventKind kind, Json payload) {
    SessionEvent e{s.log.size() + 1, opts_.clock(), kind, std::move(payload)};
    SessionSnapshot next = s.snap;
    auto team = apply_event(next, *s.cm, e);
    {
        std::ofstream out(s.file, std::ios::app | std::ios::binary);
        out << to_json(e).dump() << '\n';
        out.flush();
        if (!out) throw ServiceError(ServiceErrorKind::Io, "cannot append to " + s.file.string());
    }
    s.snap = std::move(next);
    s.log.push_back(std::move(e));
    for (const auto& t : team) {
        try {
            feed_.record(t);
        } catch (const TeamError&) {
        }
    }
    {
        std::lock_guard lock(change_mu_);
        ++version_;
    }
    change_cv_.notify_all();
}

std::string SessionService::create_session(const std::string& model_id, const std::string& user_id,
                                           const std::optional<std::string>& team_id) {
    auto cm = model(model_id);
    const auto& users = cm->model.users;
    auto user = std::find_if(users.begin(), users.end(), [&](const UserRecord& u) { return u.id == user_id; });
    if (user == users.end())
        throw ServiceError(ServiceErrorKind::UnknownUser,
                           "user '" + user_id + "' is not listed in model '" + model_id + "'");
    if (team_id && !is_identifier(*team_id))
        throw ServiceError(ServiceErrorKind::Validation, "team id '" + *team_id + "' is not an identifier");

    auto s = std::make_shared<Session>();
    s->cm = cm;
    std::string sid;
    {
        std::unique_lock lock(mu_);
        sid = session_name(next_session_++);
        sessions_[sid] = s;
    }
    std::lock_guard slock(s->mu);
    s->file = log_path(sid);
    UserState initial = initial_user_state(cm->model.user_config, user->initial_level);
    Level level = classify(initial.posterior);
    Json created{{"session", sid},
                 {"model", model_id},
                 {"user", user_id},
                 {"user_name", user->name},
                 {"role", std::string(to_string(user->role))},
                 {"posterior", posterior_json(initial.posterior)},
                 {"level", std::string(to_string(level))},
                 {"tier", std::string(to_string(initial.current_tier))}};
    created["team"] = team_id ? Json(*team_id) : Json(nullptr);
    created["initial_level"] =
        user->initial_level ? Json(std::string(to_string(*user->initial_level))) : Json(nullptr);
    if (team_id) feed_.register_session(sid, *team_id, user_id);
    try {
        append(*s, EventKind::Created, std::move(created));
        append(*s, EventKind::StepShown,
               {{"state", cm->pdfa.initial().value}, {"enabled", enabled_json(cm->pdfa, cm->pdfa.initial())}});
    } catch (...) {
        std::unique_lock lock(mu_);
        sessions_.erase(sid);
        throw;
    }
    return sid;
}

void SessionService::check_active(const Session& s) const {
    if (s.snap.status == SessionStatus::Finished)
        throw ServiceError(ServiceErrorKind::SessionFinished, "session '" + s.snap.session_id + "' is finished");
}

void SessionService::illegal(Session& s, const Action& a, const std::string& reason) {
    append(s, EventKind::ChecklistWarning,
           {{"action", to_string(a)}, {"reason", reason}, {"enabled", enabled_json(s.cm->pdfa, s.snap.state)}});
    throw ServiceError(ServiceErrorKind::IllegalAction, reason);
}

std::string SessionService::describe_leaf(const std::string& sid, const std::string& leaf) const {
    std::shared_ptr<const CompiledModel> cm;
    {
        std::shared_lock lock(mu_);
        auto it = sessions_.find(sid);
        if (it == sessions_.end()) return {};
        cm = it->second->cm;
    }
    const auto* l = find_leaf(cm->model.task_model, leaf);
    return l ? l->description : std::string{};
}

StepView SessionService::view_locked(const Session& s) const {
    const auto& cm = *s.cm;
    StepView v;
    v.session_id = s.snap.session_id;
    v.status = s.snap.status;
    v.state = s.snap.state.value;
    v.accepting = cm.pdfa.is_accepting(s.snap.state);
    for (const auto& t : cm.pdfa.transitions(s.snap.state)) v.enabled.push_back({t.action, t.probability});
    v.tier = s.snap.user.current_tier;
    v.content_tier = v.tier;
    if (v.enabled.size() == 1 && v.enabled.front().action.kind == ActionKind::Complete) {
        v.leaf = v.enabled.front().action.node;
        v.content_tier = resolved_tier(cm.model, *v.leaf, v.tier);
        v.content = resolve_step_content(cm.model, *v.leaf, v.tier);
    }
    v.alerts = s.snap.active_alerts;
    auto current = completable_leaves(cm.pdfa, s.snap.state);
    for (const auto& l : leaves(cm.model.task_model))
        v.checklist.push_back({l.id, l.description, s.snap.completed.count(l.id) > 0,
                               std::find(current.begin(), current.end(), l.id) != current.end()});
    if (s.snap.team_id) {
        try {
            v.team_line = feed_
                              .summary(*s.snap.team_id,
                                       [this](const std::string& sid, const std::string& leaf) {
                                           return describe_leaf(sid, leaf);
                                       },
                                       opts_.team_recent)
                              .status_line;
        } catch (const TeamError&) {
        }
    }
    return v;
}

StepView SessionService::current_step(const std::string& sid) const {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    check_active(*s);
    return view_locked(*s);
}

StepView SessionService::complete_task(const std::string& sid, const std::string& leaf, std::int64_t duration_s) {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    check_active(*s);
    const auto& cm = *s->cm;
    if (duration_s < 0) throw ServiceError(ServiceErrorKind::Validation, "duration must be >= 0 seconds");
    auto a = Action::complete(leaf);
    const auto* task = find_leaf(cm.model.task_model, leaf);
    if (!task) illegal(*s, a, "unknown leaf '" + leaf + "'");
    if (!is_enabled(cm.pdfa, s->snap.state, a)) illegal(*s, a, "'" + leaf + "' is not enabled in the current step");

    const auto& cfg = cm.model.user_config;
    bool help = s->snap.pending_help.count(leaf) > 0;
    auto bucket = bucket_time(static_cast<double>(duration_s), static_cast<double>(task->nominal_duration), cfg);
    UserState next;
    try {
        next = observe(s->snap.user, Observation{leaf, help, bucket}, cfg);
    } catch (const DegenerateLikelihood& e) {
        throw ServiceError(ServiceErrorKind::Validation, e.what());
    }
    StateId from = s->snap.state;
    StateId to = step(cm.pdfa, from, a);
    bool first = s->snap.completed.count(leaf) == 0;
    InterfaceTier old_tier = s->snap.user.current_tier;

    append(*s, EventKind::Completed,
           {{"leaf", leaf},
            {"duration", duration_s},
            {"help", help},
            {"bucket", std::string(to_string(bucket))},
            {"from", from.value},
            {"to", to.value},
            {"surprisal", surprisal(cm.pdfa, from, a)},
            {"posterior", posterior_json(next.posterior)},
            {"level", std::string(to_string(classify(next.posterior)))},
            {"tier", std::string(to_string(next.current_tier))}});
    if (next.current_tier != old_tier)
        append(*s, EventKind::TierChanged,
               {{"from", std::string(to_string(old_tier))},
                {"to", std::string(to_string(next.current_tier))},
                {"streak", cfg.switch_streak}});
    if (first) {
        TeamEvent cause{s->snap.team_id.value_or(""), s->snap.user_id, sid, leaf, TeamEventKind::Completed, 0, {}, {}};
        for (const auto& u : notify_unblocked(cause, cm.model.dependencies))
            append(*s, EventKind::Unblocked, {{"leaf", u.leaf_id}, {"cause", leaf}});
    }
    append(*s, EventKind::StepShown, {{"state", to.value}, {"enabled", enabled_json(cm.pdfa, to)}});
    return view_locked(*s);
}

StepView SessionService::advance(const std::string& sid, const Action& a) {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    check_active(*s);
    const auto& cm = *s->cm;
    if (!is_enabled(cm.pdfa, s->snap.state, a)) illegal(*s, a, "'" + to_string(a) + "' is not enabled in the current step");
    StateId from = s->snap.state;
    StateId to = step(cm.pdfa, from, a);
    append(*s, a.kind == ActionKind::Skip ? EventKind::Skipped : EventKind::LoopExited,
           {{"node", a.node}, {"from", from.value}, {"to", to.value}, {"surprisal", surprisal(cm.pdfa, from, a)}});
    append(*s, EventKind::StepShown, {{"state", to.value}, {"enabled", enabled_json(cm.pdfa, to)}});
    return view_locked(*s);
}

StepView SessionService::skip(const std::string& sid, const std::string& node) {
    return advance(sid, Action::skip(node));
}

StepView SessionService::exit_loop(const std::string& sid, const std::string& node) {
    return advance(sid, Action::exit_loop(node));
}

HelpResult SessionService::request_help(const std::string& sid, const std::string& leaf) {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    check_active(*s);
    const auto& cm = *s->cm;
    if (!is_enabled(cm.pdfa, s->snap.state, Action::complete(leaf)))
        illegal(*s, Action::request_help(), "help on '" + leaf + "' which is not enabled in the current step");
    HelpResult h;
    h.leaf_id = leaf;
    h.tier = more_supportive(s->snap.user.current_tier);
    h.content_tier = resolved_tier(cm.model, leaf, h.tier);
    h.components = resolve_step_content(cm.model, leaf, h.tier);
    h.count = 1;
    for (auto it = s->log.rbegin(); it != s->log.rend(); ++it) {
        if (it->kind == EventKind::Completed && it->payload.at("leaf") == leaf) break;
        if (it->kind == EventKind::HelpRequested && it->payload.at("leaf") == leaf) ++h.count;
    }
    append(*s, EventKind::HelpRequested,
           {{"leaf", leaf},
            {"tier", std::string(to_string(h.tier))},
            {"content_tier", std::string(to_string(h.content_tier))},
            {"count", h.count}});
    return h;
}

std::vector<Alert> SessionService::ingest_signals(const std::string& sid, const SignalFrame& frame) {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    check_active(*s);
    const auto& cm = *s->cm;
    std::set<std::string> raw;
    for (const auto& src : cm.model.sources) raw.insert(src.signals.begin(), src.signals.end());
    std::vector<std::string> unknown;
    for (const auto& [name, sample] : frame)
        if (!raw.count(name)) unknown.push_back(name);
    if (!unknown.empty()) {
        std::string names;
        for (const auto& n : unknown) names += (names.empty() ? "" : ", ") + n;
        throw ServiceError(ServiceErrorKind::UnknownSignal, "signals not declared by any source: " + names);
    }

    std::int64_t now = opts_.clock();
    SessionSnapshot probe = s->snap;
    merge_frame(probe, cm, frame, now);
    auto current = completable_leaves(cm.pdfa, probe.state);
    double elapsed = static_cast<double>(now - probe.step_started_at) / 1000.0;
    auto eval = evaluate_contexts(cm.model.contexts, current, probe.frame, elapsed, probe.last_surprisal, now);

    std::set<std::string> before;
    for (const auto& a : s->snap.active_alerts) before.insert(a.rule_id);
    std::vector<Alert> fresh;
    Json active = Json::array();
    for (const auto& a : eval.alerts) {
        active.push_back(to_json(a));
        if (!before.count(a.rule_id)) fresh.push_back(a);
    }
    append(*s, EventKind::SignalFrame, {{"signals", to_json(frame)}, {"active", std::move(active)}});
    for (const auto& a : fresh) append(*s, EventKind::Alert, to_json(a));
    return fresh;
}

std::vector<Alert> SessionService::replay_signal_file(const std::string& sid, const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ServiceError(ServiceErrorKind::Io, "cannot read " + file.string());
    std::vector<Alert> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        SignalFrame frame;
        try {
            auto j = Json::parse(line);
            frame = parse_signal_frame(j, j.value("t", std::int64_t{0}));
        } catch (const std::exception& e) {
            throw ServiceError(ServiceErrorKind::Validation,
                               file.filename().string() + ":" + std::to_string(n) + ": " + e.what());
        }
        auto more = ingest_signals(sid, frame);
        out.insert(out.end(), more.begin(), more.end());
    }
    return out;
}

void SessionService::report_problem(const std::string& sid, const ProblemReport& p) {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    check_active(*s);
    if (!p.leaf_id.empty() && !find_leaf(s->cm->model.task_model, p.leaf_id))
        throw ServiceError(ServiceErrorKind::Validation, "unknown leaf '" + p.leaf_id + "'");
    append(*s, EventKind::ProblemReported,
           {{"category", std::string(to_string(p.category))}, {"leaf", p.leaf_id}, {"note", p.note}});
}

void SessionService::add_team_note(const std::string& sid, const std::string& leaf, TeamEventKind kind,
                                   const std::optional<SaBreakdownTag>& tag) {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    check_active(*s);
    if (!s->snap.team_id) throw ServiceError(ServiceErrorKind::Validation, "session has no team");
    if (kind != TeamEventKind::Blocked && kind != TeamEventKind::Unblocked)
        throw ServiceError(ServiceErrorKind::Validation, "team notes are 'blocked' or 'unblocked'");
    if (leaf.empty()) throw ServiceError(ServiceErrorKind::Validation, "team note needs a leaf or task name");
    Json p{{"leaf", leaf}, {"kind", std::string(to_string(kind))}};
    p["tsa"] = tag ? Json(std::string(to_string(tag->level))) : Json(nullptr);
    p["note"] = tag ? tag->note : std::string{};
    append(*s, EventKind::TeamNote, std::move(p));
}

void SessionService::deliver(const std::string& sid, const Json& report, FinishResult& out) {
    auto text = report.dump(2) + "\n";
    if (opts_.report_url) {
        const auto& url = *opts_.report_url;
        auto scheme_end = url.find("://");
        auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto path_start = url.find('/', host_start);
        std::string base = url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
        httplib::Client client(base);
        client.set_connection_timeout(2);
        client.set_read_timeout(5);
        auto res = client.Post(path, text, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            out.delivery = "http";
            out.location = url;
            return;
        }
        warn("report for " + sid + " not accepted by " + url + " (" +
             (res ? "status " + std::to_string(res->status) : httplib::to_string(res.error())) +
             "); written to the outbox");
    }
    auto file = opts_.data_dir / "outbox" / (sid + ".report.json");
    write_file(file, text);
    out.delivery = "outbox";
    out.location = file.string();
}

FinishResult SessionService::finish_session(const std::string& sid) {
    auto s = find(sid);
    FinishResult out;
    {
        std::lock_guard lock(s->mu);
        check_active(*s);
        if (!s->cm->pdfa.is_accepting(s->snap.state))
            throw ServiceError(ServiceErrorKind::ProcedureIncomplete,
                               "the procedure is not complete; finish is available once every required step is done");
        Json members = Json::array();
        if (s->snap.team_id)
            for (const auto& m : feed_.members(*s->snap.team_id)) members.push_back(m);
        append(*s, EventKind::Finished, {{"members", std::move(members)}});
        if (s->snap.team_id) feed_.mark_finished(sid);
        out.report = build_report(s->log);
    }
    deliver(sid, out.report, out);
    return out;
}

Json SessionService::report_from_log(const std::string& sid) const {
    find(sid);
    try {
        return build_report(read_log(log_path(sid)));
    } catch (const std::invalid_argument& e) {
        throw ServiceError(ServiceErrorKind::Io, e.what());
    }
}

UserView SessionService::user_view(const std::string& sid) const {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    const auto& u = s->snap.user;
    return {s->snap.user_id, u.posterior, classify(u.posterior), u.current_tier, u.history.size()};
}

SectionView SessionService::context_view(const std::string& sid, int step) {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    SectionView v;
    try {
        v = step_back_context(s->cm->model, step);
    } catch (const InvalidStep& e) {
        throw ServiceError(ServiceErrorKind::UnknownView, e.what());
    }
    if (s->snap.status == SessionStatus::Active) append(*s, EventKind::ContextViewed, {{"step", step}});
    return v;
}

SessionSnapshot SessionService::snapshot(const std::string& sid) const {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    return s->snap;
}

TeamView SessionService::team_summary(const std::string& team_id) const {
    try {
        return feed_.summary(
            team_id, [this](const std::string& sid, const std::string& leaf) { return describe_leaf(sid, leaf); },
            opts_.team_recent);
    } catch (const TeamError& e) {
        throw ServiceError(ServiceErrorKind::UnknownTeam, e.what());
    }
}

TeamView SessionService::team_detail(const std::string& team_id, const std::optional<std::string>& viewer) {
    auto view = team_summary(team_id);
    if (viewer) {
        auto s = find(*viewer);
        std::lock_guard lock(s->mu);
        if (s->snap.status == SessionStatus::Active) append(*s, EventKind::TeamViewed, {{"team", team_id}});
    }
    return view;
}

std::vector<TeamEvent> SessionService::team_events(const std::string& team_id) const {
    if (!feed_.has_team(team_id)) throw ServiceError(ServiceErrorKind::UnknownTeam, "unknown team '" + team_id + "'");
    return feed_.team_events(team_id);
}

std::vector<SessionEvent> SessionService::events(const std::string& sid, std::uint64_t since) const {
    auto s = find(sid);
    std::lock_guard lock(s->mu);
    std::vector<SessionEvent> out;
    for (const auto& e : s->log)
        if (e.seq > since) out.push_back(e);
    return out;
}

std::uint64_t SessionService::version() const {
    std::lock_guard lock(change_mu_);
    return version_;
}

std::uint64_t SessionService::wait_for_change(std::uint64_t seen, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(change_mu_);
    change_cv_.wait_for(lock, timeout, [&] { return version_ != seen; });
    return version_;
}

}  // namespace emaint
