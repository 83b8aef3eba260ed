#include "emaint/context_sa.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "emaint/numeric_text.hpp"

namespace emaint {

namespace {

std::string_view op_text(CompareOp op) {
    switch (op) {
        case CompareOp::Less: return "<";
        case CompareOp::LessEqual: return "<=";
        case CompareOp::Greater: return ">";
        case CompareOp::GreaterEqual: return ">=";
        case CompareOp::Equal: return "==";
        case CompareOp::NotEqual: return "!=";
    }
    return ">";
}

bool compare(double lhs, CompareOp op, double rhs) {
    switch (op) {
        case CompareOp::Less: return lhs < rhs;
        case CompareOp::LessEqual: return lhs <= rhs;
        case CompareOp::Greater: return lhs > rhs;
        case CompareOp::GreaterEqual: return lhs >= rhs;
        case CompareOp::Equal: return lhs == rhs;
        case CompareOp::NotEqual: return lhs != rhs;
    }
    return false;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '<' || c == '>' || c == '=' || c == '!') {
            std::string tok(1, c);
            if (i + 1 < text.size() && text[i + 1] == '=') tok += '=';
            i += tok.size();
            out.push_back(tok);
        } else {
            std::size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
                   text[j] != '<' && text[j] != '>' && text[j] != '=' && text[j] != '!')
                ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        }
    }
    return out;
}

std::optional<CompareOp> parse_op(const std::string& s) {
    for (auto op : {CompareOp::Less, CompareOp::LessEqual, CompareOp::Greater,
                    CompareOp::GreaterEqual, CompareOp::Equal, CompareOp::NotEqual})
        if (op_text(op) == s) return op;
    return std::nullopt;
}

}  // namespace

Predicate parse_predicate(std::string_view text) {
    auto toks = tokenize(text);
    Predicate p;
    std::size_t i = 0;
    auto fail = [&](const std::string& msg) -> void {
        throw PredicateError("predicate '" + std::string(text) + "': " + msg);
    };
    if (toks.empty()) fail("empty predicate");
    while (true) {
        if (i + 3 > toks.size()) fail("expected '<signal|elapsed|surprisal> <op> <number>'");
        Comparison c;
        const std::string& name = toks[i];
        if (name == "elapsed") {
            c.operand = Comparison::Operand::Elapsed;
        } else if (name == "surprisal") {
            c.operand = Comparison::Operand::Surprisal;
        } else if (is_identifier(name) && name != "and") {
            c.operand = Comparison::Operand::Signal;
            c.signal = name;
        } else {
            fail("invalid operand '" + name + "'");
        }
        auto op = parse_op(toks[i + 1]);
        if (!op) fail("invalid comparison operator '" + toks[i + 1] + "'");
        c.op = *op;
        auto v = parse_real(toks[i + 2]);
        if (!v) fail("invalid number '" + toks[i + 2] + "'");
        c.value = *v;
        p.terms.push_back(std::move(c));
        i += 3;
        if (i == toks.size()) break;
        if (toks[i] != "and") fail("expected 'and' but found '" + toks[i] + "'");
        ++i;
    }
    return p;
}

std::string format_predicate(const Predicate& p) {
    std::string out;
    for (std::size_t i = 0; i < p.terms.size(); ++i) {
        const auto& t = p.terms[i];
        if (i) out += " and ";
        switch (t.operand) {
            case Comparison::Operand::Elapsed: out += "elapsed"; break;
            case Comparison::Operand::Surprisal: out += "surprisal"; break;
            case Comparison::Operand::Signal: out += t.signal; break;
        }
        out += ' ';
        out += op_text(t.op);
        out += ' ';
        out += format_real(t.value);
    }
    return out;
}

std::vector<std::string> referenced_signals(const Predicate& p) {
    std::vector<std::string> out;
    for (const auto& t : p.terms)
        if (t.operand == Comparison::Operand::Signal &&
            std::find(out.begin(), out.end(), t.signal) == out.end())
            out.push_back(t.signal);
    return out;
}

std::string_view to_string(AlertSeverity s) {
    switch (s) {
        case AlertSeverity::Info: return "info";
        case AlertSeverity::Warning: return "warning";
        case AlertSeverity::Danger: return "danger";
    }
    return "info";
}

std::optional<AlertSeverity> parse_severity(std::string_view s) {
    for (auto v : {AlertSeverity::Info, AlertSeverity::Warning, AlertSeverity::Danger})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

bool holds(const Predicate& p, const SignalFrame& frame, double elapsed, double surprisal) {
    for (const auto& t : p.terms) {
        double lhs = 0;
        switch (t.operand) {
            case Comparison::Operand::Elapsed: lhs = elapsed; break;
            case Comparison::Operand::Surprisal: lhs = surprisal; break;
            case Comparison::Operand::Signal: {
                auto it = frame.find(t.signal);
                if (it == frame.end()) return false;
                lhs = it->second.value;
                break;
            }
        }
        if (!compare(lhs, t.op, t.value)) return false;
    }
    return true;
}

ContextEvaluation evaluate_contexts(std::span<const ContextRule> rules,
                                    std::span<const std::string> current_leaves,
                                    const SignalFrame& frame, double elapsed, double surprisal,
                                    std::int64_t timestamp) {
    std::vector<const ContextRule*> ordered;
    for (const auto& r : rules) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ContextRule* a, const ContextRule* b) { return a->id < b->id; });

    ContextEvaluation out;
    for (const ContextRule* r : ordered) {
        std::optional<std::string> leaf;
        if (!r->scope.empty()) {
            for (const auto& cur : current_leaves)
                if (std::find(r->scope.begin(), r->scope.end(), cur) != r->scope.end()) {
                    leaf = cur;
                    break;
                }
            if (!leaf) continue;
        } else if (current_leaves.size() == 1) {
            leaf = current_leaves.front();
        }
        bool missing = false;
        for (const auto& sig : referenced_signals(r->predicate))
            if (!frame.count(sig)) {
                out.problems.push_back({Severity::Warning, "UnknownSignal", "contexts." + r->id,
                                        "rule '" + r->id + "' references signal '" + sig +
                                            "' absent from the frame",
                                        std::nullopt});
                missing = true;
            }
        if (missing) continue;
        if (holds(r->predicate, frame, elapsed, surprisal))
            out.alerts.push_back(Alert{r->id, r->severity, r->message, leaf, timestamp});
    }
    return out;
}

// ------------------------------------------------------------ team feed

std::string_view to_string(TeamEventKind k) {
    switch (k) {
        case TeamEventKind::Started: return "started";
        case TeamEventKind::Completed: return "completed";
        case TeamEventKind::Blocked: return "blocked";
        case TeamEventKind::Unblocked: return "unblocked";
        case TeamEventKind::HelpRequested: return "help_requested";
    }
    return "started";
}

std::optional<TeamEventKind> parse_team_event_kind(std::string_view s) {
    for (auto k : {TeamEventKind::Started, TeamEventKind::Completed, TeamEventKind::Blocked,
                   TeamEventKind::Unblocked, TeamEventKind::HelpRequested})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::string_view to_string(TsaLevel t) {
    switch (t) {
        case TsaLevel::Tsa1_NotTransmitted: return "tsa1_not_transmitted";
        case TsaLevel::Tsa2_Miscomprehended: return "tsa2_miscomprehended";
        case TsaLevel::Tsa3_ImplicationsMissed: return "tsa3_implications_missed";
    }
    return "tsa1_not_transmitted";
}

std::optional<TsaLevel> parse_tsa_level(std::string_view s) {
    for (auto t : {TsaLevel::Tsa1_NotTransmitted, TsaLevel::Tsa2_Miscomprehended,
                   TsaLevel::Tsa3_ImplicationsMissed})
        if (to_string(t) == s) return t;
    return std::nullopt;
}

std::vector<TeamEvent> notify_unblocked(const TeamEvent& cause, const DependencyMap& deps) {
    std::vector<TeamEvent> out;
    auto it = deps.find(cause.leaf_id);
    if (it == deps.end()) return out;
    for (const auto& dependent : it->second) {
        TeamEvent e = cause;
        e.kind = TeamEventKind::Unblocked;
        e.leaf_id = dependent;
        e.cause_leaf = cause.leaf_id;
        e.tag.reset();
        out.push_back(std::move(e));
    }
    return out;
}

std::string describe(const TeamEvent& e) {
    std::string s = "t=" + std::to_string(e.timestamp) + " " + e.member_id + " " +
                    std::string(to_string(e.kind)) + " " + e.leaf_id;
    if (e.cause_leaf) s += " (after " + *e.cause_leaf + ")";
    if (e.tag) s += " [" + std::string(to_string(e.tag->level)) + ": " + e.tag->note + "]";
    return s;
}

std::string TeamView::compact() const {
    std::string out = status_line + "\n";
    for (const auto& m : members) out += m.line + "\n";
    return out;
}

std::string TeamView::detail() const {
    std::string out = status_line + "\n";
    for (const auto& m : members) {
        out += m.line + "\n";
        for (const auto& e : m.recent) out += "    " + describe(e) + "\n";
    }
    return out;
}

void TeamFeed::register_session(const std::string& session_id, const std::string& team_id,
                                const std::string& member_id) {
    std::lock_guard lock(mu_);
    sessions_[session_id] = TeamMembership{team_id, member_id, false};
}

void TeamFeed::mark_finished(const std::string& session_id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end())
        throw TeamError(TeamErrorKind::UnknownSession, "unknown session '" + session_id + "'");
    it->second.finished = true;
}

void TeamFeed::record(const TeamEvent& e) {
    std::vector<Subscriber> subs;
    {
        std::lock_guard lock(mu_);
        if (!sessions_.count(e.session_id))
            throw TeamError(TeamErrorKind::UnknownSession,
                            "unknown session '" + e.session_id + "'");
        if (e.kind == TeamEventKind::Completed) {
            auto key = std::make_pair(e.session_id, e.leaf_id);
            if (completed_.count(key))
                throw TeamError(TeamErrorKind::AlreadyCompleted,
                                "leaf '" + e.leaf_id + "' already completed in session '" +
                                    e.session_id + "'");
            completed_[key] = true;
        }
        log_.push_back(e);
        for (const auto& [token, s] : subscribers_) subs.push_back(s);
    }
    for (const auto& s : subs) s(e);
}

std::size_t TeamFeed::subscribe(Subscriber s) {
    std::lock_guard lock(mu_);
    std::size_t token = next_token_++;
    subscribers_[token] = std::move(s);
    return token;
}

void TeamFeed::unsubscribe(std::size_t token) {
    std::lock_guard lock(mu_);
    subscribers_.erase(token);
}

std::vector<TeamEvent> TeamFeed::events() const {
    std::lock_guard lock(mu_);
    return log_;
}

std::vector<TeamEvent> TeamFeed::team_events(const std::string& team_id) const {
    std::lock_guard lock(mu_);
    std::vector<TeamEvent> out;
    for (const auto& e : log_)
        if (e.team_id == team_id) out.push_back(e);
    return out;
}

bool TeamFeed::has_team(const std::string& team_id) const {
    std::lock_guard lock(mu_);
    for (const auto& [sid, m] : sessions_)
        if (m.team_id == team_id) return true;
    return false;
}

std::vector<std::string> TeamFeed::members(const std::string& team_id) const {
    std::lock_guard lock(mu_);
    std::set<std::string> out;
    for (const auto& [sid, m] : sessions_)
        if (m.team_id == team_id) out.insert(m.member_id);
    return {out.begin(), out.end()};
}

TeamView TeamFeed::summary(const std::string& team_id, const LeafDescriber& describe_leaf,
                           std::size_t recent_k) const {
    std::vector<TeamEvent> log;
    std::map<std::string, TeamMembership> sessions;
    {
        std::lock_guard lock(mu_);
        log = log_;
        sessions = sessions_;
    }
    return summarize_team(team_id, log, sessions, describe_leaf, recent_k);
}

TeamView summarize_team(const std::string& team_id, std::span<const TeamEvent> log,
                        const std::map<std::string, TeamMembership>& sessions,
                        const TeamFeed::LeafDescriber& describe_leaf, std::size_t recent_k) {
    // Latest session per member; session ids sort in creation order.
    std::map<std::string, std::string> member_session;
    for (const auto& [sid, m] : sessions)
        if (m.team_id == team_id) member_session[m.member_id] = sid;
    if (member_session.empty())
        throw TeamError(TeamErrorKind::UnknownTeam, "unknown team '" + team_id + "'");

    TeamView view;
    view.team_id = team_id;
    std::size_t active = 0;
    for (const auto& [member, sid] : member_session) {
        MemberView mv;
        mv.member_id = member;
        mv.session_id = sid;
        mv.active = !sessions.at(sid).finished;
        std::vector<std::string> open;  // started, not yet completed
        std::vector<TeamEvent> mine;
        for (const auto& e : log) {
            if (e.team_id != team_id || e.member_id != member) continue;
            mine.push_back(e);
            if (e.session_id != sid) continue;
            if (e.kind == TeamEventKind::Started) {
                open.erase(std::remove(open.begin(), open.end(), e.leaf_id), open.end());
                open.push_back(e.leaf_id);
            } else if (e.kind == TeamEventKind::Completed) {
                open.erase(std::remove(open.begin(), open.end(), e.leaf_id), open.end());
            }
        }
        std::size_t from = mine.size() > recent_k ? mine.size() - recent_k : 0;
        mv.recent.assign(mine.begin() + static_cast<std::ptrdiff_t>(from), mine.end());
        if (!mv.active) {
            mv.line = member + ": idle";
        } else if (!open.empty()) {
            mv.current_leaf = open.back();
            mv.description = describe_leaf ? describe_leaf(sid, open.back()) : std::string{};
            mv.line = member + ": " + open.back() +
                      (mv.description.empty() ? "" : " - " + mv.description);
            if (open.size() > 1) mv.line += " (+" + std::to_string(open.size() - 1) + " open)";
        } else {
            mv.line = member + ": between steps";
        }
        if (mv.active) ++active;
        view.members.push_back(std::move(mv));
    }
    view.status_line = "team " + team_id + ": " + std::to_string(view.members.size()) +
                       " members, " + std::to_string(active) + " active, " +
                       std::to_string(view.members.size() - active) + " idle";
    return view;
}

}  // namespace emaint
