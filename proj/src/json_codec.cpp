#include "emaint/json_codec.hpp"

#include <stdexcept>

namespace emaint {

Json posterior_json(const Distribution& d) {
    Json j = Json::object();
    for (Level l : kAllLevels) j[std::string(to_string(l))] = d[index(l)];
    return j;
}

Distribution posterior_from_json(const Json& j) {
    Distribution d{};
    for (Level l : kAllLevels) d[index(l)] = j.at(std::string(to_string(l))).get<double>();
    return d;
}

Json to_json(const Diagnostic& d) {
    Json j{{"severity", d.severity == Severity::Error ? "error" : "warning"},
           {"code", d.code},
           {"path", d.path},
           {"message", d.message}};
    if (d.position) j["position"] = {{"line", d.position->line}, {"column", d.position->column}};
    return j;
}

Json to_json(const Alert& a) {
    Json j{{"rule", a.rule_id},
           {"severity", std::string(to_string(a.severity))},
           {"message", a.message},
           {"timestamp", a.timestamp}};
    j["leaf"] = a.leaf_id ? Json(*a.leaf_id) : Json(nullptr);
    return j;
}

Alert alert_from_json(const Json& j) {
    Alert a;
    a.rule_id = j.at("rule").get<std::string>();
    auto sev = parse_severity(j.at("severity").get<std::string>());
    if (!sev) throw std::invalid_argument("bad alert severity");
    a.severity = *sev;
    a.message = j.at("message").get<std::string>();
    a.timestamp = j.at("timestamp").get<std::int64_t>();
    if (j.contains("leaf") && !j["leaf"].is_null()) a.leaf_id = j["leaf"].get<std::string>();
    return a;
}

Json to_json(const EnabledAction& a) {
    Json j{{"action", to_string(a.action)},
           {"kind", a.action.kind == ActionKind::Complete   ? "complete"
                    : a.action.kind == ActionKind::Skip     ? "skip"
                    : a.action.kind == ActionKind::ExitLoop ? "exit"
                                                            : "help"},
           {"node", a.action.node}};
    j["probability"] = a.probability ? Json(*a.probability) : Json(nullptr);
    return j;
}

Json to_json(const ContentComponent& c) {
    Json j{{"kind", std::string(to_string(c.kind))}, {"payload", c.payload}};
    if (c.anchor) j["anchor"] = *c.anchor;
    return j;
}

Json to_json(const std::vector<ContentComponent>& cs) {
    Json j = Json::array();
    for (const auto& c : cs) j.push_back(to_json(c));
    return j;
}

Json to_json(const TeamEvent& e) {
    Json j{{"team", e.team_id},
           {"member", e.member_id},
           {"session", e.session_id},
           {"leaf", e.leaf_id},
           {"kind", std::string(to_string(e.kind))},
           {"timestamp", e.timestamp},
           {"text", describe(e)}};
    if (e.cause_leaf) j["cause"] = *e.cause_leaf;
    if (e.tag) j["tag"] = {{"level", std::string(to_string(e.tag->level))}, {"note", e.tag->note}};
    return j;
}

Json to_json(const TeamView& v, bool detail) {
    Json members = Json::array();
    for (const auto& m : v.members) {
        Json mj{{"member", m.member_id},
                {"session", m.session_id},
                {"active", m.active},
                {"line", m.line}};
        mj["current_leaf"] = m.current_leaf ? Json(*m.current_leaf) : Json(nullptr);
        if (detail) {
            Json recent = Json::array();
            for (const auto& e : m.recent) recent.push_back(to_json(e));
            mj["recent"] = std::move(recent);
        }
        members.push_back(std::move(mj));
    }
    return {{"team", v.team_id},
            {"status", v.status_line},
            {"members", std::move(members)},
            {"text", detail ? v.detail() : v.compact()}};
}

Json to_json(const SectionView& v) {
    Json entries = Json::array();
    for (const auto& [label, text] : v.entries) entries.push_back({{"label", label}, {"text", text}});
    return {{"step", v.step}, {"title", v.title}, {"entries", std::move(entries)}};
}

Json to_json(const StepView& v) {
    Json enabled = Json::array();
    for (const auto& a : v.enabled) enabled.push_back(to_json(a));
    Json alerts = Json::array();
    for (const auto& a : v.alerts) alerts.push_back(to_json(a));
    Json checklist = Json::array();
    for (const auto& c : v.checklist)
        checklist.push_back(
            {{"leaf", c.leaf_id}, {"description", c.description}, {"done", c.done}, {"current", c.current}});
    Json j{{"session", v.session_id},
           {"status", std::string(to_string(v.status))},
           {"state", v.state},
           {"accepting", v.accepting},
           {"enabled", std::move(enabled)},
           {"tier", std::string(to_string(v.tier))},
           {"content_tier", std::string(to_string(v.content_tier))},
           {"content", to_json(v.content)},
           {"selection", v.enabled.size() > 1},
           {"alerts", std::move(alerts)},
           {"checklist", std::move(checklist)}};
    j["leaf"] = v.leaf ? Json(*v.leaf) : Json(nullptr);
    j["team"] = v.team_line ? Json(*v.team_line) : Json(nullptr);
    return j;
}

Json to_json(const HelpResult& h) {
    return {{"leaf", h.leaf_id},
            {"tier", std::string(to_string(h.tier))},
            {"content_tier", std::string(to_string(h.content_tier))},
            {"content", to_json(h.components)},
            {"count", h.count},
            {"temporary", true}};
}

Json to_json(const UserView& u) {
    return {{"user", u.user_id},
            {"posterior", posterior_json(u.posterior)},
            {"level", std::string(to_string(u.level))},
            {"tier", std::string(to_string(u.tier))},
            {"observations", u.observations}};
}

Json to_json(const ModelInfo& m) {
    return {{"id", m.id},
            {"name", m.name},
            {"leaves", m.leaves},
            {"states", m.states},
            {"transitions", m.transitions}};
}

Json to_json(const SignalFrame& f) {
    Json j = Json::object();
    for (const auto& [name, s] : f) j[name] = {{"value", s.value}, {"timestamp", s.timestamp}};
    return j;
}

}  // namespace emaint
