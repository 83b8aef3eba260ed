#include "emaint/http_api.hpp"

#include <atomic>

#include <httplib.h>

#include "emaint/json_codec.hpp"
#include "emaint/numeric_text.hpp"

namespace emaint {

int http_status(ServiceErrorKind k) {
    switch (k) {
        case ServiceErrorKind::Validation:
        case ServiceErrorKind::UnknownSignal:
            return 400;
        case ServiceErrorKind::UnknownModel:
        case ServiceErrorKind::UnknownUser:
        case ServiceErrorKind::UnknownSession:
        case ServiceErrorKind::UnknownTeam:
        case ServiceErrorKind::UnknownView:
            return 404;
        case ServiceErrorKind::SessionFinished:
        case ServiceErrorKind::IllegalAction:
        case ServiceErrorKind::ProcedureIncomplete:
        case ServiceErrorKind::Conflict:
            return 409;
        case ServiceErrorKind::Io:
            return 500;
    }
    return 500;
}

namespace {

using Req = httplib::Request;
using Res = httplib::Response;

struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void send(Res& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(Res& res, int status, const std::string& code, const std::string& message,
                const Diagnostics& diags = {}) {
    Json j{{"error", code}, {"message", message}};
    if (!diags.empty()) {
        Json d = Json::array();
        for (const auto& x : diags) d.push_back(to_json(x));
        j["diagnostics"] = std::move(d);
    }
    send(res, status, j);
}

Json body_json(const Req& req) {
    if (req.body.empty()) return Json::object();
    try {
        auto j = Json::parse(req.body);
        if (!j.is_object()) throw BadRequest("request body must be a JSON object");
        return j;
    } catch (const Json::parse_error& e) {
        throw BadRequest(std::string("malformed JSON: ") + e.what());
    }
}

std::string need_string(const Json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw BadRequest(std::string("'") + key + "' must be a string");
    return j[key].get<std::string>();
}

std::optional<std::string> opt_string(const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw BadRequest(std::string("'") + key + "' must be a string");
    return j[key].get<std::string>();
}

template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const Req& req, Res& res) {
        try {
            f(req, res);
        } catch (const BadRequest& e) {
            send_error(res, 400, "Validation", e.what());
        } catch (const ServiceError& e) {
            send_error(res, http_status(e.kind()), std::string(to_string(e.kind())), e.what(), e.diagnostics());
        } catch (const std::invalid_argument& e) {
            send_error(res, 400, "Validation", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "Internal", e.what());
        }
    };
}

std::string sse(const std::string& id, const std::string& event, const Json& data) {
    std::string out;
    if (!id.empty()) out += "id: " + id + "\n";
    out += "event: " + event + "\ndata: " + data.dump() + "\n\n";
    return out;
}

}  // namespace

struct HttpApi::Impl {
    SessionService& svc;
    httplib::Server server;
    std::atomic<bool> stopping{false};
    int port = -1;

    explicit Impl(SessionService& s) : svc(s) { routes(); }

    void routes() {
        const std::string api = "/api/v1";
        const std::string sid = "/sessions/([A-Za-z0-9_-]+)";
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Headers", "Content-Type"},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server.Options(R"(/api/v1/.*)", [](const Req&, Res& res) { res.status = 204; });

        server.Get(api + "/models", guarded([this](const Req&, Res& res) {
            Json out = Json::array();
            for (const auto& m : svc.list_models()) out.push_back(to_json(m));
            send(res, 200, out);
        }));
        server.Post(api + "/models", guarded([this](const Req& req, Res& res) {
            std::string doc = req.body;
            if (req.get_header_value("Content-Type").rfind("application/json", 0) == 0)
                doc = need_string(body_json(req), "document");
            bool existed = false;
            auto info = [&] {
                auto before = svc.list_models().size();
                auto i = svc.import_model(doc);
                existed = svc.list_models().size() == before;
                return i;
            }();
            send(res, existed ? 200 : 201, to_json(info));
        }));
        server.Get(api + "/models/([a-z][a-z0-9_]*)", guarded([this](const Req& req, Res& res) {
            auto cm = svc.model(req.matches[1]);
            Json j = to_json(ModelInfo{cm->model.id, cm->model.name, leaves(cm->model.task_model).size(),
                                       cm->pdfa.state_count(), cm->pdfa.transition_count()});
            Json users = Json::array();
            for (const auto& u : cm->model.users) {
                Json uj{{"id", u.id}, {"name", u.name}, {"role", std::string(to_string(u.role))}};
                uj["initial_level"] = u.initial_level ? Json(std::string(to_string(*u.initial_level))) : Json(nullptr);
                users.push_back(std::move(uj));
            }
            Json ls = Json::array();
            for (const auto& l : leaves(cm->model.task_model))
                ls.push_back({{"id", l.id}, {"description", l.description}, {"nominal", l.nominal_duration}});
            j["users"] = std::move(users);
            j["leaf_tasks"] = std::move(ls);
            j["document"] = export_model(cm->model);
            send(res, 200, j);
        }));

        server.Get(api + "/sessions", guarded([this](const Req&, Res& res) { send(res, 200, svc.list_sessions()); }));
        server.Post(api + "/sessions", guarded([this](const Req& req, Res& res) {
            auto j = body_json(req);
            auto id = svc.create_session(need_string(j, "model"), need_string(j, "user"), opt_string(j, "team"));
            send(res, 201, {{"session", id}, {"step", to_json(svc.current_step(id))}});
        }));
        server.Get(api + sid + "/step", guarded([this](const Req& req, Res& res) {
            send(res, 200, to_json(svc.current_step(req.matches[1])));
        }));
        server.Post(api + sid + "/complete", guarded([this](const Req& req, Res& res) {
            auto j = body_json(req);
            if (!j.contains("duration") || !j["duration"].is_number_integer())
                throw BadRequest("'duration' must be an integer number of seconds");
            send(res, 200, to_json(svc.complete_task(req.matches[1], need_string(j, "leaf"),
                                                      j["duration"].get<std::int64_t>())));
        }));
        server.Post(api + sid + "/skip", guarded([this](const Req& req, Res& res) {
            send(res, 200, to_json(svc.skip(req.matches[1], need_string(body_json(req), "node"))));
        }));
        server.Post(api + sid + "/exit-loop", guarded([this](const Req& req, Res& res) {
            send(res, 200, to_json(svc.exit_loop(req.matches[1], need_string(body_json(req), "node"))));
        }));
        server.Post(api + sid + "/help", guarded([this](const Req& req, Res& res) {
            send(res, 200, to_json(svc.request_help(req.matches[1], need_string(body_json(req), "leaf"))));
        }));
        server.Post(api + sid + "/signals", guarded([this](const Req& req, Res& res) {
            auto j = body_json(req);
            std::vector<Json> frames;
            if (j.contains("frames")) {
                if (!j["frames"].is_array()) throw BadRequest("'frames' must be a list");
                frames.assign(j["frames"].begin(), j["frames"].end());
            } else {
                frames.push_back(j);
            }
            Json alerts = Json::array();
            for (const auto& f : frames) {
                std::int64_t ts = f.is_object() && f.contains("t") && f["t"].is_number_integer()
                                      ? f["t"].get<std::int64_t>()
                                      : system_clock_ms();
                for (const auto& a : svc.ingest_signals(req.matches[1], parse_signal_frame(f, ts)))
                    alerts.push_back(to_json(a));
            }
            send(res, 200, {{"alerts", std::move(alerts)}});
        }));
        server.Post(api + sid + "/problem", guarded([this](const Req& req, Res& res) {
            auto j = body_json(req);
            auto cat = parse_problem_category(need_string(j, "category"));
            if (!cat)
                throw BadRequest("'category' must be one of incorrect_documentation, inaccurate_tracking, "
                                 "polluted_interface, insufficient_response_time");
            svc.report_problem(req.matches[1],
                               ProblemReport{*cat, opt_string(j, "leaf").value_or(""), opt_string(j, "note").value_or("")});
            send(res, 201, {{"ok", true}});
        }));
        server.Post(api + sid + "/team-note", guarded([this](const Req& req, Res& res) {
            auto j = body_json(req);
            auto kind = parse_team_event_kind(opt_string(j, "kind").value_or("blocked"));
            if (!kind) throw BadRequest("'kind' must be 'blocked' or 'unblocked'");
            std::optional<SaBreakdownTag> tag;
            if (auto tsa = opt_string(j, "tsa")) {
                auto level = parse_tsa_level(*tsa);
                if (!level) throw BadRequest("unknown 'tsa' level '" + *tsa + "'");
                tag = SaBreakdownTag{*level, opt_string(j, "note").value_or("")};
            }
            svc.add_team_note(req.matches[1], need_string(j, "leaf"), *kind, tag);
            send(res, 201, {{"ok", true}});
        }));
        server.Post(api + sid + "/finish", guarded([this](const Req& req, Res& res) {
            auto r = svc.finish_session(req.matches[1]);
            send(res, 200, {{"report", r.report}, {"delivery", r.delivery}, {"location", r.location}});
        }));
        server.Get(api + sid + "/report", guarded([this](const Req& req, Res& res) {
            send(res, 200, svc.report_from_log(req.matches[1]));
        }));
        server.Get(api + sid + "/user", guarded([this](const Req& req, Res& res) {
            send(res, 200, to_json(svc.user_view(req.matches[1])));
        }));
        server.Get(api + sid + R"(/context/(\d+))", guarded([this](const Req& req, Res& res) {
            int step = 0;
            try {
                step = std::stoi(req.matches[2]);
            } catch (const std::exception&) {
                step = -1;
            }
            send(res, 200, to_json(svc.context_view(req.matches[1], step)));
        }));
        server.Get(api + sid + "/events", guarded([this](const Req& req, Res& res) { events(req, res); }));

        server.Get(api + "/teams/([a-z][a-z0-9_]*)", guarded([this](const Req& req, Res& res) {
            send(res, 200, to_json(svc.team_summary(req.matches[1]), false));
        }));
        server.Get(api + "/teams/([a-z][a-z0-9_]*)/detail", guarded([this](const Req& req, Res& res) {
            std::optional<std::string> viewer;
            if (req.has_param("session")) viewer = req.get_param_value("session");
            send(res, 200, to_json(svc.team_detail(req.matches[1], viewer), true));
        }));
    }

    void events(const Req& req, Res& res) {
        std::string id = req.matches[1];
        std::uint64_t since = 0;
        if (req.has_param("since")) {
            auto n = parse_integer(req.get_param_value("since"));
            if (!n || *n < 0) throw BadRequest("'since' must be a non-negative integer");
            since = static_cast<std::uint64_t>(*n);
        } else if (req.has_header("Last-Event-ID")) {
            auto n = parse_integer(req.get_header_value("Last-Event-ID"));
            if (n && *n >= 0) since = static_cast<std::uint64_t>(*n);
        }
        bool follow = !(req.has_param("follow") && req.get_param_value("follow") == "0");
        auto team = svc.snapshot(id).team_id;  // also checks the session exists

        struct Cursor {
            std::uint64_t seq;
            std::size_t team_index = 0;
        };
        auto cursor = std::make_shared<Cursor>(Cursor{since});
        auto drain = [this, id, team, cursor]() {
            std::string out;
            for (const auto& e : svc.events(id, cursor->seq)) {
                out += sse(std::to_string(e.seq), std::string(to_string(e.kind)), to_json(e));
                cursor->seq = e.seq;
            }
            if (team) {
                auto tev = svc.team_events(*team);
                for (; cursor->team_index < tev.size(); ++cursor->team_index)
                    out += sse("", "team", to_json(tev[cursor->team_index]));
            }
            return out;
        };

        res.set_header("Cache-Control", "no-cache");
        if (!follow) {
            res.set_content(drain(), "text/event-stream");
            return;
        }
        res.set_chunked_content_provider("text/event-stream", [this, drain](std::size_t, httplib::DataSink& sink) {
            std::uint64_t seen = svc.version();
            std::string chunk = drain();
            if (chunk.empty()) chunk = ": keepalive\n\n";
            if (!sink.write(chunk.data(), chunk.size())) return false;
            if (stopping) {
                sink.done();
                return true;
            }
            svc.wait_for_change(seen, std::chrono::milliseconds(500));
            return !stopping.load();
        });
    }
};

HttpApi::HttpApi(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpApi::~HttpApi() { stop(); }

bool HttpApi::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
        return impl_->port > 0;
    }
    if (!impl_->server.bind_to_port(host, port)) return false;
    impl_->port = port;
    return true;
}

int HttpApi::port() const { return impl_->port; }

bool HttpApi::serve() { return impl_->server.listen_after_bind(); }

void HttpApi::stop() {
    impl_->stopping = true;
    impl_->server.stop();
}

bool HttpApi::running() const { return impl_->server.is_running(); }

}  // namespace emaint
