#include "emaint/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "emaint/automaton.hpp"
#include "emaint/http_api.hpp"
#include "emaint/maintenance_model.hpp"
#include "emaint/session_service.hpp"
#include "emaint/simulation.hpp"
#include "emaint/numeric_text.hpp"

namespace emaint {

namespace {

struct Loaded {
    ArMaintenanceModel model;
    Diagnostics problems;
};

bool read_text(const std::string& path, std::string& text, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        err << "cannot read " << path << "\n";
        return false;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    return true;
}

bool is_task_file(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".tm") == 0;
}

/// `.tm` files hold a bare task model (default user config); anything else
/// is read as a `.amm` document.
Loaded load(const std::string& path, const std::string& text) {
    Loaded l;
    if (is_task_file(path)) {
        try {
            l.model.task_model = parse_model(text);
            l.problems = validate(l.model.task_model);
        } catch (const ParseError& e) {
            l.problems.push_back({Severity::Error, std::string(to_string(e.kind())), path, e.detail(), e.position()});
        }
        return l;
    }
    try {
        l.model = import_model(text);
    } catch (const ModelImportError& e) {
        l.problems = e.diagnostics();
    }
    return l;
}

void print_diagnostics(const Diagnostics& d, std::ostream& out) {
    for (const auto& x : d) out << format_diagnostic(x) << "\n";
}

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

int serve(int port, const std::string& host, const std::string& data_dir,
          const std::optional<std::string>& report_url, const std::vector<std::string>& preload,
          std::ostream& out, std::ostream& err) {
    // Block termination signals here so every thread inherits the mask and a
    // dedicated thread can sigwait for them.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    std::unique_ptr<SessionService> svc;
    try {
        svc = std::make_unique<SessionService>(ServiceOptions{data_dir, report_url, {}, 10});
    } catch (const std::exception& e) {
        err << "cannot open data directory: " << e.what() << "\n";
        return kExitIo;
    }
    for (const auto& w : svc->warnings()) err << "warning: " << w << "\n";
    for (const auto& path : preload) {
        std::string text;
        if (!read_text(path, text, err)) return kExitIo;
        try {
            auto info = svc->import_model(text);
            out << "imported " << info.id << "\n";
        } catch (const ServiceError& e) {
            err << path << ": " << e.what() << "\n";
            print_diagnostics(e.diagnostics(), err);
            return kExitValidation;
        }
    }
    HttpApi api(*svc);
    if (!api.bind(host, port)) {
        err << "cannot bind " << host << ":" << port << "\n";
        return kExitBind;
    }
    out << "listening on " << host << ":" << api.port() << "\n" << std::flush;
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        api.stop();
    });
    api.serve();
    // serve() may also return on its own; wake the waiter in that case.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    out << "stopped\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Authoring, compilation, simulation and serving of AR maintenance models", "emaint"};
    app.require_subcommand(1);

    std::string path, dot_out, level_text = "expert", host = "127.0.0.1", data_dir, report_url;
    std::uint64_t seed = 1;
    std::size_t steps = 30, max_states = CompileOptions{}.max_states;
    int port = 8080;
    std::vector<std::string> preload;

    auto* validate_cmd = app.add_subcommand("validate", "Check a .amm model or .tm task model");
    validate_cmd->add_option("path", path, "Model file")->required();

    auto* compile_cmd = app.add_subcommand("compile", "Compile the task model to a PDFA and print its size");
    compile_cmd->add_option("path", path, "Model file")->required();
    compile_cmd->add_option("--dot", dot_out, "Write the automaton as Graphviz text");
    compile_cmd->add_option("--max-states", max_states, "State cap")->check(CLI::PositiveNumber);

    auto* sim_cmd = app.add_subcommand("simulate", "Run a simulated user of a given expertise");
    sim_cmd->add_option("path", path, "Model file")->required();
    sim_cmd->add_option("--level", level_text, "none, basic, advanced or expert")
        ->check(CLI::IsMember({"none", "basic", "advanced", "expert"}));
    sim_cmd->add_option("--seed", seed, "Random seed");
    sim_cmd->add_option("--steps", steps, "Number of steps");

    auto* serve_cmd = app.add_subcommand("serve", "Serve the session HTTP API");
    serve_cmd->add_option("--port", port, "Listen port (env EMAINT_PORT)");
    serve_cmd->add_option("--host", host, "Listen address");
    serve_cmd->add_option("--data-dir", data_dir, "Data directory (env EMAINT_DATA_DIR)");
    serve_cmd->add_option("--report-url", report_url, "E-maintenance report endpoint (env EMAINT_REPORT_URL)");
    serve_cmd->add_option("--model", preload, "Import these .amm files at startup");

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
    }

    if (*serve_cmd) {
        if (serve_cmd->count("--port") == 0)
            if (auto p = env("EMAINT_PORT")) {
                auto n = parse_integer(*p);
                if (!n || *n < 0 || *n > 65535) {
                    err << "EMAINT_PORT is not a port number\n";
                    return kExitValidation;
                }
                port = static_cast<int>(*n);
            }
        if (data_dir.empty()) data_dir = env("EMAINT_DATA_DIR").value_or("emaint-data");
        std::optional<std::string> url;
        if (!report_url.empty()) url = report_url;
        else url = env("EMAINT_REPORT_URL");
        return serve(port, host, data_dir, url, preload, out, err);
    }

    std::string text;
    if (!read_text(path, text, err)) return kExitIo;
    Loaded l = load(path, text);

    if (*validate_cmd) {
        print_diagnostics(l.problems, out);
        return l.problems.empty() ? kExitOk : kExitValidation;
    }
    bool has_error = std::any_of(l.problems.begin(), l.problems.end(),
                                 [](const Diagnostic& d) { return d.severity == Severity::Error; });
    if (has_error) {
        print_diagnostics(l.problems, err);
        return kExitValidation;
    }

    Pdfa pdfa;
    try {
        pdfa = compile(l.model.task_model, CompileOptions{max_states});
    } catch (const AutomatonError& e) {
        err << e.what() << "\n";
        return e.kind() == AutomatonErrorKind::StateExplosion ? kExitResourceCap : kExitValidation;
    }

    if (*compile_cmd) {
        out << "states=" << pdfa.state_count() << " transitions=" << pdfa.transition_count()
            << " accepting=" << pdfa.accepting_states().size() << "\n";
        if (!dot_out.empty()) {
            std::ofstream f(dot_out, std::ios::binary | std::ios::trunc);
            f << to_dot(pdfa, l.model.id.empty() ? "pdfa" : l.model.id);
            if (!f) {
                err << "cannot write " << dot_out << "\n";
                return kExitIo;
            }
        }
        return kExitOk;
    }

    auto level = parse_level(level_text);
    out << format_simulation(simulate_user(l.model, pdfa, *level, seed, steps));
    return kExitOk;
}

}  // namespace emaint
