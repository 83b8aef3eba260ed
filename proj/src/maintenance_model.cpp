#include "emaint/maintenance_model.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <yaml-cpp/yaml.h>

#include "emaint/automaton.hpp"
#include "yaml_support.hpp"

namespace emaint {

using detail::add_error;
using detail::scalar;
using detail::string_list;

std::string_view to_string(UserRole r) { return r == UserRole::Engineer ? "engineer" : "technician"; }

std::string_view to_string(SourceKind k) {
    switch (k) {
        case SourceKind::Sensor: return "sensor";
        case SourceKind::EMaintenanceService: return "emaintenance_service";
        case SourceKind::Wsn: return "wsn";
    }
    return "sensor";
}

std::string_view to_string(SourceTransport t) {
    return t == SourceTransport::ReplayFile ? "replay_file" : "http_push";
}

std::string_view to_string(ComponentKind k) {
    switch (k) {
        case ComponentKind::Text: return "text";
        case ComponentKind::Image: return "image";
        case ComponentKind::Video: return "video";
        case ComponentKind::Overlay3d: return "overlay3d";
        case ComponentKind::Hud: return "hud";
    }
    return "text";
}

namespace {

std::string_view to_string(DerivedSignal::Function f) {
    return f == DerivedSignal::Function::MovingAverage ? "moving_average" : "threshold_count";
}

template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view s, const E (&values)[N]) {
    for (E v : values)
        if (to_string(v) == s) return v;
    return std::nullopt;
}

template <typename E, std::size_t N>
E enum_field(const YAML::Node& n, const std::string& path, Diagnostics& d, const E (&values)[N],
             E fallback) {
    auto text = scalar<std::string>(n, path, d);
    if (text.empty() && !n) return fallback;
    auto v = parse_enum(text, values);
    if (!v) {
        std::string allowed;
        for (E e : values) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(e));
        add_error(d, "InvalidValue", path, "'" + text + "' is not one of: " + allowed);
        return fallback;
    }
    return *v;
}

bool is_asset_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (std::isupper(static_cast<unsigned char>(c)) || std::isspace(static_cast<unsigned char>(c)))
            return false;
    return true;
}

constexpr SourceKind kSourceKinds[] = {SourceKind::Sensor, SourceKind::EMaintenanceService, SourceKind::Wsn};
constexpr SourceTransport kTransports[] = {SourceTransport::ReplayFile, SourceTransport::HttpPush};
constexpr UserRole kRoles[] = {UserRole::Technician, UserRole::Engineer};
constexpr ComponentKind kComponentKinds[] = {ComponentKind::Text, ComponentKind::Image,
                                             ComponentKind::Video, ComponentKind::Overlay3d,
                                             ComponentKind::Hud};
constexpr AlertSeverity kSeverities[] = {AlertSeverity::Info, AlertSeverity::Warning,
                                         AlertSeverity::Danger};
constexpr DerivedSignal::Function kFunctions[] = {DerivedSignal::Function::MovingAverage,
                                                  DerivedSignal::Function::ThresholdCount};
constexpr Level kLevels[] = {Level::None_, Level::Basic, Level::Advanced, Level::Expert};
constexpr InterfaceTier kTiers[] = {InterfaceTier::Text, InterfaceTier::Visual, InterfaceTier::Ar,
                                    InterfaceTier::Video};

void check_keys(const YAML::Node& n, const std::string& path, std::initializer_list<const char*> known,
                Diagnostics& d) {
    if (!n || !n.IsMap()) return;
    for (const auto& kv : n) {
        auto key = kv.first.as<std::string>();
        bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
        if (!ok) add_error(d, "UnknownKey", detail::join_path(path, key), "unknown key '" + key + "'");
    }
}

bool expect_map(const YAML::Node& n, const std::string& path, Diagnostics& d) {
    if (n && !n.IsMap()) {
        add_error(d, "TypeError", path, "expected a map");
        return false;
    }
    return static_cast<bool>(n);
}

bool expect_seq(const YAML::Node& n, const std::string& path, Diagnostics& d) {
    if (n && !n.IsSequence()) {
        add_error(d, "TypeError", path, "expected a list");
        return false;
    }
    return static_cast<bool>(n);
}

std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

// ------------------------------------------------------------ reading

struct Reader {
    Diagnostics& d;
    bool task_model_ok = false;

    EquipmentRecord equipment(const YAML::Node& n, const std::string& p) {
        EquipmentRecord e;
        if (!expect_map(n, p, d)) {
            if (!n) add_error(d, "MissingSection", p, "equipment record is required");
            return e;
        }
        check_keys(n, p, {"id", "name", "documentation", "parts", "media", "target_part"}, d);
        e.id = scalar<std::string>(n["id"], p + ".id", d);
        e.name = n["name"] ? scalar<std::string>(n["name"], p + ".name", d) : "";
        e.documentation = string_list(n["documentation"], p + ".documentation", d);
        if (expect_seq(n["parts"], p + ".parts", d))
            for (std::size_t i = 0; i < n["parts"].size(); ++i) {
                const auto& pn = n["parts"][i];
                std::string pp = idx(p + ".parts", i);
                if (!expect_map(pn, pp, d)) continue;
                check_keys(pn, pp, {"id", "name", "tools"}, d);
                Part part;
                part.id = scalar<std::string>(pn["id"], pp + ".id", d);
                part.name = pn["name"] ? scalar<std::string>(pn["name"], pp + ".name", d) : "";
                part.tools = string_list(pn["tools"], pp + ".tools", d);
                e.parts.push_back(std::move(part));
            }
        if (expect_map(n["media"], p + ".media", d))
            for (const auto& kv : n["media"])
                e.media[kv.first.as<std::string>()] =
                    scalar<std::string>(kv.second, p + ".media." + kv.first.as<std::string>(), d);
        if (n["target_part"]) e.target_part = scalar<std::string>(n["target_part"], p + ".target_part", d);
        return e;
    }

    EnvironmentRecord environment(const YAML::Node& n, const std::string& p) {
        EnvironmentRecord e;
        if (!expect_map(n, p, d)) {
            if (!n) add_error(d, "MissingSection", p, "environment record is required");
            return e;
        }
        check_keys(n, p, {"id", "safety_notes", "neighbors"}, d);
        e.id = scalar<std::string>(n["id"], p + ".id", d);
        e.safety_notes = string_list(n["safety_notes"], p + ".safety_notes", d);
        if (expect_seq(n["neighbors"], p + ".neighbors", d))
            for (std::size_t i = 0; i < n["neighbors"].size(); ++i) {
                const auto& nn = n["neighbors"][i];
                std::string np = idx(p + ".neighbors", i);
                if (!expect_map(nn, np, d)) continue;
                check_keys(nn, np, {"id", "name", "note"}, d);
                NeighborEquipment ne;
                ne.id = scalar<std::string>(nn["id"], np + ".id", d);
                if (nn["name"]) ne.name = scalar<std::string>(nn["name"], np + ".name", d);
                if (nn["note"]) ne.note = scalar<std::string>(nn["note"], np + ".note", d);
                e.neighbors.push_back(std::move(ne));
            }
        return e;
    }

    std::vector<UserRecord> users(const YAML::Node& n, const std::string& p) {
        std::vector<UserRecord> out;
        if (!expect_seq(n, p, d)) return out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            std::string up = idx(p, i);
            if (!expect_map(n[i], up, d)) continue;
            check_keys(n[i], up, {"id", "name", "role", "initial_level"}, d);
            UserRecord u;
            u.id = scalar<std::string>(n[i]["id"], up + ".id", d);
            if (n[i]["name"]) u.name = scalar<std::string>(n[i]["name"], up + ".name", d);
            if (n[i]["role"]) u.role = enum_field(n[i]["role"], up + ".role", d, kRoles, UserRole::Technician);
            if (n[i]["initial_level"])
                u.initial_level = enum_field(n[i]["initial_level"], up + ".initial_level", d, kLevels, Level::None_);
            out.push_back(std::move(u));
        }
        return out;
    }

    std::vector<ExternalSource> sources(const YAML::Node& n, const std::string& p) {
        std::vector<ExternalSource> out;
        if (!expect_seq(n, p, d)) return out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            std::string sp = idx(p, i);
            if (!expect_map(n[i], sp, d)) continue;
            check_keys(n[i], sp, {"id", "kind", "transport", "signals"}, d);
            ExternalSource s;
            s.id = scalar<std::string>(n[i]["id"], sp + ".id", d);
            s.kind = enum_field(n[i]["kind"], sp + ".kind", d, kSourceKinds, SourceKind::Sensor);
            s.transport = enum_field(n[i]["transport"], sp + ".transport", d, kTransports, SourceTransport::HttpPush);
            s.signals = string_list(n[i]["signals"], sp + ".signals", d);
            out.push_back(std::move(s));
        }
        return out;
    }

    std::vector<DerivedSignal> derived(const YAML::Node& n, const std::string& p) {
        std::vector<DerivedSignal> out;
        if (!expect_seq(n, p, d)) return out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            std::string dp = idx(p, i);
            if (!expect_map(n[i], dp, d)) continue;
            check_keys(n[i], dp, {"name", "function", "input", "window", "threshold"}, d);
            DerivedSignal s;
            s.name = scalar<std::string>(n[i]["name"], dp + ".name", d);
            s.function = enum_field(n[i]["function"], dp + ".function", d, kFunctions,
                                    DerivedSignal::Function::MovingAverage);
            s.input = scalar<std::string>(n[i]["input"], dp + ".input", d);
            auto w = scalar<long long>(n[i]["window"], dp + ".window", d, 1);
            if (w < 1) add_error(d, "InvalidValue", dp + ".window", "window must be >= 1");
            s.window = static_cast<std::uint32_t>(std::max<long long>(w, 1));
            if (n[i]["threshold"]) s.threshold = scalar<double>(n[i]["threshold"], dp + ".threshold", d);
            out.push_back(std::move(s));
        }
        return out;
    }

    TaskModel tasks(const YAML::Node& n, const std::string& p) {
        if (!n) {
            add_error(d, "MissingSection", p, "task model is required");
            return {};
        }
        auto text = scalar<std::string>(n, p, d);
        try {
            TaskModel m = parse_model(text);
            task_model_ok = true;
            return m;
        } catch (const ParseError& e) {
            d.push_back({Severity::Error, std::string(to_string(e.kind())), p,
                         e.detail() + " (task block line " + std::to_string(e.position().line) +
                             ", column " + std::to_string(e.position().column) + ")",
                         std::nullopt});
        }
        return {};
    }

    std::vector<ContextRule> contexts(const YAML::Node& n, const std::string& p) {
        std::vector<ContextRule> out;
        if (!expect_seq(n, p, d)) return out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            std::string cp = idx(p, i);
            if (!expect_map(n[i], cp, d)) continue;
            check_keys(n[i], cp, {"id", "scope", "when", "severity", "message"}, d);
            ContextRule r;
            r.id = scalar<std::string>(n[i]["id"], cp + ".id", d);
            r.scope = string_list(n[i]["scope"], cp + ".scope", d);
            try {
                r.predicate = parse_predicate(scalar<std::string>(n[i]["when"], cp + ".when", d));
            } catch (const PredicateError& e) {
                add_error(d, "InvalidPredicate", cp + ".when", e.what());
            }
            r.severity = enum_field(n[i]["severity"], cp + ".severity", d, kSeverities, AlertSeverity::Warning);
            if (n[i]["message"]) r.message = scalar<std::string>(n[i]["message"], cp + ".message", d);
            out.push_back(std::move(r));
        }
        return out;
    }

    DependencyMap dependencies(const YAML::Node& n, const std::string& p) {
        DependencyMap out;
        if (!expect_map(n, p, d)) return out;
        for (const auto& kv : n) {
            auto leaf = kv.first.as<std::string>();
            out[leaf] = string_list(kv.second, p + "." + leaf, d);
        }
        return out;
    }

    std::vector<ContentBinding> bindings(const YAML::Node& n, const std::string& p) {
        std::vector<ContentBinding> out;
        if (!expect_seq(n, p, d)) return out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            std::string bp = idx(p, i);
            if (!expect_map(n[i], bp, d)) continue;
            check_keys(n[i], bp, {"leaf", "tier", "key", "components"}, d);
            ContentBinding b;
            b.leaf_id = scalar<std::string>(n[i]["leaf"], bp + ".leaf", d);
            b.tier = enum_field(n[i]["tier"], bp + ".tier", d, kTiers, InterfaceTier::Text);
            if (n[i]["key"]) b.key = scalar<std::string>(n[i]["key"], bp + ".key", d);
            const auto& cs = n[i]["components"];
            if (!cs) add_error(d, "MissingField", bp + ".components", "binding needs components");
            if (expect_seq(cs, bp + ".components", d))
                for (std::size_t j = 0; j < cs.size(); ++j) {
                    std::string cp = idx(bp + ".components", j);
                    if (!expect_map(cs[j], cp, d)) continue;
                    check_keys(cs[j], cp, {"kind", "payload", "anchor"}, d);
                    ContentComponent c;
                    c.kind = enum_field(cs[j]["kind"], cp + ".kind", d, kComponentKinds, ComponentKind::Text);
                    if (cs[j]["payload"]) c.payload = scalar<std::string>(cs[j]["payload"], cp + ".payload", d);
                    if (cs[j]["anchor"]) c.anchor = scalar<std::string>(cs[j]["anchor"], cp + ".anchor", d);
                    b.components.push_back(std::move(c));
                }
            out.push_back(std::move(b));
        }
        return out;
    }
};

ArMaintenanceModel read_document(std::string_view text, Diagnostics& d, bool& task_model_ok) {
    ArMaintenanceModel m;
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        d.push_back({Severity::Error, "SyntaxError", "<document>", e.msg,
                     SourcePosition{static_cast<std::size_t>(e.mark.line + 1),
                                    static_cast<std::size_t>(e.mark.column + 1)}});
        return m;
    }
    if (!root.IsMap()) {
        add_error(d, "TypeError", "<document>", "model document must be a map of sections");
        return m;
    }
    check_keys(root, "", {"id", "name", "catalog", "sources", "derived_signals", "tasks", "contexts",
                          "dependencies", "user_config", "bindings"},
               d);
    Reader r{d};
    m.id = scalar<std::string>(root["id"], "id", d);
    if (root["name"]) m.name = scalar<std::string>(root["name"], "name", d);
    const auto& catalog = root["catalog"];
    if (!catalog) add_error(d, "MissingSection", "catalog", "catalog section is required");
    if (expect_map(catalog, "catalog", d)) {
        check_keys(catalog, "catalog", {"equipment", "environment", "users"}, d);
        m.equipment = r.equipment(catalog["equipment"], "catalog.equipment");
        m.environment = r.environment(catalog["environment"], "catalog.environment");
        m.users = r.users(catalog["users"], "catalog.users");
    }
    m.sources = r.sources(root["sources"], "sources");
    m.derived_signals = r.derived(root["derived_signals"], "derived_signals");
    m.task_model = r.tasks(root["tasks"], "tasks");
    m.contexts = r.contexts(root["contexts"], "contexts");
    m.dependencies = r.dependencies(root["dependencies"], "dependencies");
    m.user_config = detail::read_user_config(root["user_config"], "user_config", d);
    m.bindings = r.bindings(root["bindings"], "bindings");
    task_model_ok = r.task_model_ok;
    return m;
}

Diagnostics validate_aggregate(const ArMaintenanceModel& m, bool task_model_ok) {
    Diagnostics d;
    auto ident = [&](const std::string& v, const std::string& path) {
        if (!is_identifier(v)) add_error(d, "InvalidId", path, "'" + v + "' is not a valid identifier");
    };
    ident(m.id, "id");

    ident(m.equipment.id, "catalog.equipment.id");
    std::set<std::string> parts;
    for (std::size_t i = 0; i < m.equipment.parts.size(); ++i) {
        const auto& p = m.equipment.parts[i];
        std::string path = idx("catalog.equipment.parts", i);
        ident(p.id, path + ".id");
        if (!parts.insert(p.id).second) add_error(d, "DuplicateId", path + ".id", "duplicate part id '" + p.id + "'");
    }
    if (m.equipment.target_part && !parts.count(*m.equipment.target_part))
        add_error(d, "UnresolvedRef", "catalog.equipment.target_part",
                  "unknown part '" + *m.equipment.target_part + "'");
    for (const auto& [view, key] : m.equipment.media)
        if (!is_asset_key(key))
            add_error(d, "InvalidAssetKey", "catalog.equipment.media." + view,
                      "asset keys must be lowercase without spaces");

    ident(m.environment.id, "catalog.environment.id");
    std::set<std::string> neighbors;
    for (std::size_t i = 0; i < m.environment.neighbors.size(); ++i) {
        const auto& n = m.environment.neighbors[i];
        std::string path = idx("catalog.environment.neighbors", i);
        ident(n.id, path + ".id");
        if (n.id == m.equipment.id)
            add_error(d, "UnresolvedRef", path + ".id", "equipment cannot neighbor itself");
        if (!neighbors.insert(n.id).second)
            add_error(d, "DuplicateId", path + ".id", "duplicate neighbor id '" + n.id + "'");
    }

    std::set<std::string> users;
    for (std::size_t i = 0; i < m.users.size(); ++i) {
        std::string path = idx("catalog.users", i);
        ident(m.users[i].id, path + ".id");
        if (!users.insert(m.users[i].id).second)
            add_error(d, "DuplicateId", path + ".id", "duplicate user id '" + m.users[i].id + "'");
    }

    std::set<std::string> source_ids, raw_signals;
    for (std::size_t i = 0; i < m.sources.size(); ++i) {
        const auto& s = m.sources[i];
        std::string path = idx("sources", i);
        ident(s.id, path + ".id");
        if (!source_ids.insert(s.id).second) add_error(d, "DuplicateId", path + ".id", "duplicate source id");
        for (std::size_t j = 0; j < s.signals.size(); ++j) {
            ident(s.signals[j], idx(path + ".signals", j));
            if (!raw_signals.insert(s.signals[j]).second)
                add_error(d, "DuplicateSignal", idx(path + ".signals", j),
                          "signal '" + s.signals[j] + "' is provided by more than one source");
        }
    }
    std::set<std::string> all_signals = raw_signals;
    for (std::size_t i = 0; i < m.derived_signals.size(); ++i) {
        const auto& ds = m.derived_signals[i];
        std::string path = idx("derived_signals", i);
        ident(ds.name, path + ".name");
        if (!all_signals.insert(ds.name).second)
            add_error(d, "DuplicateSignal", path + ".name", "signal '" + ds.name + "' already declared");
        if (!raw_signals.count(ds.input))
            add_error(d, "UnknownSignal", path + ".input", "input '" + ds.input + "' is not a source signal");
    }

    std::set<std::string> leaf_ids;
    if (task_model_ok)
        for (const auto& l : leaves(m.task_model)) leaf_ids.insert(l.id);

    std::set<std::string> context_ids;
    for (std::size_t i = 0; i < m.contexts.size(); ++i) {
        const auto& r = m.contexts[i];
        std::string path = idx("contexts", i);
        ident(r.id, path + ".id");
        if (!context_ids.insert(r.id).second) add_error(d, "DuplicateId", path + ".id", "duplicate context id '" + r.id + "'");
        for (std::size_t j = 0; j < r.scope.size(); ++j)
            if (task_model_ok && !leaf_ids.count(r.scope[j]))
                add_error(d, "UnresolvedRef", idx(path + ".scope", j), "unknown leaf '" + r.scope[j] + "'");
        for (const auto& sig : referenced_signals(r.predicate))
            if (!all_signals.count(sig))
                add_error(d, "UnknownSignal", path + ".when", "signal '" + sig + "' is not declared by any source");
    }

    for (const auto& [leaf, deps] : m.dependencies)
        if (task_model_ok && !leaf_ids.count(leaf))
            add_error(d, "UnresolvedRef", "dependencies." + leaf, "unknown leaf '" + leaf + "'");

    std::set<std::pair<std::string, InterfaceTier>> bound;
    std::map<std::string, std::pair<std::string, InterfaceTier>> binding_keys;
    std::set<std::string> leaves_with_binding;
    for (std::size_t i = 0; i < m.bindings.size(); ++i) {
        const auto& b = m.bindings[i];
        std::string path = idx("bindings", i);
        if (task_model_ok && !leaf_ids.count(b.leaf_id))
            add_error(d, "UnresolvedRef", path + ".leaf", "unknown leaf '" + b.leaf_id + "'");
        leaves_with_binding.insert(b.leaf_id);
        if (!bound.insert({b.leaf_id, b.tier}).second)
            add_error(d, "DuplicateBinding", path,
                      "second binding for leaf '" + b.leaf_id + "' at tier " + std::string(to_string(b.tier)));
        if (b.key) {
            if (!is_asset_key(*b.key)) add_error(d, "InvalidAssetKey", path + ".key", "keys must be lowercase");
            if (!binding_keys.emplace(*b.key, std::make_pair(b.leaf_id, b.tier)).second)
                add_error(d, "DuplicateId", path + ".key", "duplicate binding key '" + *b.key + "'");
        }
        if (b.components.empty()) add_error(d, "EmptyBinding", path + ".components", "binding has no components");
        for (std::size_t j = 0; j < b.components.size(); ++j) {
            const auto& c = b.components[j];
            std::string cp = idx(path + ".components", j);
            bool needs_anchor = c.kind == ComponentKind::Overlay3d || c.kind == ComponentKind::Hud;
            if (needs_anchor && (!c.anchor || c.anchor->empty()))
                add_error(d, "MissingAnchor", cp, std::string(to_string(c.kind)) + " components need an anchor");
            if (c.kind == ComponentKind::Text && c.payload.empty())
                add_error(d, "EmptyText", cp + ".payload", "text components need a nonempty payload");
            if (c.kind != ComponentKind::Text && !is_asset_key(c.payload))
                add_error(d, "InvalidAssetKey", cp + ".payload", "asset keys must be lowercase without spaces");
        }
    }

    if (task_model_ok) {
        ValidationScope scope;
        scope.context_ids = context_ids;
        scope.binding_keys = binding_keys;
        for (auto diag : validate(m.task_model, scope)) {
            diag.path = "tasks." + diag.path;
            d.push_back(std::move(diag));
        }
        for (const auto& l : leaves(m.task_model))
            if (!leaves_with_binding.count(l.id))
                add_error(d, "MissingBinding", "tasks." + l.id, "leaf '" + l.id + "' has no content on any tier");
        try {
            compile(m.task_model);
        } catch (const AutomatonError& e) {
            add_error(d, e.kind() == AutomatonErrorKind::StateExplosion ? "StateExplosion" : "CompileError",
                      "tasks", e.what());
        }
    }
    return d;
}

// ------------------------------------------------------------ writing

void emit_string_list(YAML::Emitter& out, const std::vector<std::string>& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& s : v) out << s;
    out << YAML::EndSeq;
}

}  // namespace

ModelImportError::ModelImportError(Diagnostics diags)
    : std::runtime_error([&] {
          std::string msg = "model import failed with " + std::to_string(diags.size()) + " problem(s)";
          for (const auto& d : diags) msg += "\n  " + format_diagnostic(d);
          return msg;
      }()),
      diags_(std::move(diags)) {}

double moving_average(std::span<const double> history, std::uint32_t window) {
    if (history.empty()) return 0;
    std::size_t n = std::min<std::size_t>(window, history.size());
    double sum = 0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) sum += history[i];
    return sum / static_cast<double>(n);
}

double threshold_count(std::span<const double> history, std::uint32_t window, double threshold) {
    std::size_t n = std::min<std::size_t>(window, history.size());
    double count = 0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i)
        if (history[i] > threshold) count += 1;
    return count;
}

double compute_derived(const DerivedSignal& d, std::span<const double> history) {
    return d.function == DerivedSignal::Function::MovingAverage
               ? moving_average(history, d.window)
               : threshold_count(history, d.window, d.threshold);
}

Diagnostics validate_model(const ArMaintenanceModel& m) { return validate_aggregate(m, true); }

Diagnostics check_model(std::string_view text) {
    Diagnostics d;
    bool task_ok = false;
    ArMaintenanceModel m = read_document(text, d, task_ok);
    if (d.size() == 1 && d.front().path == "<document>") return d;
    auto more = validate_aggregate(m, task_ok);
    d.insert(d.end(), more.begin(), more.end());
    return d;
}

ArMaintenanceModel import_model(std::string_view text) {
    Diagnostics d;
    bool task_ok = false;
    ArMaintenanceModel m = read_document(text, d, task_ok);
    if (!(d.size() == 1 && d.front().path == "<document>")) {
        auto more = validate_aggregate(m, task_ok);
        d.insert(d.end(), more.begin(), more.end());
    }
    if (!d.empty()) throw ModelImportError(std::move(d));
    return m;
}

std::string export_model(const ArMaintenanceModel& m) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << m.id;
    if (!m.name.empty()) out << YAML::Key << "name" << YAML::Value << m.name;

    out << YAML::Key << "catalog" << YAML::Value << YAML::BeginMap;
    const auto& e = m.equipment;
    out << YAML::Key << "equipment" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << e.id;
    if (!e.name.empty()) out << YAML::Key << "name" << YAML::Value << e.name;
    if (!e.documentation.empty()) {
        out << YAML::Key << "documentation" << YAML::Value;
        emit_string_list(out, e.documentation);
    }
    if (!e.parts.empty()) {
        out << YAML::Key << "parts" << YAML::Value << YAML::BeginSeq;
        for (const auto& p : e.parts) {
            out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << p.id;
            if (!p.name.empty()) out << YAML::Key << "name" << YAML::Value << p.name;
            if (!p.tools.empty()) {
                out << YAML::Key << "tools" << YAML::Value;
                emit_string_list(out, p.tools);
            }
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    if (!e.media.empty()) {
        out << YAML::Key << "media" << YAML::Value << YAML::BeginMap;
        for (const auto& [view, key] : e.media) out << YAML::Key << view << YAML::Value << key;
        out << YAML::EndMap;
    }
    if (e.target_part) out << YAML::Key << "target_part" << YAML::Value << *e.target_part;
    out << YAML::EndMap;

    const auto& env = m.environment;
    out << YAML::Key << "environment" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << env.id;
    if (!env.safety_notes.empty()) {
        out << YAML::Key << "safety_notes" << YAML::Value << YAML::BeginSeq;
        for (const auto& s : env.safety_notes) out << s;
        out << YAML::EndSeq;
    }
    if (!env.neighbors.empty()) {
        out << YAML::Key << "neighbors" << YAML::Value << YAML::BeginSeq;
        for (const auto& n : env.neighbors) {
            out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << n.id;
            if (!n.name.empty()) out << YAML::Key << "name" << YAML::Value << n.name;
            if (!n.note.empty()) out << YAML::Key << "note" << YAML::Value << n.note;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;

    if (!m.users.empty()) {
        out << YAML::Key << "users" << YAML::Value << YAML::BeginSeq;
        for (const auto& u : m.users) {
            out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << u.id;
            if (!u.name.empty()) out << YAML::Key << "name" << YAML::Value << u.name;
            out << YAML::Key << "role" << YAML::Value << std::string(to_string(u.role));
            if (u.initial_level)
                out << YAML::Key << "initial_level" << YAML::Value << std::string(to_string(*u.initial_level));
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;  // catalog

    if (!m.sources.empty()) {
        out << YAML::Key << "sources" << YAML::Value << YAML::BeginSeq;
        for (const auto& s : m.sources) {
            out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << s.id;
            out << YAML::Key << "kind" << YAML::Value << std::string(to_string(s.kind));
            out << YAML::Key << "transport" << YAML::Value << std::string(to_string(s.transport));
            out << YAML::Key << "signals" << YAML::Value;
            emit_string_list(out, s.signals);
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    if (!m.derived_signals.empty()) {
        out << YAML::Key << "derived_signals" << YAML::Value << YAML::BeginSeq;
        for (const auto& s : m.derived_signals) {
            out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << s.name;
            out << YAML::Key << "function" << YAML::Value << std::string(to_string(s.function));
            out << YAML::Key << "input" << YAML::Value << s.input;
            out << YAML::Key << "window" << YAML::Value << s.window;
            if (s.function == DerivedSignal::Function::ThresholdCount) {
                out << YAML::Key << "threshold" << YAML::Value;
                detail::emit_real(out, s.threshold);
            }
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }

    out << YAML::Key << "tasks" << YAML::Value << YAML::Literal << serialize_model(m.task_model);

    if (!m.contexts.empty()) {
        out << YAML::Key << "contexts" << YAML::Value << YAML::BeginSeq;
        for (const auto& r : m.contexts) {
            out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << r.id;
            if (!r.scope.empty()) {
                out << YAML::Key << "scope" << YAML::Value;
                emit_string_list(out, r.scope);
            }
            out << YAML::Key << "when" << YAML::Value << YAML::DoubleQuoted << format_predicate(r.predicate);
            out << YAML::Key << "severity" << YAML::Value << std::string(to_string(r.severity));
            if (!r.message.empty()) out << YAML::Key << "message" << YAML::Value << r.message;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    if (!m.dependencies.empty()) {
        out << YAML::Key << "dependencies" << YAML::Value << YAML::BeginMap;
        for (const auto& [leaf, deps] : m.dependencies) {
            out << YAML::Key << leaf << YAML::Value;
            emit_string_list(out, deps);
        }
        out << YAML::EndMap;
    }
    if (!(m.user_config == UserModelConfig::defaults())) {
        out << YAML::Key << "user_config" << YAML::Value << YAML::BeginMap;
        detail::write_user_config(out, m.user_config);
        out << YAML::EndMap;
    }
    if (!m.bindings.empty()) {
        out << YAML::Key << "bindings" << YAML::Value << YAML::BeginSeq;
        for (const auto& b : m.bindings) {
            out << YAML::BeginMap << YAML::Key << "leaf" << YAML::Value << b.leaf_id;
            out << YAML::Key << "tier" << YAML::Value << std::string(to_string(b.tier));
            if (b.key) out << YAML::Key << "key" << YAML::Value << *b.key;
            out << YAML::Key << "components" << YAML::Value << YAML::BeginSeq;
            for (const auto& c : b.components) {
                out << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << std::string(to_string(c.kind));
                out << YAML::Key << "payload" << YAML::Value << c.payload;
                if (c.anchor) out << YAML::Key << "anchor" << YAML::Value << *c.anchor;
                out << YAML::EndMap;
            }
            out << YAML::EndSeq << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

namespace {

const ContentBinding* find_binding(const ArMaintenanceModel& m, std::string_view leaf, InterfaceTier t) {
    for (const auto& b : m.bindings)
        if (b.leaf_id == leaf && b.tier == t) return &b;
    return nullptr;
}

const ContentBinding& resolve_binding(const ArMaintenanceModel& m, std::string_view leaf, InterfaceTier tier) {
    if (!find_leaf(m.task_model, leaf)) throw NoContent("unknown leaf '" + std::string(leaf) + "'");
    for (InterfaceTier t : {tier, InterfaceTier::Ar, InterfaceTier::Visual, InterfaceTier::Text, InterfaceTier::Video})
        if (const auto* b = find_binding(m, leaf, t)) return *b;
    throw NoContent("leaf '" + std::string(leaf) + "' has no content on any tier");
}

}  // namespace

std::vector<ContentComponent> resolve_step_content(const ArMaintenanceModel& m, std::string_view leaf,
                                                   InterfaceTier tier) {
    return resolve_binding(m, leaf, tier).components;
}

InterfaceTier resolved_tier(const ArMaintenanceModel& m, std::string_view leaf, InterfaceTier tier) {
    return resolve_binding(m, leaf, tier).tier;
}

std::vector<std::string> known_signals(const ArMaintenanceModel& m) {
    std::vector<std::string> out;
    for (const auto& s : m.sources) out.insert(out.end(), s.signals.begin(), s.signals.end());
    for (const auto& d : m.derived_signals) out.push_back(d.name);
    return out;
}

SectionView step_back_context(const ArMaintenanceModel& m, int step) {
    SectionView v;
    v.step = step;
    auto add = [&](std::string label, std::string text) { v.entries.emplace_back(std::move(label), std::move(text)); };
    auto join = [](const std::vector<std::string>& xs) {
        std::string s;
        for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
        return s;
    };
    switch (step) {
        case 1: {
            v.title = "Equipment, environment and data sources";
            add("equipment", m.equipment.id + (m.equipment.name.empty() ? "" : " - " + m.equipment.name));
            if (!m.equipment.documentation.empty()) add("documentation", join(m.equipment.documentation));
            for (const auto& p : m.equipment.parts)
                add("part " + p.id, p.name + (p.tools.empty() ? "" : " (tools: " + join(p.tools) + ")"));
            for (const auto& [view, key] : m.equipment.media) add("media " + view, key);
            add("environment", m.environment.id);
            for (const auto& s : m.environment.safety_notes) add("safety", s);
            for (const auto& n : m.environment.neighbors)
                add("neighbor " + n.id, n.name + (n.note.empty() ? "" : " - " + n.note));
            for (const auto& s : m.sources)
                add("source " + s.id, std::string(to_string(s.kind)) + " via " +
                                          std::string(to_string(s.transport)) + ": " + join(s.signals));
            for (const auto& d : m.derived_signals)
                add("derived " + d.name, std::string(to_string(d.function)) + " of " + d.input + " over " +
                                             std::to_string(d.window) + " samples");
            break;
        }
        case 2: {
            v.title = "Chosen part";
            add("equipment", m.equipment.id + (m.equipment.name.empty() ? "" : " - " + m.equipment.name));
            if (!m.equipment.target_part) {
                add("part", "no part selected");
                break;
            }
            for (const auto& p : m.equipment.parts)
                if (p.id == *m.equipment.target_part) {
                    add("part " + p.id, p.name);
                    for (const auto& t : p.tools) add("tool", t);
                }
            break;
        }
        case 3: {
            v.title = "Maintenance guide";
            std::size_t n = 0;
            for (const auto& l : leaves(m.task_model))
                add(std::to_string(++n) + ". " + l.id,
                    (l.description.empty() ? l.id : l.description) + " (nominal " +
                        std::to_string(l.nominal_duration) + " s)");
            break;
        }
        default:
            throw InvalidStep("context step must be 1, 2 or 3 (got " + std::to_string(step) + ")");
    }
    return v;
}

}  // namespace emaint
