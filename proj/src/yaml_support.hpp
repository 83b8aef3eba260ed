#pragma once

// Shared YAML helpers for the user-model config and the `.amm` container.

#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "emaint/diagnostic.hpp"
#include "emaint/numeric_text.hpp"
#include "emaint/user_model.hpp"

namespace emaint::detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline void add_error(Diagnostics& d, std::string code, std::string path, std::string msg) {
    d.push_back({Severity::Error, std::move(code), std::move(path), std::move(msg), std::nullopt});
}

/// Reads a scalar as T; records a diagnostic and returns `fallback` on failure.
template <typename T>
T scalar(const YAML::Node& n, const std::string& path, Diagnostics& d, T fallback = {}) {
    if (!n || !n.IsScalar()) {
        add_error(d, "TypeError", path, "expected a scalar value");
        return fallback;
    }
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        add_error(d, "TypeError", path, "cannot read value '" + n.Scalar() + "'");
        return fallback;
    }
}

inline std::vector<std::string> string_list(const YAML::Node& n, const std::string& path,
                                            Diagnostics& d) {
    std::vector<std::string> out;
    if (!n) return out;
    if (!n.IsSequence()) {
        add_error(d, "TypeError", path, "expected a list");
        return out;
    }
    for (std::size_t i = 0; i < n.size(); ++i)
        out.push_back(scalar<std::string>(n[i], path + "[" + std::to_string(i) + "]", d));
    return out;
}

template <std::size_t N>
std::array<double, N> real_array(const YAML::Node& n, const std::string& path, Diagnostics& d,
                                 const std::array<double, N>& fallback) {
    if (!n) return fallback;
    if (!n.IsSequence() || n.size() != N) {
        add_error(d, "TypeError", path, "expected a list of " + std::to_string(N) + " numbers");
        return fallback;
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i)
        out[i] = scalar<double>(n[i], path + "[" + std::to_string(i) + "]", d, fallback[i]);
    return out;
}

template <std::size_t R, std::size_t C>
std::array<std::array<double, C>, R> real_matrix(const YAML::Node& n, const std::string& path,
                                                 Diagnostics& d,
                                                 const std::array<std::array<double, C>, R>& fb) {
    if (!n) return fb;
    if (!n.IsSequence() || n.size() != R) {
        add_error(d, "TypeError", path, "expected " + std::to_string(R) + " rows");
        return fb;
    }
    std::array<std::array<double, C>, R> out{};
    for (std::size_t r = 0; r < R; ++r)
        out[r] = real_array<C>(n[r], path + "[" + std::to_string(r) + "]", d, fb[r]);
    return out;
}

inline void emit_real(YAML::Emitter& out, double v) { out << format_real(v); }

template <std::size_t N>
void emit_real_array(YAML::Emitter& out, const std::array<double, N>& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : v) emit_real(out, x);
    out << YAML::EndSeq;
}

/// Reads config keys from `n` (a map); absent keys keep their defaults.
/// Also runs check_config, prefixing paths with `base`.
inline UserModelConfig read_user_config(const YAML::Node& n, const std::string& base,
                                        Diagnostics& d) {
    UserModelConfig cfg = UserModelConfig::defaults();
    if (!n || n.IsNull()) return cfg;
    if (!n.IsMap()) {
        add_error(d, "TypeError", base.empty() ? "user_config" : base, "expected a map");
        return cfg;
    }
    static const char* known[] = {"prior", "transition", "p_help", "time_emission", "fast_ratio",
                                  "slow_ratio", "switch_threshold", "switch_streak"};
    for (const auto& kv : n) {
        auto key = kv.first.as<std::string>();
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) add_error(d, "UnknownKey", join_path(base, key), "unknown config key");
    }
    cfg.prior = real_array<4>(n["prior"], join_path(base, "prior"), d, cfg.prior);
    cfg.transition = real_matrix<4, 4>(n["transition"], join_path(base, "transition"), d, cfg.transition);
    cfg.p_help = real_array<4>(n["p_help"], join_path(base, "p_help"), d, cfg.p_help);
    cfg.time_emission =
        real_matrix<4, 3>(n["time_emission"], join_path(base, "time_emission"), d, cfg.time_emission);
    if (n["fast_ratio"]) cfg.fast_ratio = scalar<double>(n["fast_ratio"], join_path(base, "fast_ratio"), d, cfg.fast_ratio);
    if (n["slow_ratio"]) cfg.slow_ratio = scalar<double>(n["slow_ratio"], join_path(base, "slow_ratio"), d, cfg.slow_ratio);
    if (n["switch_threshold"])
        cfg.switch_threshold =
            scalar<double>(n["switch_threshold"], join_path(base, "switch_threshold"), d, cfg.switch_threshold);
    if (n["switch_streak"]) {
        auto v = scalar<long long>(n["switch_streak"], join_path(base, "switch_streak"), d,
                                   cfg.switch_streak);
        if (v < 1) add_error(d, "InvalidUserConfig", join_path(base, "switch_streak"), "must be >= 1");
        cfg.switch_streak = static_cast<std::uint32_t>(v < 1 ? 1 : v);
    }
    for (auto diag : check_config(cfg)) {
        diag.path = join_path(base, diag.path);
        d.push_back(std::move(diag));
    }
    return cfg;
}

/// Writes config keys into an open map.
inline void write_user_config(YAML::Emitter& out, const UserModelConfig& cfg) {
    out << YAML::Key << "prior" << YAML::Value;
    emit_real_array(out, cfg.prior);
    out << YAML::Key << "transition" << YAML::Value << YAML::BeginSeq;
    for (const auto& row : cfg.transition) emit_real_array(out, row);
    out << YAML::EndSeq;
    out << YAML::Key << "p_help" << YAML::Value;
    emit_real_array(out, cfg.p_help);
    out << YAML::Key << "time_emission" << YAML::Value << YAML::BeginSeq;
    for (const auto& row : cfg.time_emission) emit_real_array(out, row);
    out << YAML::EndSeq;
    out << YAML::Key << "fast_ratio" << YAML::Value;
    emit_real(out, cfg.fast_ratio);
    out << YAML::Key << "slow_ratio" << YAML::Value;
    emit_real(out, cfg.slow_ratio);
    out << YAML::Key << "switch_threshold" << YAML::Value;
    emit_real(out, cfg.switch_threshold);
    out << YAML::Key << "switch_streak" << YAML::Value << cfg.switch_streak;
}

}  // namespace emaint::detail
