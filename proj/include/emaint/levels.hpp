#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace emaint {

/// User expertise, ordered from least to most experienced.
enum class Level { None_ = 0, Basic = 1, Advanced = 2, Expert = 3 };

/// Presentation modality of a step.
enum class InterfaceTier { Text = 0, Visual = 1, Ar = 2, Video = 3 };

inline constexpr std::size_t kLevelCount = 4;
inline constexpr std::array<Level, kLevelCount> kAllLevels{Level::None_, Level::Basic,
                                                          Level::Advanced, Level::Expert};
inline constexpr std::array<InterfaceTier, 4> kAllTiers{InterfaceTier::Text, InterfaceTier::Visual,
                                                        InterfaceTier::Ar, InterfaceTier::Video};

inline constexpr std::size_t index(Level l) { return static_cast<std::size_t>(l); }
inline constexpr std::size_t index(InterfaceTier t) { return static_cast<std::size_t>(t); }

inline std::string_view to_string(Level l) {
    switch (l) {
        case Level::None_: return "none";
        case Level::Basic: return "basic";
        case Level::Advanced: return "advanced";
        case Level::Expert: return "expert";
    }
    return "none";
}

inline std::string_view to_string(InterfaceTier t) {
    switch (t) {
        case InterfaceTier::Text: return "text";
        case InterfaceTier::Visual: return "visual";
        case InterfaceTier::Ar: return "ar";
        case InterfaceTier::Video: return "video";
    }
    return "text";
}

inline std::optional<Level> parse_level(std::string_view s) {
    for (Level l : kAllLevels)
        if (to_string(l) == s) return l;
    return std::nullopt;
}

inline std::optional<InterfaceTier> parse_tier(std::string_view s) {
    for (InterfaceTier t : kAllTiers)
        if (to_string(t) == s) return t;
    return std::nullopt;
}

}  // namespace emaint
