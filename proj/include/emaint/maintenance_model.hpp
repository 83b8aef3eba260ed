#pragma once

// The per-equipment maintenance model: catalog data, external signal
// sources, the task model, context rules, the user-model configuration and
// the tier-bound interface content, stored as one `.amm` document.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emaint/context_sa.hpp"
#include "emaint/diagnostic.hpp"
#include "emaint/levels.hpp"
#include "emaint/task_model.hpp"
#include "emaint/user_model.hpp"

namespace emaint {

struct Part {
    std::string id;
    std::string name;
    std::vector<std::string> tools;
    bool operator==(const Part&) const = default;
};

struct EquipmentRecord {
    std::string id;
    std::string name;
    std::vector<std::string> documentation;     // manual section ids
    std::vector<Part> parts;
    std::map<std::string, std::string> media;   // view angle -> asset key
    /// The part this maintenance procedure works on.
    std::optional<std::string> target_part;
    bool operator==(const EquipmentRecord&) const = default;
};

struct NeighborEquipment {
    std::string id;
    std::string name;
    std::string note;
    bool operator==(const NeighborEquipment&) const = default;
};

struct EnvironmentRecord {
    std::string id;
    std::vector<std::string> safety_notes;
    std::vector<NeighborEquipment> neighbors;
    bool operator==(const EnvironmentRecord&) const = default;
};

enum class UserRole { Technician, Engineer };
std::string_view to_string(UserRole r);

struct UserRecord {
    std::string id;
    std::string name;
    UserRole role = UserRole::Technician;
    std::optional<Level> initial_level;
    bool operator==(const UserRecord&) const = default;
};

enum class SourceKind { Sensor, EMaintenanceService, Wsn };
enum class SourceTransport { ReplayFile, HttpPush };
std::string_view to_string(SourceKind k);
std::string_view to_string(SourceTransport t);

struct ExternalSource {
    std::string id;
    SourceKind kind = SourceKind::Sensor;
    SourceTransport transport = SourceTransport::HttpPush;
    std::vector<std::string> signals;
    bool operator==(const ExternalSource&) const = default;
};

/// A refined signal computed from the recent history of a raw one.
struct DerivedSignal {
    enum class Function { MovingAverage, ThresholdCount };
    std::string name;
    Function function = Function::MovingAverage;
    std::string input;
    std::uint32_t window = 1;
    double threshold = 0;  // ThresholdCount only
    bool operator==(const DerivedSignal&) const = default;
};

/// Mean of the last `window` values (all values when fewer are available).
double moving_average(std::span<const double> history, std::uint32_t window);
/// Number of the last `window` values strictly above `threshold`.
double threshold_count(std::span<const double> history, std::uint32_t window, double threshold);
double compute_derived(const DerivedSignal& d, std::span<const double> history);

enum class ComponentKind { Text, Image, Video, Overlay3d, Hud };
std::string_view to_string(ComponentKind k);

struct ContentComponent {
    ComponentKind kind = ComponentKind::Text;
    std::string payload;  // text, or an asset key
    std::optional<std::string> anchor;
    bool operator==(const ContentComponent&) const = default;
};

struct ContentBinding {
    std::string leaf_id;
    InterfaceTier tier = InterfaceTier::Text;
    /// Optional key a leaf can cite in its content keys.
    std::optional<std::string> key;
    std::vector<ContentComponent> components;
    bool operator==(const ContentBinding&) const = default;
};

struct ArMaintenanceModel {
    std::string id;    // identifier, also the service's model id
    std::string name;
    EquipmentRecord equipment;
    EnvironmentRecord environment;
    std::vector<UserRecord> users;
    std::vector<ExternalSource> sources;
    std::vector<DerivedSignal> derived_signals;
    TaskModel task_model;
    std::vector<ContextRule> contexts;
    DependencyMap dependencies;
    UserModelConfig user_config = UserModelConfig::defaults();
    std::vector<ContentBinding> bindings;

    bool operator==(const ArMaintenanceModel&) const = default;
};

class ModelImportError : public std::runtime_error {
public:
    explicit ModelImportError(Diagnostics diags);
    const Diagnostics& diagnostics() const { return diags_; }

private:
    Diagnostics diags_;
};

/// Every problem found in the document; empty means import succeeds.
Diagnostics check_model(std::string_view text);

/// All-or-nothing import; throws ModelImportError carrying diagnostics.
ArMaintenanceModel import_model(std::string_view text);

/// Cross-reference and aggregate checks on an in-memory model.
Diagnostics validate_model(const ArMaintenanceModel& m);

/// Canonical document; sections without content are omitted.
std::string export_model(const ArMaintenanceModel& m);

class NoContent : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fallback when the requested tier is unbound: Ar, Visual, Text, Video.
std::vector<ContentComponent> resolve_step_content(const ArMaintenanceModel& m,
                                                   std::string_view leaf_id, InterfaceTier tier);
/// The tier whose content resolve_step_content would return.
InterfaceTier resolved_tier(const ArMaintenanceModel& m, std::string_view leaf_id,
                            InterfaceTier tier);

struct SectionView {
    int step = 0;
    std::string title;
    std::vector<std::pair<std::string, std::string>> entries;  // label, text
};

class InvalidStep : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Read-only views of the earlier authoring stages: 1 catalog and sources,
/// 2 the chosen part, 3 the complete maintenance guide.
SectionView step_back_context(const ArMaintenanceModel& m, int step);

/// Every signal name a context rule may reference (raw and derived).
std::vector<std::string> known_signals(const ArMaintenanceModel& m);

}  // namespace emaint
