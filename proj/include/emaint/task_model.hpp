#pragma once

// Hierarchical task models with CTT-style temporal operators, plus the
// block-structured `.tm` text syntax used to author them.
//
//   model "Seal replacement" version "2";
//   task seq root {
//     leaf isolate { nominal = 60; desc = "Isolate power"; }
//     task loop torque [bound = 2] { leaf torque_bolts { nominal = 30 } }
//   }

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emaint/diagnostic.hpp"
#include "emaint/levels.hpp"

namespace emaint {

enum class TaskOperator { Seq, Choice, Par, Disable, Opt, Loop };

std::string_view to_string(TaskOperator op);
std::optional<TaskOperator> parse_operator(std::string_view s);

struct LeafTask {
    std::string id;
    std::string description;
    std::int64_t nominal_duration = 1;  // seconds
    double weight = 1.0;
    std::vector<std::string> context_refs;
    std::map<InterfaceTier, std::string> content_keys;

    bool operator==(const LeafTask&) const = default;
};

struct TaskNode;

struct CompositeTask {
    std::string id;
    TaskOperator op = TaskOperator::Seq;
    std::vector<TaskNode> children;
    std::optional<std::uint32_t> loop_bound;
    /// Weight of this node's own Skip / ExitLoop action.
    double weight = 1.0;

    bool operator==(const CompositeTask&) const;
};

struct TaskNode {
    std::variant<LeafTask, CompositeTask> value;

    bool is_leaf() const { return std::holds_alternative<LeafTask>(value); }
    const LeafTask& leaf() const { return std::get<LeafTask>(value); }
    const CompositeTask& composite() const { return std::get<CompositeTask>(value); }
    const std::string& id() const;

    bool operator==(const TaskNode&) const = default;
};

inline bool CompositeTask::operator==(const CompositeTask& o) const {
    return id == o.id && op == o.op && children == o.children && loop_bound == o.loop_bound &&
           weight == o.weight;
}

struct TaskModel {
    std::string name = "untitled";
    std::string version = "1";
    TaskNode root;

    bool operator==(const TaskModel&) const = default;
};

enum class ParseErrorKind { SyntaxError, DuplicateId, ArityViolation, MissingLoopBound };

std::string_view to_string(ParseErrorKind k);

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, SourcePosition pos, const std::string& message);

    ParseErrorKind kind() const { return kind_; }
    SourcePosition position() const { return pos_; }
    /// The message without the location prefix.
    const std::string& detail() const { return detail_; }

private:
    ParseErrorKind kind_;
    SourcePosition pos_;
    std::string detail_;
};

/// Parses `.tm` text. Composite nodes without an explicit id receive one of
/// the form `<op>_<n>` (preorder numbering, skipping ids already in use).
TaskModel parse_model(std::string_view source);

/// Canonical text; parse_model(serialize_model(m)) == m.
std::string serialize_model(const TaskModel& m);

/// Names the model may reference. Empty optionals disable that check.
struct ValidationScope {
    std::optional<std::set<std::string>> context_ids;
    /// binding key -> (leaf id, tier) of the binding carrying that key
    std::optional<std::map<std::string, std::pair<std::string, InterfaceTier>>> binding_keys;
};

Diagnostics validate(const TaskModel& m, const ValidationScope& scope = {});

/// Depth-first, left-to-right.
std::vector<LeafTask> leaves(const TaskModel& m);

/// Leaf lookup by id; nullptr when absent.
const LeafTask* find_leaf(const TaskModel& m, std::string_view id);
const TaskNode* find_node(const TaskModel& m, std::string_view id);

/// Structural arity rule for an operator; returns an explanation when broken.
std::optional<std::string> arity_problem(TaskOperator op, std::size_t child_count);

}  // namespace emaint
