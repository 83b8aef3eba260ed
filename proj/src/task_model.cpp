#include "emaint/task_model.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <sstream>

#include "emaint/numeric_text.hpp"

namespace emaint {

std::string_view to_string(TaskOperator op) {
    switch (op) {
        case TaskOperator::Seq: return "seq";
        case TaskOperator::Choice: return "choice";
        case TaskOperator::Par: return "par";
        case TaskOperator::Disable: return "disable";
        case TaskOperator::Opt: return "opt";
        case TaskOperator::Loop: return "loop";
    }
    return "seq";
}

std::optional<TaskOperator> parse_operator(std::string_view s) {
    for (auto op : {TaskOperator::Seq, TaskOperator::Choice, TaskOperator::Par,
                    TaskOperator::Disable, TaskOperator::Opt, TaskOperator::Loop})
        if (to_string(op) == s) return op;
    return std::nullopt;
}

std::string_view to_string(ParseErrorKind k) {
    switch (k) {
        case ParseErrorKind::SyntaxError: return "SyntaxError";
        case ParseErrorKind::DuplicateId: return "DuplicateId";
        case ParseErrorKind::ArityViolation: return "ArityViolation";
        case ParseErrorKind::MissingLoopBound: return "MissingLoopBound";
    }
    return "SyntaxError";
}

ParseError::ParseError(ParseErrorKind kind, SourcePosition pos, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " at " + std::to_string(pos.line) + ":" +
                         std::to_string(pos.column) + ": " + message),
      kind_(kind),
      pos_(pos),
      detail_(message) {}

const std::string& TaskNode::id() const {
    return is_leaf() ? leaf().id : composite().id;
}

std::optional<std::string> arity_problem(TaskOperator op, std::size_t n) {
    switch (op) {
        case TaskOperator::Seq:
        case TaskOperator::Choice:
        case TaskOperator::Par:
            if (n < 2)
                return std::string(to_string(op)) + " needs at least 2 children, got " +
                       std::to_string(n);
            break;
        case TaskOperator::Disable:
            if (n != 2) return "disable needs exactly 2 children, got " + std::to_string(n);
            break;
        case TaskOperator::Opt:
        case TaskOperator::Loop:
            if (n != 1)
                return std::string(to_string(op)) + " needs exactly 1 child, got " +
                       std::to_string(n);
            break;
    }
    return std::nullopt;
}

namespace {

// ---------------------------------------------------------------- lexer

enum class Tok { Word, Number, String, LBrace, RBrace, LBracket, RBracket, Equals, Semi, Comma, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    SourcePosition pos;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_space();
        Token t;
        t.pos = {line_, col_};
        if (i_ >= src_.size()) return t;
        char c = src_[i_];
        auto single = [&](Tok k) {
            t.kind = k;
            t.text = std::string(1, c);
            advance();
            return t;
        };
        switch (c) {
            case '{': return single(Tok::LBrace);
            case '}': return single(Tok::RBrace);
            case '[': return single(Tok::LBracket);
            case ']': return single(Tok::RBracket);
            case '=': return single(Tok::Equals);
            case ';': return single(Tok::Semi);
            case ',': return single(Tok::Comma);
            case '"': return string_token(t);
            default: break;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            t.kind = Tok::Word;
            while (i_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_'))
                t.text += advance();
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            t.kind = Tok::Number;
            while (i_ < src_.size()) {
                char d = src_[i_];
                bool exp_sign = (d == '-' || d == '+') && !t.text.empty() &&
                                (t.text.back() == 'e' || t.text.back() == 'E');
                if (std::isdigit(static_cast<unsigned char>(d)) || d == '.' || d == 'e' ||
                    d == 'E' || exp_sign || (t.text.empty() && (d == '-' || d == '+')))
                    t.text += advance();
                else
                    break;
            }
            return t;
        }
        throw ParseError(ParseErrorKind::SyntaxError, t.pos,
                         std::string("unexpected character '") + c + "'");
    }

private:
    char advance() {
        char c = src_[i_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space() {
        while (i_ < src_.size()) {
            char c = src_[i_];
            if (c == '#') {
                while (i_ < src_.size() && src_[i_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    Token string_token(Token& t) {
        t.kind = Tok::String;
        advance();
        while (true) {
            if (i_ >= src_.size())
                throw ParseError(ParseErrorKind::SyntaxError, t.pos, "unterminated string");
            char c = advance();
            if (c == '"') break;
            if (c == '\n')
                throw ParseError(ParseErrorKind::SyntaxError, t.pos, "newline inside string");
            if (c == '\\') {
                if (i_ >= src_.size())
                    throw ParseError(ParseErrorKind::SyntaxError, t.pos, "unterminated string");
                char e = advance();
                switch (e) {
                    case 'n': t.text += '\n'; break;
                    case 't': t.text += '\t'; break;
                    case '"': t.text += '"'; break;
                    case '\\': t.text += '\\'; break;
                    default:
                        throw ParseError(ParseErrorKind::SyntaxError, t.pos,
                                         std::string("unknown escape \\") + e);
                }
                continue;
            }
            t.text += c;
        }
        return t;
    }

    std::string_view src_;
    std::size_t i_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

// ---------------------------------------------------------------- parser

struct AttrValue {
    Token token;                     // Number / String / Word
    std::vector<Token> list;         // when is_list
    bool is_list = false;
};

struct Attr {
    Token key;
    AttrValue value;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) { cur_ = lex_.next(); }

    TaskModel parse() {
        TaskModel m;
        if (cur_.kind == Tok::Word && cur_.text == "model") {
            take();
            m.name = expect(Tok::String, "model name string").text;
            if (cur_.kind == Tok::Word && cur_.text == "version") {
                take();
                if (cur_.kind == Tok::String || cur_.kind == Tok::Number || cur_.kind == Tok::Word)
                    m.version = take().text;
                else
                    fail("expected version text");
            }
            if (cur_.kind == Tok::Semi) take();
        }
        m.root = node();
        if (cur_.kind != Tok::End) fail("expected end of input after the root task");
        assign_generated_ids(m.root);
        return m;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(ParseErrorKind::SyntaxError, cur_.pos,
                         msg + (cur_.kind == Tok::End ? " (found end of input)"
                                                      : " (found '" + cur_.text + "')"));
    }

    Token take() {
        Token t = cur_;
        cur_ = lex_.next();
        return t;
    }

    Token expect(Tok k, const char* what) {
        if (cur_.kind != k) fail(std::string("expected ") + what);
        return take();
    }

    Token identifier(const char* what) {
        if (cur_.kind != Tok::Word) fail(std::string("expected ") + what);
        if (!is_identifier(cur_.text))
            throw ParseError(ParseErrorKind::SyntaxError, cur_.pos,
                             "invalid identifier '" + cur_.text + "' (expected [a-z][a-z0-9_]*)");
        return take();
    }

    void claim_id(const Token& t) {
        if (!ids_.insert(t.text).second)
            throw ParseError(ParseErrorKind::DuplicateId, t.pos, "duplicate id '" + t.text + "'");
    }

    TaskNode node() {
        if (cur_.kind == Tok::Word && cur_.text == "leaf") return TaskNode{leaf()};
        if (cur_.kind == Tok::Word && cur_.text == "task") return TaskNode{composite()};
        fail("expected 'task' or 'leaf'");
    }

    std::vector<Attr> attributes(Tok close) {
        std::vector<Attr> attrs;
        while (cur_.kind != close) {
            Attr a;
            a.key = identifier("attribute name");
            expect(Tok::Equals, "'='");
            if (cur_.kind == Tok::LBracket) {
                take();
                a.value.is_list = true;
                while (cur_.kind != Tok::RBracket) {
                    a.value.list.push_back(identifier("identifier in list"));
                    if (cur_.kind == Tok::Comma)
                        take();
                    else if (cur_.kind != Tok::RBracket)
                        fail("expected ',' or ']'");
                }
                take();
            } else if (cur_.kind == Tok::Number || cur_.kind == Tok::String ||
                       cur_.kind == Tok::Word) {
                a.value.token = take();
            } else {
                fail("expected attribute value");
            }
            for (const auto& prev : attrs)
                if (prev.key.text == a.key.text)
                    throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                                     "attribute '" + a.key.text + "' given twice");
            attrs.push_back(std::move(a));
            if (cur_.kind == Tok::Semi || cur_.kind == Tok::Comma)
                take();
            else if (cur_.kind != close)
                fail("expected ';' between attributes");
        }
        take();
        return attrs;
    }

    static std::int64_t positive_integer(const Attr& a) {
        auto v = a.value.is_list || a.value.token.kind != Tok::Number
                     ? std::nullopt
                     : parse_integer(a.value.token.text);
        if (!v || *v <= 0)
            throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                             "'" + a.key.text + "' must be a positive integer");
        return *v;
    }

    static double positive_real(const Attr& a) {
        auto v = a.value.is_list || a.value.token.kind != Tok::Number
                     ? std::nullopt
                     : parse_real(a.value.token.text);
        if (!v || !(*v > 0) || !std::isfinite(*v))
            throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                             "'" + a.key.text + "' must be a positive number");
        return *v;
    }

    static std::string text_value(const Attr& a) {
        if (a.value.is_list || a.value.token.kind == Tok::Number)
            throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                             "'" + a.key.text + "' must be text");
        return a.value.token.text;
    }

    LeafTask leaf() {
        Token kw = take();
        LeafTask leaf;
        Token id = identifier("leaf id");
        claim_id(id);
        leaf.id = id.text;
        expect(Tok::LBrace, "'{' opening leaf attributes");
        bool have_nominal = false;
        for (const Attr& a : attributes(Tok::RBrace)) {
            const std::string& k = a.key.text;
            if (k == "nominal") {
                leaf.nominal_duration = positive_integer(a);
                have_nominal = true;
            } else if (k == "weight") {
                leaf.weight = positive_real(a);
            } else if (k == "desc") {
                leaf.description = text_value(a);
            } else if (k == "contexts") {
                if (!a.value.is_list)
                    throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                                     "'contexts' must be a list");
                for (const auto& t : a.value.list) leaf.context_refs.push_back(t.text);
            } else if (auto tier = parse_tier(k)) {
                leaf.content_keys[*tier] = text_value(a);
            } else {
                throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                                 "unknown leaf attribute '" + k + "'");
            }
        }
        if (!have_nominal)
            throw ParseError(ParseErrorKind::SyntaxError, kw.pos,
                             "leaf '" + leaf.id + "' lacks 'nominal'");
        return leaf;
    }

    CompositeTask composite() {
        Token kw = take();
        CompositeTask c;
        if (cur_.kind != Tok::Word) fail("expected task operator");
        auto op = parse_operator(cur_.text);
        if (!op) fail("unknown task operator");
        take();
        c.op = *op;
        if (cur_.kind == Tok::Word) {
            Token id = identifier("task id");
            claim_id(id);
            c.id = id.text;
        }
        if (cur_.kind == Tok::LBracket) {
            take();
            for (const Attr& a : attributes(Tok::RBracket)) {
                if (a.key.text == "bound") {
                    if (c.op != TaskOperator::Loop)
                        throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                                         "'bound' is only allowed on loop tasks");
                    c.loop_bound = static_cast<std::uint32_t>(positive_integer(a));
                } else if (a.key.text == "weight") {
                    c.weight = positive_real(a);
                } else {
                    throw ParseError(ParseErrorKind::SyntaxError, a.key.pos,
                                     "unknown task attribute '" + a.key.text + "'");
                }
            }
        }
        expect(Tok::LBrace, "'{' opening task children");
        while (cur_.kind != Tok::RBrace) {
            if (cur_.kind == Tok::End) fail("unterminated task block");
            c.children.push_back(node());
        }
        take();
        if (auto problem = arity_problem(c.op, c.children.size()))
            throw ParseError(ParseErrorKind::ArityViolation, kw.pos, *problem);
        if (c.op == TaskOperator::Loop && !c.loop_bound)
            throw ParseError(ParseErrorKind::MissingLoopBound, kw.pos,
                             "loop task needs 'bound'");
        return c;
    }

    void assign_generated_ids(TaskNode& n) {
        if (n.is_leaf()) return;
        auto& c = std::get<CompositeTask>(n.value);
        if (c.id.empty()) {
            std::string candidate;
            do {
                candidate = std::string(to_string(c.op)) + "_" + std::to_string(++generated_);
            } while (ids_.count(candidate));
            ids_.insert(candidate);
            c.id = candidate;
        }
        for (auto& child : c.children) assign_generated_ids(child);
    }

    Lexer lex_;
    Token cur_;
    std::set<std::string> ids_;
    int generated_ = 0;
};

// ---------------------------------------------------------------- serializer

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

void write_node(std::ostringstream& os, const TaskNode& n, int depth) {
    std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    if (n.is_leaf()) {
        const LeafTask& l = n.leaf();
        os << indent << "leaf " << l.id << " { ";
        if (!l.description.empty()) os << "desc = " << quote(l.description) << "; ";
        os << "nominal = " << l.nominal_duration << "; ";
        if (l.weight != 1.0) os << "weight = " << format_real(l.weight) << "; ";
        if (!l.context_refs.empty()) {
            os << "contexts = [";
            for (std::size_t i = 0; i < l.context_refs.size(); ++i)
                os << (i ? ", " : "") << l.context_refs[i];
            os << "]; ";
        }
        for (const auto& [tier, key] : l.content_keys) os << to_string(tier) << " = " << quote(key) << "; ";
        os << "}\n";
        return;
    }
    const CompositeTask& c = n.composite();
    os << indent << "task " << to_string(c.op) << " " << c.id;
    if (c.loop_bound || c.weight != 1.0) {
        os << " [";
        bool first = true;
        if (c.loop_bound) {
            os << "bound = " << *c.loop_bound;
            first = false;
        }
        if (c.weight != 1.0) os << (first ? "" : "; ") << "weight = " << format_real(c.weight);
        os << "]";
    }
    os << " {\n";
    for (const auto& child : c.children) write_node(os, child, depth + 1);
    os << indent << "}\n";
}

void collect_leaves(const TaskNode& n, std::vector<LeafTask>& out) {
    if (n.is_leaf()) {
        out.push_back(n.leaf());
        return;
    }
    for (const auto& c : n.composite().children) collect_leaves(c, out);
}

const TaskNode* find_in(const TaskNode& n, std::string_view id) {
    if (n.id() == id) return &n;
    if (n.is_leaf()) return nullptr;
    for (const auto& c : n.composite().children)
        if (const TaskNode* hit = find_in(c, id)) return hit;
    return nullptr;
}

}  // namespace

TaskModel parse_model(std::string_view source) { return Parser(source).parse(); }

std::string serialize_model(const TaskModel& m) {
    std::ostringstream os;
    os << "model " << quote(m.name) << " version " << quote(m.version) << ";\n";
    write_node(os, m.root, 0);
    return os.str();
}

std::vector<LeafTask> leaves(const TaskModel& m) {
    std::vector<LeafTask> out;
    collect_leaves(m.root, out);
    return out;
}

const TaskNode* find_node(const TaskModel& m, std::string_view id) { return find_in(m.root, id); }

const LeafTask* find_leaf(const TaskModel& m, std::string_view id) {
    const TaskNode* n = find_node(m, id);
    return n && n->is_leaf() ? &n->leaf() : nullptr;
}

Diagnostics validate(const TaskModel& m, const ValidationScope& scope) {
    Diagnostics out;
    std::set<std::string> seen;
    auto report = [&](std::string code, const std::string& path, std::string msg) {
        out.push_back(Diagnostic{Severity::Error, std::move(code), path, std::move(msg), std::nullopt});
    };

    std::function<void(const TaskNode&)> walk = [&](const TaskNode& n) {
        const std::string& id = n.id();
        if (!is_identifier(id)) report("InvalidId", id, "invalid node id '" + id + "'");
        if (!seen.insert(id).second) report("DuplicateId", id, "duplicate id '" + id + "'");
        if (n.is_leaf()) {
            const LeafTask& l = n.leaf();
            if (l.nominal_duration <= 0)
                report("NonPositiveDuration", id, "nominal duration must be > 0");
            if (!(l.weight > 0) || !std::isfinite(l.weight))
                report("NonPositiveWeight", id, "weight must be > 0");
            if (scope.context_ids)
                for (const auto& ref : l.context_refs)
                    if (!scope.context_ids->count(ref))
                        report("UnresolvedContextRef", id,
                               "leaf '" + id + "' references unknown context '" + ref + "'");
            if (scope.binding_keys)
                for (const auto& [tier, key] : l.content_keys) {
                    auto it = scope.binding_keys->find(key);
                    if (it == scope.binding_keys->end())
                        report("UnresolvedContentKey", id,
                               "leaf '" + id + "' references unknown content key '" + key + "'");
                    else if (it->second.first != id || it->second.second != tier)
                        report("MismatchedContentKey", id,
                               "content key '" + key + "' is bound to another leaf or tier");
                }
            return;
        }
        const CompositeTask& c = n.composite();
        if (auto problem = arity_problem(c.op, c.children.size()))
            report("ArityViolation", id, *problem);
        if (c.op == TaskOperator::Loop && (!c.loop_bound || *c.loop_bound == 0))
            report("MissingLoopBound", id, "loop task needs a positive bound");
        if (c.op != TaskOperator::Loop && c.loop_bound)
            report("UnexpectedLoopBound", id, "bound is only allowed on loop tasks");
        if (!(c.weight > 0) || !std::isfinite(c.weight))
            report("NonPositiveWeight", id, "weight must be > 0");
        for (const auto& child : c.children) walk(child);
    };
    walk(m.root);
    return out;
}

}  // namespace emaint
