#pragma once

// Small closed-form expression language used for spatially varying influx
// fields such as "2 + cos(3*pi*y)" or "1 + zeta*(1 + cos(3*pi*y))".
//
// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names `y` and `tau` are evaluation coordinates, `pi` is a constant, and any
// other name is a parameter that must be substituted before evaluation.

#include "stefan/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

namespace stefan {

class Expression {
public:
    /// Constant expression.
    explicit Expression(double value = 0.0) : root_(constant(value)) {
        std::ostringstream os;
        os.precision(17);
        os << value;
        source_ = os.str();
    }

    /// Parses `text`; throws ConfigError with the column of the first bad token.
    static Expression parse(std::string_view text) {
        Parser p{text, 0};
        Expression e;
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (p.pos != text.size())
            p.fail("unexpected trailing input");
        e.source_ = std::string(text);
        return e;
    }

    double operator()(double y, double tau) const { return eval(*root_, y, tau); }

    /// Replaces named parameters by constants and folds constant subtrees.
    Expression substitute(const std::map<std::string, double>& values) const {
        Expression e;
        e.root_ = subst(root_, values);
        e.source_ = to_string(*e.root_);
        return e;
    }

    /// Names other than `y`, `tau`, `pi` that still need a value.
    std::set<std::string> free_parameters() const {
        std::set<std::string> out;
        collect(*root_, out);
        return out;
    }

    bool depends_on(std::string_view name) const { return mentions(*root_, name); }
    bool is_constant() const { return std::holds_alternative<Constant>(root_->value); }

    const std::string& source() const noexcept { return source_; }

private:
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    struct Constant { double value; };
    struct Variable { std::string name; };
    struct Unary { char op; NodePtr arg; };
    struct Binary { char op; NodePtr lhs, rhs; };
    struct Call { std::string fn; NodePtr arg; };

    struct Node {
        std::variant<Constant, Variable, Unary, Binary, Call> value;
    };

    static NodePtr constant(double v) { return std::make_shared<const Node>(Node{Constant{v}}); }

    static double apply(char op, double a, double b) {
        switch (op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return a / b;
        default: return std::pow(a, b);
        }
    }

    static double call(const std::string& fn, double x) {
        if (fn == "sin") return std::sin(x);
        if (fn == "cos") return std::cos(x);
        if (fn == "exp") return std::exp(x);
        if (fn == "sqrt") return std::sqrt(x);
        if (fn == "abs") return std::abs(x);
        return std::log(x);
    }

    static bool known_function(std::string_view fn) {
        return fn == "sin" || fn == "cos" || fn == "exp" || fn == "sqrt" || fn == "abs" || fn == "log";
    }

    static double eval(const Node& n, double y, double tau) {
        return std::visit(
            [&](const auto& v) -> double {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    return v.value;
                } else if constexpr (std::is_same_v<T, Variable>) {
                    if (v.name == "y") return y;
                    if (v.name == "tau") return tau;
                    throw ConfigError("expression parameter '" + v.name + "' has no value");
                } else if constexpr (std::is_same_v<T, Unary>) {
                    return -eval(*v.arg, y, tau);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return apply(v.op, eval(*v.lhs, y, tau), eval(*v.rhs, y, tau));
                } else {
                    return call(v.fn, eval(*v.arg, y, tau));
                }
            },
            n.value);
    }

    static NodePtr subst(const NodePtr& n, const std::map<std::string, double>& values) {
        return std::visit(
            [&](const auto& v) -> NodePtr {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    return n;
                } else if constexpr (std::is_same_v<T, Variable>) {
                    auto it = values.find(v.name);
                    return it == values.end() ? n : constant(it->second);
                } else if constexpr (std::is_same_v<T, Unary>) {
                    auto a = subst(v.arg, values);
                    if (auto* c = std::get_if<Constant>(&a->value)) return constant(-c->value);
                    return std::make_shared<const Node>(Node{Unary{v.op, a}});
                } else if constexpr (std::is_same_v<T, Binary>) {
                    auto l = subst(v.lhs, values);
                    auto r = subst(v.rhs, values);
                    auto* cl = std::get_if<Constant>(&l->value);
                    auto* cr = std::get_if<Constant>(&r->value);
                    if (cl && cr) return constant(apply(v.op, cl->value, cr->value));
                    return std::make_shared<const Node>(Node{Binary{v.op, l, r}});
                } else {
                    auto a = subst(v.arg, values);
                    if (auto* c = std::get_if<Constant>(&a->value)) return constant(call(v.fn, c->value));
                    return std::make_shared<const Node>(Node{Call{v.fn, a}});
                }
            },
            n->value);
    }

    static void collect(const Node& n, std::set<std::string>& out) {
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Variable>) {
                    if (v.name != "y" && v.name != "tau") out.insert(v.name);
                } else if constexpr (std::is_same_v<T, Unary> || std::is_same_v<T, Call>) {
                    collect(*v.arg, out);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    collect(*v.lhs, out);
                    collect(*v.rhs, out);
                }
            },
            n.value);
    }

    static bool mentions(const Node& n, std::string_view name) {
        return std::visit(
            [&](const auto& v) -> bool {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Variable>) return v.name == name;
                else if constexpr (std::is_same_v<T, Unary> || std::is_same_v<T, Call>) return mentions(*v.arg, name);
                else if constexpr (std::is_same_v<T, Binary>) return mentions(*v.lhs, name) || mentions(*v.rhs, name);
                else return false;
            },
            n.value);
    }

    static std::string to_string(const Node& n) {
        return std::visit(
            [&](const auto& v) -> std::string {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    char buf[32];
                    auto r = std::to_chars(buf, buf + sizeof buf, v.value);
                    std::string s(buf, r.ptr);
                    return v.value < 0 ? "(" + s + ")" : s;
                } else if constexpr (std::is_same_v<T, Variable>) {
                    return v.name;
                } else if constexpr (std::is_same_v<T, Unary>) {
                    return "(-" + to_string(*v.arg) + ")";
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return "(" + to_string(*v.lhs) + " " + v.op + " " + to_string(*v.rhs) + ")";
                } else {
                    return v.fn + "(" + to_string(*v.arg) + ")";
                }
            },
            n.value);
    }

    struct Parser {
        std::string_view text;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& msg) const {
            throw ConfigError("expression '" + std::string(text) + "': " + msg + " at column " +
                                  std::to_string(pos + 1),
                              "config.parse");
        }

        void skip_ws() {
            while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        }

        bool accept(char c) {
            skip_ws();
            if (pos < text.size() && text[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        NodePtr parse_expr() {
            auto lhs = parse_term();
            for (;;) {
                char op;
                if (accept('+')) op = '+';
                else if (accept('-')) op = '-';
                else return lhs;
                lhs = std::make_shared<const Node>(Node{Binary{op, lhs, parse_term()}});
            }
        }

        NodePtr parse_term() {
            auto lhs = parse_unary();
            for (;;) {
                char op;
                if (accept('*')) op = '*';
                else if (accept('/')) op = '/';
                else return lhs;
                lhs = std::make_shared<const Node>(Node{Binary{op, lhs, parse_unary()}});
            }
        }

        NodePtr parse_unary() {
            if (accept('-')) return std::make_shared<const Node>(Node{Unary{'-', parse_unary()}});
            if (accept('+')) return parse_unary();
            return parse_power();
        }

        NodePtr parse_power() {
            auto base = parse_primary();
            if (accept('^')) return std::make_shared<const Node>(Node{Binary{'^', base, parse_unary()}});
            return base;
        }

        NodePtr parse_primary() {
            skip_ws();
            if (pos >= text.size()) fail("unexpected end of input");
            if (accept('(')) {
                auto e = parse_expr();
                if (!accept(')')) fail("expected ')'");
                return e;
            }
            char c = text[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                double v{};
                auto r = std::from_chars(text.data() + pos, text.data() + text.size(), v);
                if (r.ec != std::errc{}) fail("malformed number");
                pos = static_cast<std::size_t>(r.ptr - text.data());
                return constant(v);
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos;
                while (pos < text.size() &&
                       (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
                    ++pos;
                std::string name(text.substr(start, pos - start));
                if (accept('(')) {
                    if (!known_function(name)) {
                        pos = start;
                        fail("unknown function '" + name + "'");
                    }
                    auto arg = parse_expr();
                    if (!accept(')')) fail("expected ')'");
                    return std::make_shared<const Node>(Node{Call{name, arg}});
                }
                if (name == "pi") return constant(std::numbers::pi);
                return std::make_shared<const Node>(Node{Variable{name}});
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    };

    NodePtr root_;
    std::string source_;
};

} // namespace stefan
