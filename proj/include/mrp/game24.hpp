#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mrp::game24 {

/// Exact fraction over int64. Magnitudes stay tiny for 24-game expressions
/// (four operands, each at most 13), so no overflow handling is needed.
struct Frac {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Frac of(std::int64_t value) { return {value, 1}; }

    void normalize() {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    bool operator==(const Frac& other) const { return num == other.num && den == other.den; }
};

inline Frac operator+(Frac a, Frac b) {
    Frac r{a.num * b.den + b.num * a.den, a.den * b.den};
    r.normalize();
    return r;
}

inline Frac operator-(Frac a, Frac b) {
    Frac r{a.num * b.den - b.num * a.den, a.den * b.den};
    r.normalize();
    return r;
}

inline Frac operator*(Frac a, Frac b) {
    Frac r{a.num * b.num, a.den * b.den};
    r.normalize();
    return r;
}

/// nullopt on division by zero.
inline std::optional<Frac> divide(Frac a, Frac b) {
    if (b.num == 0) {
        return std::nullopt;
    }
    Frac r{a.num * b.den, a.den * b.num};
    r.normalize();
    return r;
}

inline std::string to_string(const Frac& f) {
    std::string s = std::to_string(f.num);
    if (f.den != 1) {
        s += "/" + std::to_string(f.den);
    }
    return s;
}

struct Evaluated {
    std::vector<std::int64_t> literals; // in appearance order
    Frac value;
};

/// Parses and exactly evaluates an arithmetic expression over unsigned
/// integer literals, + - * / and parentheses. The Unicode operators ×, ÷ and
/// − are accepted as synonyms. Returns an error message on malformed input
/// or division by zero.
inline std::variant<Evaluated, std::string> evaluate(std::string_view expr) {
    struct Token {
        char kind; // 'n' literal, or one of + - * / ( )
        std::int64_t value;
    };
    std::vector<Token> tokens;
    for (std::size_t i = 0; i < expr.size();) {
        const char c = expr[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++i;
            continue;
        }
        if (c >= '0' && c <= '9') {
            std::int64_t value = 0;
            while (i < expr.size() && expr[i] >= '0' && expr[i] <= '9') {
                value = value * 10 + (expr[i] - '0');
                ++i;
            }
            tokens.push_back({'n', value});
            continue;
        }
        if (c == '+' || c == '-' || c == '*' || c == '/' || c == '(' || c == ')') {
            tokens.push_back({c, 0});
            ++i;
            continue;
        }
        // UTF-8 synonyms: × (C3 97), ÷ (C3 B7), − (E2 88 92)
        const auto rest = expr.substr(i);
        if (rest.size() >= 2 && static_cast<unsigned char>(rest[0]) == 0xC3) {
            const unsigned char second = static_cast<unsigned char>(rest[1]);
            if (second == 0x97) {
                tokens.push_back({'*', 0});
                i += 2;
                continue;
            }
            if (second == 0xB7) {
                tokens.push_back({'/', 0});
                i += 2;
                continue;
            }
        }
        if (rest.size() >= 3 && static_cast<unsigned char>(rest[0]) == 0xE2 &&
            static_cast<unsigned char>(rest[1]) == 0x88 &&
            static_cast<unsigned char>(rest[2]) == 0x92) {
            tokens.push_back({'-', 0});
            i += 3;
            continue;
        }
        return std::string("unexpected character '") + c + "' at offset " + std::to_string(i);
    }
    if (tokens.empty()) {
        return std::string("empty expression");
    }

    Evaluated out;
    std::size_t pos = 0;
    std::string error;

    // expr := term (('+'|'-') term)* ; term := factor (('*'|'/') factor)* ;
    // factor := literal | '(' expr ')'
    auto parse_expr = [&](auto&& self_expr) -> std::optional<Frac> {
        auto parse_factor = [&]() -> std::optional<Frac> {
            if (pos >= tokens.size()) {
                error = "unexpected end of expression";
                return std::nullopt;
            }
            const Token& t = tokens[pos];
            if (t.kind == 'n') {
                ++pos;
                out.literals.push_back(t.value);
                return Frac::of(t.value);
            }
            if (t.kind == '(') {
                ++pos;
                std::optional<Frac> inner = self_expr(self_expr);
                if (!inner) {
                    return std::nullopt;
                }
                if (pos >= tokens.size() || tokens[pos].kind != ')') {
                    error = "missing ')'";
                    return std::nullopt;
                }
                ++pos;
                return inner;
            }
            error = std::string("expected a number or '(', got '") + t.kind + "'";
            return std::nullopt;
        };
        auto parse_term = [&]() -> std::optional<Frac> {
            std::optional<Frac> left = parse_factor();
            while (left && pos < tokens.size() &&
                   (tokens[pos].kind == '*' || tokens[pos].kind == '/')) {
                const char op = tokens[pos].kind;
                ++pos;
                std::optional<Frac> right = parse_factor();
                if (!right) {
                    return std::nullopt;
                }
                if (op == '*') {
                    left = *left * *right;
                } else {
                    left = divide(*left, *right);
                    if (!left) {
                        error = "division by zero";
                        return std::nullopt;
                    }
                }
            }
            return left;
        };
        std::optional<Frac> left = parse_term();
        while (left && pos < tokens.size() &&
               (tokens[pos].kind == '+' || tokens[pos].kind == '-')) {
            const char op = tokens[pos].kind;
            ++pos;
            std::optional<Frac> right = parse_term();
            if (!right) {
                return std::nullopt;
            }
            left = op == '+' ? *left + *right : *left - *right;
        }
        return left;
    };

    std::optional<Frac> value = parse_expr(parse_expr);
    if (!value) {
        return error.empty() ? std::string("parse error") : error;
    }
    if (pos != tokens.size()) {
        return std::string("trailing tokens after position ") + std::to_string(pos);
    }
    out.value = *value;
    return out;
}

inline constexpr Frac kTarget{24, 1};

/// Exhaustive 24-game search: every way of repeatedly combining two values
/// with one of the four operations (both orders for - and /), exact fraction
/// arithmetic throughout. Returns a fully parenthesized expression or
/// nullopt when the numbers admit no solution.
inline std::optional<std::string> solve(const std::array<int, 4>& numbers) {
    struct Item {
        Frac value;
        std::string expr;
    };

    auto search = [](auto&& self, std::vector<Item>& items) -> std::optional<std::string> {
        if (items.size() == 1) {
            if (items[0].value == kTarget) {
                return items[0].expr;
            }
            return std::nullopt;
        }
        for (std::size_t i = 0; i < items.size(); ++i) {
            for (std::size_t j = i + 1; j < items.size(); ++j) {
                const Item a = items[i];
                const Item b = items[j];
                std::vector<Item> rest;
                for (std::size_t k = 0; k < items.size(); ++k) {
                    if (k != i && k != j) {
                        rest.push_back(items[k]);
                    }
                }
                std::vector<Item> candidates;
                candidates.push_back({a.value + b.value, "(" + a.expr + " + " + b.expr + ")"});
                candidates.push_back({a.value * b.value, "(" + a.expr + " * " + b.expr + ")"});
                candidates.push_back({a.value - b.value, "(" + a.expr + " - " + b.expr + ")"});
                candidates.push_back({b.value - a.value, "(" + b.expr + " - " + a.expr + ")"});
                if (auto q = divide(a.value, b.value)) {
                    candidates.push_back({*q, "(" + a.expr + " / " + b.expr + ")"});
                }
                if (auto q = divide(b.value, a.value)) {
                    candidates.push_back({*q, "(" + b.expr + " / " + a.expr + ")"});
                }
                for (Item& candidate : candidates) {
                    rest.push_back(std::move(candidate));
                    if (auto found = self(self, rest)) {
                        return found;
                    }
                    rest.pop_back();
                }
            }
        }
        return std::nullopt;
    };

    std::vector<Item> items;
    for (int n : numbers) {
        items.push_back({Frac::of(n), std::to_string(n)});
    }
    return search(search, items);
}

} // namespace mrp::game24
