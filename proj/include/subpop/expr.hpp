#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "common.hpp"

namespace subpop {

// Tiny arithmetic-expression grammar for user-supplied Lévy densities in s:
// numbers, s, + - * / ^, exp, log, pow, gamma.  Parses once to a closure.
class DensityExpression {
public:
    explicit DensityExpression(std::string text) : text_(std::move(text)) {
        pos_ = 0;
        fn_ = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            throw ConfigError("density expression: trailing input at position " +
                              std::to_string(pos_));
    }

    double operator()(double s) const { return fn_(s); }
    const std::string& text() const { return text_; }

private:
    using Fn = std::function<double(double)>;

    std::string text_;
    size_t pos_ = 0;
    Fn fn_;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    Fn parse_expr() {
        Fn lhs = parse_term();
        while (true) {
            if (consume('+')) {
                Fn rhs = parse_term();
                lhs = [lhs, rhs](double s) { return lhs(s) + rhs(s); };
            } else if (consume('-')) {
                Fn rhs = parse_term();
                lhs = [lhs, rhs](double s) { return lhs(s) - rhs(s); };
            } else {
                return lhs;
            }
        }
    }

    Fn parse_term() {
        Fn lhs = parse_factor();
        while (true) {
            if (consume('*')) {
                Fn rhs = parse_factor();
                lhs = [lhs, rhs](double s) { return lhs(s) * rhs(s); };
            } else if (consume('/')) {
                Fn rhs = parse_factor();
                lhs = [lhs, rhs](double s) { return lhs(s) / rhs(s); };
            } else {
                return lhs;
            }
        }
    }

    Fn parse_factor() {  // right-associative '^'
        Fn base = parse_unary();
        if (consume('^')) {
            Fn expo = parse_factor();
            return [base, expo](double s) { return std::pow(base(s), expo(s)); };
        }
        return base;
    }

    Fn parse_unary() {
        if (consume('-')) {
            Fn inner = parse_unary();
            return [inner](double s) { return -inner(s); };
        }
        return parse_primary();
    }

    Fn parse_primary() {
        skip_ws();
        if (pos_ >= text_.size())
            throw ConfigError("density expression: unexpected end of input");
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (c == '(') {
            ++pos_;
            Fn inner = parse_expr();
            if (!consume(')'))
                throw ConfigError("density expression: missing ')'");
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        throw ConfigError(std::string("density expression: unexpected '") + c + "'");
    }

    Fn parse_number() {
        size_t end = pos_;
        while (end < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                text_[end] == 'e' || text_[end] == 'E' ||
                ((text_[end] == '+' || text_[end] == '-') && end > pos_ &&
                 (text_[end - 1] == 'e' || text_[end - 1] == 'E'))))
            ++end;
        double v = std::stod(text_.substr(pos_, end - pos_));
        pos_ = end;
        return [v](double) { return v; };
    }

    Fn parse_ident() {
        size_t end = pos_;
        while (end < text_.size() && std::isalpha(static_cast<unsigned char>(text_[end])))
            ++end;
        std::string name = text_.substr(pos_, end - pos_);
        pos_ = end;
        if (name == "s") return [](double s) { return s; };
        if (!consume('('))
            throw ConfigError("density expression: expected '(' after '" + name + "'");
        Fn arg = parse_expr();
        if (name == "pow") {
            if (!consume(','))
                throw ConfigError("density expression: pow takes two arguments");
            Fn arg2 = parse_expr();
            if (!consume(')'))
                throw ConfigError("density expression: missing ')'");
            return [arg, arg2](double s) { return std::pow(arg(s), arg2(s)); };
        }
        if (!consume(')'))
            throw ConfigError("density expression: missing ')'");
        if (name == "exp") return [arg](double s) { return std::exp(arg(s)); };
        if (name == "log") return [arg](double s) { return std::log(arg(s)); };
        if (name == "gamma") return [arg](double s) { return std::tgamma(arg(s)); };
        throw ConfigError("density expression: unknown function '" + name + "'");
    }
};

}  // namespace subpop
