#pragma once

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "fibrelin/errors.hpp"
#include "fibrelin/expr.hpp"

namespace fibrelin {

struct SymbolTable {
    std::vector<std::string> symbols;

    bool contains(std::string_view name) const {
        for (const auto& s : symbols)
            if (s == name) return true;
        return false;
    }
    void declare(const std::string& name) {
        if (!contains(name)) symbols.push_back(name);
    }
    static SymbolTable of(std::vector<std::string> names) {
        SymbolTable t;
        t.symbols = std::move(names);
        return t;
    }
};

// Recursive descent parser for the expression grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ['-'] atom ['^' integer]
//   atom   := number | ident | ident '(' expr ')' | '(' expr ')'
// Numbers are standard decimal literals (optional fraction and exponent);
// pure integers parse exact. Columns in errors are 1-based.
namespace parsedetail {

struct ExprParser {
    std::string_view text;
    std::size_t pos = 0;
    const SymbolTable& symbols;

    explicit ExprParser(std::string_view t, const SymbolTable& syms) : text(t), symbols(syms) {}

    [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
        throw ParseError(msg, -1, static_cast<int>(at) + 1);
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }

    ExprPtr parse() {
        ExprPtr e = expr();
        if (peek() != '\0') fail(std::string("unexpected character '") + text[pos] + "'", pos);
        return e;
    }

    ExprPtr expr() {
        ExprPtr e = term();
        for (;;) {
            if (accept('+'))
                e = make_add({e, term()});
            else if (accept('-'))
                e = make_add({e, make_neg(term())});
            else
                return e;
        }
    }

    ExprPtr term() {
        ExprPtr e = factor();
        for (;;) {
            if (accept('*'))
                e = make_mul({e, factor()});
            else if (accept('/'))
                e = make_div(e, factor());
            else
                return e;
        }
    }

    ExprPtr factor() {
        bool negate = accept('-');
        ExprPtr e = atom();
        if (accept('^')) e = make_pow(e, integer_literal());
        return negate ? make_neg(e) : e;
    }

    long long integer_literal() {
        skip_ws();
        std::size_t start = pos;
        if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
        if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
            fail("expected an integer exponent", pos);
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        return std::strtoll(std::string(text.substr(start, pos - start)).c_str(), nullptr, 10);
    }

    ExprPtr atom() {
        char c = peek();
        if (c == '(') {
            ++pos;
            ExprPtr e = expr();
            if (!accept(')')) fail("expected ')'", pos);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (c == '\0') fail("unexpected end of expression", pos);
        fail(std::string("unexpected character '") + c + "'", pos);
    }

    ExprPtr number() {
        std::size_t start = pos;
        bool is_integer = true;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos < text.size() && text[pos] == '.') {
            is_integer = false;
            ++pos;
            if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
                fail("expected digits after decimal point", pos);
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        }
        if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
            is_integer = false;
            ++pos;
            if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
            if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
                fail("expected digits in exponent", pos);
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        }
        std::string lit(text.substr(start, pos - start));
        if (is_integer) {
            errno = 0;
            char* end = nullptr;
            long long v = std::strtoll(lit.c_str(), &end, 10);
            if (errno == 0 && end && *end == '\0') return make_int(v);
        }
        return make_real(std::strtod(lit.c_str(), nullptr));
    }

    ExprPtr identifier() {
        std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        std::string name(text.substr(start, pos - start));
        if (peek() == '(') {
            auto f = func_from_name(name);
            if (!f) fail("unknown function '" + name + "'", start);
            ++pos;
            ExprPtr arg = expr();
            if (!accept(')')) fail("expected ')' to close call of '" + name + "'", pos);
            return make_func(*f, arg);
        }
        if (!symbols.contains(name)) throw UndeclaredSymbolError(name, -1, static_cast<int>(start) + 1);
        return make_var(name);
    }
};

}  // namespace parsedetail

inline ExprPtr parse_expr(const std::string& text, const SymbolTable& symbols) {
    parsedetail::ExprParser p(text, symbols);
    return p.parse();
}

}  // namespace fibrelin
