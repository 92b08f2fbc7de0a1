#include "qdkit/expression.hpp"

#include <cctype>
#include <cstdlib>
#include <string>

#include "qdkit/error.hpp"

namespace qd {
namespace {

class ExprParser {
public:
    explicit ExprParser(std::string_view s) : src_(s) {}

    Polynomial parse() {
        Polynomial p = expr();
        skip();
        if (pos_ != src_.size()) fail("unexpected character");
        return p;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(Errc::InvalidInput, "cli",
                    "polynomial expression: " + msg + " at offset " + std::to_string(pos_) + " in '" +
                        std::string(src_) + "'");
    }

    void skip() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    char peek() {
        skip();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    Polynomial expr() {
        Polynomial acc = term();
        for (;;) {
            const char c = peek();
            if (c == '+') { ++pos_; acc = acc + term(); }
            else if (c == '-') { ++pos_; acc = acc - term(); }
            else return acc;
        }
    }

    static bool starts_factor(char c) {
        return c == '(' || c == 'z' || c == 'i' || c == '.' || std::isdigit(static_cast<unsigned char>(c));
    }

    Polynomial term() {
        Polynomial acc = power();
        for (;;) {
            const char c = peek();
            if (c == '*') { ++pos_; acc = acc * power(); }
            else if (starts_factor(c)) acc = acc * power();
            else return acc;
        }
    }

    Polynomial power() {
        Polynomial base = unary();
        if (peek() == '^') {
            ++pos_;
            skip();
            const std::size_t start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            if (start == pos_) fail("expected a nonnegative integer exponent");
            const int e = std::stoi(std::string(src_.substr(start, pos_ - start)));
            Polynomial r({1.0});
            for (int k = 0; k < e; ++k) r = r * base;
            return r;
        }
        return base;
    }

    Polynomial unary() {
        const char c = peek();
        if (c == '-') { ++pos_; return -unary(); }
        if (c == '+') { ++pos_; return unary(); }
        return primary();
    }

    Polynomial primary() {
        const char c = peek();
        if (c == '(') {
            ++pos_;
            Polynomial p = expr();
            if (peek() != ')') fail("expected ')'");
            ++pos_;
            return p;
        }
        if (c == 'z') { ++pos_; return Polynomial({0.0, 1.0}); }
        if (c == 'i') { ++pos_; return Polynomial({cplx(0.0, 1.0)}); }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::string rest(src_.substr(pos_));
            char* end = nullptr;
            const double v = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str()) fail("malformed number");
            pos_ += static_cast<std::size_t>(end - rest.c_str());
            if (pos_ < src_.size() && src_[pos_] == 'i') {
                ++pos_;
                return Polynomial({cplx(0.0, v)});
            }
            return Polynomial({cplx(v, 0.0)});
        }
        fail("expected a number, 'z', 'i' or '('");
    }
};

}  // namespace

Polynomial parse_polynomial_expression(std::string_view text) { return ExprParser(text).parse(); }

}  // namespace qd
