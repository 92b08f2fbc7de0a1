#pragma once

#include <compare>
#include <limits>
#include <ostream>

#include "qdkit/error.hpp"

namespace qd {

/// Nonnegative-or-signed real extended by a symbolic +infinity (and -infinity
/// for differences). Infinity is a flag, never a large float.
class Extended {
public:
    constexpr Extended() = default;
    constexpr Extended(double v) : value_(v) {}  // NOLINT(implicit)

    static constexpr Extended infinity(int sign = +1) {
        Extended e;
        e.inf_ = sign >= 0 ? +1 : -1;
        return e;
    }

    constexpr bool is_finite() const { return inf_ == 0; }
    constexpr bool is_infinite() const { return inf_ != 0; }
    constexpr int infinity_sign() const { return inf_; }

    double value() const {
        if (inf_ != 0) {
            return inf_ > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
        }
        return value_;
    }

    /// Finite payload; throws on infinity.
    double finite() const {
        if (inf_ != 0) throw Error(Errc::IndeterminateInfinity, "extended", "finite value requested from infinity");
        return value_;
    }

    friend Extended operator+(Extended a, Extended b) {
        if (a.inf_ != 0 && b.inf_ != 0 && a.inf_ != b.inf_)
            throw Error(Errc::IndeterminateInfinity, "extended", "infinity minus infinity");
        if (a.inf_ != 0) return a;
        if (b.inf_ != 0) return b;
        return Extended(a.value_ + b.value_);
    }
    friend Extended operator-(Extended a) {
        if (a.inf_ != 0) return infinity(-a.inf_);
        return Extended(-a.value_);
    }
    friend Extended operator-(Extended a, Extended b) { return a + (-b); }
    Extended& operator+=(Extended o) { return *this = *this + o; }
    Extended& operator-=(Extended o) { return *this = *this - o; }

    friend bool operator==(Extended a, Extended b) {
        if (a.inf_ != 0 || b.inf_ != 0) return a.inf_ == b.inf_;
        return a.value_ == b.value_;
    }
    friend std::partial_ordering operator<=>(Extended a, Extended b) {
        if (a.inf_ != b.inf_) return a.inf_ <=> b.inf_;
        if (a.inf_ != 0) return std::partial_ordering::equivalent;
        return a.value_ <=> b.value_;
    }

    friend std::ostream& operator<<(std::ostream& os, Extended e) {
        if (e.inf_ > 0) return os << "inf";
        if (e.inf_ < 0) return os << "-inf";
        return os << e.value_;
    }

private:
    double value_ = 0.0;
    int inf_ = 0;
};

}  // namespace qd
