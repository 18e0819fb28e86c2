#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hjbqvi {

// Exact rational time. Grid times are kept as rationals so that every
// impulse time produced by the toolkit is rational by construction.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    constexpr Rational() = default;

    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den == 0) throw std::invalid_argument("Rational: zero denominator");
        if (den < 0) { num = -num; den = -den; }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    static Rational of(std::int64_t n) { return Rational(n, 1); }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    Rational operator+(const Rational& o) const { return Rational(num * o.den + o.num * den, den * o.den); }
    Rational operator-(const Rational& o) const { return Rational(num * o.den - o.num * den, den * o.den); }
    Rational operator*(const Rational& o) const { return Rational(num * o.num, den * o.den); }
    Rational operator/(const Rational& o) const {
        if (o.num == 0) throw std::invalid_argument("Rational: division by zero");
        return Rational(num * o.den, den * o.num);
    }

    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const { return num * o.den < o.num * den; }
    bool operator<=(const Rational& o) const { return num * o.den <= o.num * den; }
    bool operator>(const Rational& o) const { return o < *this; }
    bool operator>=(const Rational& o) const { return o <= *this; }

    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

} // namespace hjbqvi
