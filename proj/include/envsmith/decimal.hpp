#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

#include "envsmith/errors.hpp"

namespace envsmith {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt pow10(uint32_t n) {
  BigInt p = 1;
  for (uint32_t i = 0; i < n; ++i) p *= 10;
  return p;
}

/// Exact fixed-scale decimal: mantissa * 10^-scale. Stored state never
/// touches binary floating point.
class Decimal {
 public:
  Decimal() = default;
  Decimal(BigInt mantissa, uint32_t scale) : mantissa_(std::move(mantissa)), scale_(scale) {}

  static Decimal from_int(const BigInt& v) { return Decimal(v, 0); }

  /// Parses "-?digits(.digits)?"; the fractional length is the scale.
  static std::optional<Decimal> parse(std::string_view s) {
    if (s.empty()) return std::nullopt;
    size_t i = 0;
    bool neg = false;
    if (s[0] == '-') {
      neg = true;
      i = 1;
    }
    std::string digits;
    uint32_t scale = 0;
    bool seen_point = false, any = false;
    for (; i < s.size(); ++i) {
      char c = s[i];
      if (c == '.') {
        if (seen_point || !any || i + 1 == s.size()) return std::nullopt;
        seen_point = true;
      } else if (c >= '0' && c <= '9') {
        digits.push_back(c);
        any = true;
        if (seen_point) ++scale;
      } else {
        return std::nullopt;
      }
    }
    if (!any) return std::nullopt;
    BigInt m(digits);
    if (neg) m = -m;
    return Decimal(m, scale);
  }

  const BigInt& mantissa() const { return mantissa_; }
  uint32_t scale() const { return scale_; }
  bool is_zero() const { return mantissa_ == 0; }
  bool is_negative() const { return mantissa_ < 0; }

  /// Canonical text: sign, integer part, then exactly `scale` fractional
  /// digits ("1.50", "-0.05", scale 0 prints "42").
  std::string str() const {
    BigInt m = mantissa_ < 0 ? BigInt(-mantissa_) : mantissa_;
    std::string digits = m.str();
    std::string out;
    if (mantissa_ < 0) out.push_back('-');
    if (scale_ == 0) {
      out += digits;
      return out;
    }
    if (digits.size() <= scale_) digits.insert(0, scale_ + 1 - digits.size(), '0');
    out.append(digits, 0, digits.size() - scale_);
    out.push_back('.');
    out.append(digits, digits.size() - scale_, scale_);
    return out;
  }

  /// Exact rescale. Returns nullopt when shrinking the scale would drop
  /// nonzero digits.
  std::optional<Decimal> rescaled(uint32_t new_scale) const {
    if (new_scale == scale_) return *this;
    if (new_scale > scale_) return Decimal(mantissa_ * pow10(new_scale - scale_), new_scale);
    BigInt f = pow10(scale_ - new_scale);
    if (mantissa_ % f != 0) return std::nullopt;
    return Decimal(mantissa_ / f, new_scale);
  }

  Decimal add(const Decimal& o) const {
    auto [a, b, s] = aligned(*this, o);
    return Decimal(a + b, s);
  }
  Decimal sub(const Decimal& o) const {
    auto [a, b, s] = aligned(*this, o);
    return Decimal(a - b, s);
  }
  Decimal mul(const Decimal& o) const {
    return Decimal(mantissa_ * o.mantissa_, scale_ + o.scale_);
  }

  /// Division at scale max(scale, o.scale), rounded half away from zero.
  /// The divisor must be nonzero (the effect engine asserts this first).
  Decimal div(const Decimal& o) const {
    if (o.mantissa_ == 0) throw EffectRuntimeError("division_by_zero", "decimal divide");
    uint32_t out_scale = scale_ > o.scale_ ? scale_ : o.scale_;
    // result mantissa = round(mantissa * 10^(o.scale + out_scale - scale) / o.mantissa)
    int64_t e = int64_t(o.scale_) + int64_t(out_scale) - int64_t(scale_);
    BigInt num = mantissa_;
    BigInt den = o.mantissa_;
    if (e >= 0)
      num *= pow10(uint32_t(e));
    else
      den *= pow10(uint32_t(-e));
    BigInt q = num / den;
    BigInt r = num - q * den;
    if (r != 0) {
      BigInt r2 = 2 * (r < 0 ? BigInt(-r) : r);
      if (r2 >= (den < 0 ? BigInt(-den) : den)) {
        bool pos = (num < 0) == (den < 0);
        q += pos ? 1 : -1;
      }
    }
    return Decimal(q, out_scale);
  }

  /// Numeric comparison across scales: negative, zero or positive like strcmp.
  int compare(const Decimal& o) const {
    auto [a, b, s] = aligned(*this, o);
    (void)s;
    if (a < b) return -1;
    if (a > b) return 1;
    return 0;
  }

  /// Structural equality (mantissa and scale both match). Numeric equality
  /// across scales goes through compare().
  bool operator==(const Decimal& o) const {
    return scale_ == o.scale_ && mantissa_ == o.mantissa_;
  }

 private:
  static std::tuple<BigInt, BigInt, uint32_t> aligned(const Decimal& x, const Decimal& y) {
    if (x.scale_ == y.scale_) return {x.mantissa_, y.mantissa_, x.scale_};
    if (x.scale_ < y.scale_)
      return {x.mantissa_ * pow10(y.scale_ - x.scale_), y.mantissa_, y.scale_};
    return {x.mantissa_, y.mantissa_ * pow10(x.scale_ - y.scale_), x.scale_};
  }

  BigInt mantissa_ = 0;
  uint32_t scale_ = 0;
};

inline bool parse_bigint(std::string_view s, BigInt& out) {
  if (s.empty()) return false;
  size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return false;
  for (size_t j = i; j < s.size(); ++j)
    if (s[j] < '0' || s[j] > '9') return false;
  out = BigInt(std::string(s));
  return true;
}

}  // namespace envsmith
