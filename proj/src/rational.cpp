#include "peerfed/rational.hpp"

#include <cstdlib>

namespace peerfed {

Rational Rational::parse(const std::string& text) {
  if (text.empty()) throw Error(errc::parse_error, "empty rational literal");
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    std::int64_t num = std::stoll(text.substr(0, slash));
    std::int64_t den = std::stoll(text.substr(slash + 1));
    return Rational(num, den);
  }
  auto dot = text.find('.');
  if (dot == std::string::npos) {
    return Rational(std::stoll(text));
  }
  std::string digits = text.substr(0, dot) + text.substr(dot + 1);
  std::size_t frac_len = text.size() - dot - 1;
  if (frac_len > 18) throw Error(errc::parse_error, "decimal literal too long: " + text);
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
  return Rational(std::stoll(digits), den);
}

}  // namespace peerfed
