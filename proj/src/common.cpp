#include "fashiontrend/common.hpp"

#include <charconv>

namespace fashiontrend {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace fashiontrend
