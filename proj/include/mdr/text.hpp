#ifndef MDR_TEXT_HPP_
#define MDR_TEXT_HPP_

#include <charconv>
#include <string>

namespace mdr {

// Shortest decimal form that round-trips to the same double.
inline std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace mdr

#endif  // MDR_TEXT_HPP_
