#ifndef MDR_CORE_HPP_
#define MDR_CORE_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mdr {

using NodeId = std::int32_t;
using ItemId = std::int32_t;
using Clock = std::int64_t;

inline constexpr NodeId kNoNode = -1;
inline constexpr ItemId kNoItem = -1;

// Raised when a caller breaks a documented precondition (wrong phase,
// illegal action, empty token set).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised on malformed input files. The message carries the field path.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mdr

#endif  // MDR_CORE_HPP_
