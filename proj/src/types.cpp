#include "heun/types.hpp"

namespace heun {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
      return "invalid_argument";
    case ErrorKind::pole:
      return "pole";
    case ErrorKind::resonant:
      return "resonant";
    case ErrorKind::not_singular:
      return "not_singular";
    case ErrorKind::did_not_converge:
      return "did_not_converge";
    case ErrorKind::clearance:
      return "clearance";
    case ErrorKind::step_underflow:
      return "step_underflow";
    case ErrorKind::overflow:
      return "overflow";
    case ErrorKind::not_certified:
      return "not_certified";
  }
  return "unknown";
}

}  // namespace heun
