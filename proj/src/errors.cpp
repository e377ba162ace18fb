#include "precise/errors.hpp"

namespace precise {

void throw_shape_error(const std::string& op, const std::string& detail) {
  throw ShapeError(op + ": " + detail);
}

}  // namespace precise
