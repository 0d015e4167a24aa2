#include "credfed/errors.hpp"

namespace credfed {

void require(bool condition, std::string_view message) {
  if (!condition) throw ContractError(std::string(message));
}

}  // namespace credfed
