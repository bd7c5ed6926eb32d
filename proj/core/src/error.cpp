#include "hdmed/error.hpp"

#include <sstream>

namespace hdmed {

Error::Error(ErrorCategory category, std::string module, std::string message)
    : category_(category), module_(std::move(module)), message_(std::move(message)) {
  rebuild();
}

Error& Error::with_mediator(std::size_t k) {
  mediator_ = k;
  rebuild();
  return *this;
}

Error& Error::with_ordering(std::size_t m) {
  ordering_ = m;
  rebuild();
  return *this;
}

void Error::rebuild() {
  std::ostringstream os;
  os << module_ << ": " << message_;
  if (mediator_) os << " [mediator " << (*mediator_ + 1) << "]";
  if (ordering_) os << " [ordering " << (*ordering_ + 1) << "]";
  what_ = os.str();
}

}  // namespace hdmed
