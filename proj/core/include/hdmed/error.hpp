#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hdmed {

/// Validation errors are caller mistakes (bad input, bad flags); numeric
/// errors are failures of a fit on otherwise valid input.
enum class ErrorCategory { validation, numeric };

class Error : public std::exception {
 public:
  Error(ErrorCategory category, std::string module, std::string message);

  const char* what() const noexcept override { return what_.c_str(); }

  ErrorCategory category() const noexcept { return category_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> mediator() const noexcept { return mediator_; }
  std::optional<std::size_t> ordering() const noexcept { return ordering_; }

  // Context is attached as the error travels outwards; indices are 0-based.
  Error& with_mediator(std::size_t k);
  Error& with_ordering(std::size_t m);

 private:
  void rebuild();

  ErrorCategory category_;
  std::string module_;
  std::string message_;
  std::optional<std::size_t> mediator_;
  std::optional<std::size_t> ordering_;
  std::string what_;
};

#define HDMED_DEFINE_ERROR(Name, Category)                             \
  class Name : public Error {                                          \
   public:                                                             \
    Name(std::string module, std::string message)                      \
        : Error(ErrorCategory::Category, std::move(module), std::move(message)) {} \
    /* Shadow the base setters so `throw Name(..).with_mediator(k)` keeps the type. */ \
    Name& with_mediator(std::size_t k) {                               \
      Error::with_mediator(k);                                         \
      return *this;                                                    \
    }                                                                  \
    Name& with_ordering(std::size_t m) {                               \
      Error::with_ordering(m);                                         \
      return *this;                                                    \
    }                                                                  \
  };

HDMED_DEFINE_ERROR(SchemaError, validation)
HDMED_DEFINE_ERROR(ParseError, validation)
HDMED_DEFINE_ERROR(DomainError, validation)
HDMED_DEFINE_ERROR(IndexError, validation)
HDMED_DEFINE_ERROR(PositivityError, validation)
HDMED_DEFINE_ERROR(DegenerateColumnError, numeric)
HDMED_DEFINE_ERROR(CollinearityError, numeric)
HDMED_DEFINE_ERROR(ConvergenceError, numeric)
HDMED_DEFINE_ERROR(DegenerateVarianceError, numeric)
HDMED_DEFINE_ERROR(CalibrationError, numeric)

#undef HDMED_DEFINE_ERROR

}  // namespace hdmed
