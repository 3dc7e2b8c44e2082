#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>

namespace ehd {

enum class ErrorKind {
  kInvalidInput,
  kParse,
  kInsufficientData,
  kFitDivergence,
  kMismatchedGeometry,
  kNonConstantVoltage,
  kInsufficientDuration,
  kEmptyFeasibleSet,
  kGridTooLarge,
  kEmptyParetoSet,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed input file. line is 1-based (the CSV header is line 1); 0 when the
// problem is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message)
      : Error(ErrorKind::kParse, format(source, line, message)),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& source, std::size_t line,
                            const std::string& message) {
    std::string out = source.empty() ? "<input>" : source;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + message;
  }

  std::string source_;
  std::size_t line_;
};

// Raised by the optimizer sweep; carries how often each constraint rejected a
// grid point so the caller can see which one binds.
class EmptyFeasibleSetError : public Error {
 public:
  EmptyFeasibleSetError(std::map<std::string, std::size_t> histogram,
                        std::size_t evaluated)
      : Error(ErrorKind::kEmptyFeasibleSet,
              "no feasible design point among " + std::to_string(evaluated) +
                  " evaluated"),
        histogram_(std::move(histogram)) {}

  const std::map<std::string, std::size_t>& histogram() const noexcept {
    return histogram_;
  }

 private:
  std::map<std::string, std::size_t> histogram_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ehd
