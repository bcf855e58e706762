#pragma once

#include <stdexcept>
#include <string>

namespace qlscar {

enum class ErrorKind {
  InvalidArgument,
  Numerical,
  Io,
  CorruptData,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) { return {ErrorKind::InvalidArgument, what}; }
inline Error numerical_error(const std::string& what) { return {ErrorKind::Numerical, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::Io, what}; }
inline Error corrupt_data(const std::string& what) { return {ErrorKind::CorruptData, what}; }

// Warning-level diagnostics. Default sink writes to stderr; the C API can swap it.
using DiagnosticSink = void (*)(const char* message, void* user);
void set_diagnostic_sink(DiagnosticSink sink, void* user);
void warn(const std::string& message);

}  // namespace qlscar
