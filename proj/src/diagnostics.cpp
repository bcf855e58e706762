#include "errors.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace qlscar {

namespace {

void stderr_sink(const char* message, void*) { std::fprintf(stderr, "qlscar: warning: %s\n", message); }

std::mutex sink_mutex;
DiagnosticSink current_sink = &stderr_sink;
void* current_user = nullptr;

}  // namespace

void set_diagnostic_sink(DiagnosticSink sink, void* user) {
  std::lock_guard<std::mutex> lock(sink_mutex);
  current_sink = sink ? sink : &stderr_sink;
  current_user = user;
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(sink_mutex);
  current_sink(message.c_str(), current_user);
}

}  // namespace qlscar
