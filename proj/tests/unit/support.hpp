#pragma once

#include "errors.hpp"
#include "lattice.hpp"
#include "oracle.hpp"

#include <string>
#include <vector>

namespace qlscar::test {

// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
  WarningCapture() { set_diagnostic_sink(&WarningCapture::sink, this); }
  ~WarningCapture() { set_diagnostic_sink(nullptr, nullptr); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(const std::string& needle) const {
    for (const auto& m : messages_)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }

private:
  static void sink(const char* message, void* user) {
    static_cast<WarningCapture*>(user)->messages_.emplace_back(message);
  }
  std::vector<std::string> messages_;
};

inline lattice::StateFunction from_real(const lattice::GridSpec& grid, const std::vector<double>& values) {
  lattice::StateFunction psi(grid);
  for (std::size_t i = 0; i < values.size(); ++i) psi.amplitudes()[i] = values[i];
  return psi;
}

inline double expectation_kinetic(const lattice::StateFunction& psi) {
  return lattice::inner_product(psi, lattice::kinetic_apply(psi)).real() / lattice::inner_product(psi, psi).real();
}

}  // namespace qlscar::test
