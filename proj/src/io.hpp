#pragma once

#include "lattice.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace qlscar::io {

// Wavefunction archive, little-endian throughout:
//
//   offset  size  field
//   0       8     magic "QLSC1\0\0\0"
//   8       4     points_x (uint32)
//   12      4     points_y (uint32)
//   16      8     extent_x (double)
//   24      8     extent_y (double)
//   32      8     state_count (uint64)
//   40      8*S   energies (double)
//   ...     16*N  per state, N = points_x * points_y complex samples in
//                 row-major grid order as (re, im) double pairs
inline constexpr char kArchiveMagic[8] = {'Q', 'L', 'S', 'C', '1', '\0', '\0', '\0'};
inline constexpr std::size_t kArchiveHeaderBytes = 40;

struct WavefunctionArchive {
  lattice::GridSpec grid;
  std::vector<double> energies;
  std::vector<lattice::StateFunction> states;

  bool operator==(const WavefunctionArchive&) const = default;
};

std::size_t archive_size_bytes(const lattice::GridSpec& grid, std::size_t state_count);

void write_archive(std::ostream& out, const WavefunctionArchive& archive);
WavefunctionArchive read_archive(std::istream& in);

void save_archive(const std::filesystem::path& path, const WavefunctionArchive& archive);
WavefunctionArchive load_archive(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory, renamed into place
/// once `fill` returns and the stream is flushed.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill,
                  bool binary = false);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

/// 16-bit binary graymap (P5, maxval 65535, big-endian samples). Pixel
/// values are round(65535 * v / max v); rows follow the grid (row 0 is the
/// lowest y).
void write_pgm(std::ostream& out, const lattice::GridSpec& grid, std::span<const double> values);

}  // namespace qlscar::io
