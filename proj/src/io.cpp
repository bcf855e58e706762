#include "io.hpp"

#include "errors.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unistd.h>

namespace qlscar::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T swap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  v = swap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw corrupt_data(std::string("archive truncated while reading ") + what);
  }
  return swap_if_big(v);
}

void put_doubles(std::ostream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < count; ++i) put(out, data[i]);
  }
}

void get_doubles(std::istream& in, double* data, std::size_t count) {
  const auto bytes = static_cast<std::streamsize>(count * sizeof(double));
  in.read(reinterpret_cast<char*>(data), bytes);
  if (in.gcount() != bytes) throw corrupt_data("archive payload shorter than its header declares");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < count; ++i) data[i] = swap_if_big(data[i]);
  }
}

std::atomic<unsigned> temp_counter{0};

}  // namespace

std::size_t archive_size_bytes(const lattice::GridSpec& grid, std::size_t state_count) {
  return kArchiveHeaderBytes + state_count * (sizeof(double) + 2 * sizeof(double) * grid.size());
}

void write_archive(std::ostream& out, const WavefunctionArchive& archive) {
  archive.grid.validate();
  if (archive.energies.size() != archive.states.size()) {
    throw invalid_argument("archive needs one energy per state");
  }
  for (const lattice::StateFunction& s : archive.states) {
    if (!(s.grid() == archive.grid)) throw invalid_argument("archive state lives on a different grid");
  }
  out.write(kArchiveMagic, sizeof(kArchiveMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.grid.points_x));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.grid.points_y));
  put<double>(out, archive.grid.extent_x);
  put<double>(out, archive.grid.extent_y);
  put<std::uint64_t>(out, archive.states.size());
  put_doubles(out, archive.energies.data(), archive.energies.size());
  for (const lattice::StateFunction& s : archive.states) {
    put_doubles(out, reinterpret_cast<const double*>(s.amplitudes().data()), 2 * s.amplitudes().size());
  }
  if (!out) throw io_error("failed writing archive");
}

WavefunctionArchive read_archive(std::istream& in) {
  char magic[sizeof(kArchiveMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0) {
    throw corrupt_data("not a wavefunction archive (bad magic)");
  }
  WavefunctionArchive archive;
  const auto nx = get<std::uint32_t>(in, "points_x");
  const auto ny = get<std::uint32_t>(in, "points_y");
  archive.grid.extent_x = get<double>(in, "extent_x");
  archive.grid.extent_y = get<double>(in, "extent_y");
  const auto count = get<std::uint64_t>(in, "state count");
  if (nx > (1u << 16) || ny > (1u << 16)) throw corrupt_data("archive grid dimensions out of range");
  archive.grid.points_x = static_cast<int>(nx);
  archive.grid.points_y = static_cast<int>(ny);
  try {
    archive.grid.validate();
  } catch (const Error& e) {
    throw corrupt_data(std::string("archive header: ") + e.what());
  }
  const std::uint64_t state_bytes = sizeof(double) + 2 * sizeof(double) * archive.grid.size();
  const auto here = in.tellg();
  if (here != std::istream::pos_type(-1)) {
    in.seekg(0, std::ios::end);
    const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
    in.seekg(here);
    if (count > remaining / state_bytes || remaining != count * state_bytes) {
      throw corrupt_data("archive length does not match its header");
    }
  }

  archive.energies.resize(count);
  get_doubles(in, archive.energies.data(), count);
  archive.states.reserve(std::min<std::uint64_t>(count, 4096));
  for (std::uint64_t s = 0; s < count; ++s) {
    std::vector<lattice::complex> amps(archive.grid.size());
    get_doubles(in, reinterpret_cast<double*>(amps.data()), 2 * amps.size());
    const double e = archive.energies[s];
    archive.states.emplace_back(archive.grid, std::move(amps), e);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw corrupt_data("archive has trailing bytes beyond its payload");
  return archive;
}

void save_archive(const std::filesystem::path& path, const WavefunctionArchive& archive) {
  write_atomic(path, [&](std::ostream& out) { write_archive(out, archive); }, true);
}

WavefunctionArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open archive " + path.string());
  return read_archive(in);
}

void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill, bool binary) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(temp_counter++);
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw io_error("cannot create " + tmp.string());
    try {
      fill(out);
      out.flush();
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw io_error("failed writing " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw io_error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_atomic(path, [&](std::ostream& out) { out << text; });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error("failed reading " + path.string());
  return ss.str();
}

void write_pgm(std::ostream& out, const lattice::GridSpec& grid, std::span<const double> values) {
  grid.validate();
  if (values.size() != grid.size()) throw invalid_argument("image values do not match the grid");
  double peak = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw invalid_argument("image values must be finite and nonnegative");
    peak = std::max(peak, v);
  }
  out << "P5\n" << grid.points_x << ' ' << grid.points_y << "\n65535\n";
  std::vector<unsigned char> row(2 * static_cast<std::size_t>(grid.points_x));
  for (int j = 0; j < grid.points_y; ++j) {
    for (int i = 0; i < grid.points_x; ++i) {
      const double v = values[grid.index(i, j)];
      const auto level = peak > 0.0 ? static_cast<std::uint16_t>(std::lround(65535.0 * v / peak)) : std::uint16_t{0};
      row[2 * i] = static_cast<unsigned char>(level >> 8);
      row[2 * i + 1] = static_cast<unsigned char>(level & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw io_error("failed writing graymap");
}

}  // namespace qlscar::io
