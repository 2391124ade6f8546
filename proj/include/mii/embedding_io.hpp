#pragma once

// Embedding interchange formats.
//
// Binary ("MIIE"), all fields little-endian:
//   offset 0   4 bytes  magic "MIIE"
//   offset 4   u32      d
//   offset 8   u64      n
//   offset 16  n*d f32  records, one embedding after another
//
// CSV: one embedding per row, d comma-separated decimal values, no header.
//
// Readers renormalize each record, since f32 storage cannot hold the 1e-9
// unit-norm tolerance.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mii/error.hpp"
#include "mii/sphere.hpp"

namespace mii {

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw IoError("truncated embedding file");
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline constexpr std::array<char, 4> kEmbeddingMagic = {'M', 'I', 'I', 'E'};

inline void write_embeddings_binary(std::ostream& out, const std::vector<Embedding>& embeddings,
                                    std::size_t d) {
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  detail::write_le<std::uint64_t>(out, embeddings.size());
  for (const auto& e : embeddings) {
    require(e.dim() == d, "all embeddings in a file must share one dimension");
    for (double c : e.coords()) detail::write_le<float>(out, static_cast<float>(c));
  }
  if (!out) throw IoError("failed writing embedding stream");
}

inline void write_embeddings_binary(const std::string& path,
                                    const std::vector<Embedding>& embeddings, std::size_t d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_embeddings_binary(out, embeddings, d);
}

struct EmbeddingFile {
  std::size_t d = 0;
  std::vector<Embedding> embeddings;
};

inline EmbeddingFile read_embeddings_binary(std::istream& in) {
  std::array<char, 4> magic;
  if (!in.read(magic.data(), magic.size()) || magic != kEmbeddingMagic) {
    throw IoError("not an MIIE embedding file");
  }
  EmbeddingFile file;
  file.d = detail::read_le<std::uint32_t>(in);
  const auto n = detail::read_le<std::uint64_t>(in);
  if (file.d < 2) throw IoError("embedding file declares dimension < 2");
  file.embeddings.reserve(n);
  std::vector<double> coords(file.d);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (auto& c : coords) c = detail::read_le<float>(in);
    file.embeddings.push_back(Embedding::normalized(coords));
  }
  return file;
}

inline EmbeddingFile read_embeddings_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_embeddings_binary(in);
}

inline void write_embeddings_csv(std::ostream& out, const std::vector<Embedding>& embeddings) {
  out << std::setprecision(17);
  for (const auto& e : embeddings) {
    for (std::size_t i = 0; i < e.dim(); ++i) {
      if (i) out << ',';
      out << e[i];
    }
    out << '\n';
  }
}

inline std::vector<Embedding> read_embeddings_csv(std::istream& in) {
  std::vector<Embedding> out;
  std::string line;
  std::size_t d = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> coords;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        coords.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("malformed embedding CSV value: " + cell);
      }
    }
    if (d == 0) d = coords.size();
    if (coords.size() != d) throw IoError("embedding CSV rows have differing lengths");
    out.push_back(Embedding::normalized(std::move(coords)));
  }
  return out;
}

}  // namespace mii
