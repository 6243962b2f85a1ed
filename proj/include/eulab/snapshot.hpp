#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eulab/lagrangian.hpp"

namespace eulab {

// Binary snapshot layout, all little endian:
//   "EGL1" | dim u8 | N u32 | L f64 | kind u8 | count u8 | count * N^dim f64
// Components follow one another; samples inside a component are row-major
// (last axis fastest). Skew matrices keep the strict upper triangle, row by row.

enum class SnapshotKind : std::uint8_t { Scalar = 0, Vector = 1, Matrix = 2, Diffeo = 3 };

inline const char* kind_name(SnapshotKind k) {
  switch (k) {
  case SnapshotKind::Scalar: return "scalar";
  case SnapshotKind::Vector: return "vector";
  case SnapshotKind::Matrix: return "matrix";
  case SnapshotKind::Diffeo: return "diffeo";
  }
  return "unknown";
}

class SnapshotError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Snapshot {
  Grid grid;
  SnapshotKind kind;
  std::vector<std::vector<double>> components;

  ScalarField scalar() const {
    expect(SnapshotKind::Scalar, 1);
    return ScalarField(grid, components[0]);
  }
  VectorField vector() const {
    if (kind != SnapshotKind::Vector && kind != SnapshotKind::Diffeo) throw SnapshotError("snapshot: not a vector field");
    if (static_cast<int>(components.size()) != grid.dim()) throw SnapshotError("snapshot: component count != dim");
    std::vector<ScalarField> c;
    for (const auto& v : components) c.emplace_back(grid, v);
    return VectorField(std::move(c));
  }
  Diffeo diffeo() const {
    if (kind != SnapshotKind::Diffeo) throw SnapshotError("snapshot: not a diffeo");
    return Diffeo(vector());
  }
  /// Full n*n storage, or the strict upper triangle of a skew matrix.
  MatrixField matrix() const {
    if (kind != SnapshotKind::Matrix) throw SnapshotError("snapshot: not a matrix field");
    const int n = grid.dim();
    MatrixField m(grid);
    if (static_cast<int>(components.size()) == n * n) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = ScalarField(grid, components[i * n + j]);
    } else if (static_cast<int>(components.size()) == n * (n - 1) / 2) {
      std::size_t e = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j, ++e) {
          m(i, j) = ScalarField(grid, components[e]);
          m(j, i) = -m(i, j);
        }
    } else {
      throw SnapshotError("snapshot: matrix component count is neither n^2 nor n(n-1)/2");
    }
    return m;
  }

private:
  void expect(SnapshotKind k, std::size_t count) const {
    if (kind != k) throw SnapshotError(std::string("snapshot: expected kind ") + kind_name(k));
    if (components.size() != count) throw SnapshotError("snapshot: unexpected component count");
  }
};

namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
  char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw SnapshotError("snapshot: truncated record");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

inline void write_record(std::ostream& os, const Grid& g, SnapshotKind kind, const std::vector<const ScalarField*>& c) {
  os.write("EGL1", 4);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(g.dim()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.n()));
  put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(g.length()));
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(kind));
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(c.size()));
  for (const ScalarField* f : c)
    for (double x : f->values()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(x));
  if (!os) throw SnapshotError("snapshot: write failed");
}

} // namespace detail

inline void write_snapshot(std::ostream& os, const ScalarField& f) {
  detail::write_record(os, f.grid(), SnapshotKind::Scalar, {&f});
}

inline void write_snapshot(std::ostream& os, const VectorField& u) {
  std::vector<const ScalarField*> c;
  for (const auto& f : u.components()) c.push_back(&f);
  detail::write_record(os, u.grid(), SnapshotKind::Vector, c);
}

inline void write_snapshot(std::ostream& os, const Diffeo& phi) {
  std::vector<const ScalarField*> c;
  for (const auto& f : phi.displacement().components()) c.push_back(&f);
  detail::write_record(os, phi.grid(), SnapshotKind::Diffeo, c);
}

/// skew = true keeps only the strict upper triangle (vorticities).
inline void write_snapshot(std::ostream& os, const MatrixField& m, bool skew = true) {
  const int n = m.dim();
  std::vector<const ScalarField*> c;
  for (int i = 0; i < n; ++i)
    for (int j = skew ? i + 1 : 0; j < n; ++j) c.push_back(&m(i, j));
  detail::write_record(os, m.grid(), SnapshotKind::Matrix, c);
}

/// Reads one record. Returns false at a clean end of stream.
inline bool read_snapshot(std::istream& is, Snapshot& out) {
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() == 0 && is.eof()) return false;
  if (is.gcount() != 4 || std::string(magic, 4) != "EGL1") throw SnapshotError("snapshot: bad magic");
  int dim = detail::get_le<std::uint8_t>(is);
  std::uint32_t n = detail::get_le<std::uint32_t>(is);
  double L = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
  auto kind = detail::get_le<std::uint8_t>(is);
  int count = detail::get_le<std::uint8_t>(is);
  if (kind > static_cast<std::uint8_t>(SnapshotKind::Diffeo)) throw SnapshotError("snapshot: unknown kind tag");
  if (n > (1u << 16)) throw SnapshotError("snapshot: implausible grid size");
  Grid g = [&] {
    try {
      return Grid(dim, static_cast<int>(n), L);
    } catch (const std::invalid_argument& e) {
      throw SnapshotError(std::string("snapshot: invalid grid header: ") + e.what());
    }
  }();
  if (count < 1 || count > dim * dim) throw SnapshotError("snapshot: invalid component count");
  Snapshot s{g, static_cast<SnapshotKind>(kind), {}};
  for (int c = 0; c < count; ++c) {
    std::vector<double> v(g.size());
    for (auto& x : v) x = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
    s.components.push_back(std::move(v));
  }
  out = std::move(s);
  return true;
}

inline std::vector<Snapshot> read_snapshots(std::istream& is) {
  std::vector<Snapshot> out;
  Snapshot s{Grid(2, 8, 1.0), SnapshotKind::Scalar, {}};
  while (read_snapshot(is, s)) out.push_back(s);
  return out;
}

} // namespace eulab
