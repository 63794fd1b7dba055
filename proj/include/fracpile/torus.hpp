#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fracpile {

using Field = Eigen::ArrayXd;
using CField = Eigen::ArrayXcd;
using Coords = Eigen::ArrayXi;

// Cubic torus of side n in dimension d.
//
// Conventions used everywhere in this library:
//   * canonical coordinates live in the symmetric window
//       { -floor(n/2), ..., ceil(n/2)-1 }
//     so that low frequencies have small Euclidean norm;
//   * the flat index of a site is row-major over the nonnegative residues
//       m_j = c_j mod n  in  {0, ..., n-1},   index = sum_j m_j * n^(d-1-j)
//     (coordinate 0 slowest).  This matches the layout expected by the
//     discrete Fourier transform, so fields are transformed in place with no
//     permutation, and it fixes the order of every CSV/binary output.
struct LatticeSpec {
  int d = 1;
  int n = 2;

  LatticeSpec() = default;
  LatticeSpec(int d_, int n_) : d(d_), n(n_) {
    if (d < 1) throw std::invalid_argument("LatticeSpec: dimension must be >= 1");
    if (n < 2) throw std::invalid_argument("LatticeSpec: side length must be >= 2");
    double count = 1.0;
    for (int j = 0; j < d; ++j) count *= n;
    if (count > 1.5e9) throw std::invalid_argument("LatticeSpec: n^d too large");
  }

  std::int64_t sites() const {
    std::int64_t count = 1;
    for (int j = 0; j < d; ++j) count *= n;
    return count;
  }

  bool operator==(const LatticeSpec& o) const { return d == o.d && n == o.n; }
  bool operator!=(const LatticeSpec& o) const { return !(*this == o); }
};

// Canonical-window reduction of a single coordinate.
inline int canonical_coord(std::int64_t c, int n) {
  int m = static_cast<int>(((c % n) + n) % n);
  return m >= (n + 1) / 2 ? m - n : m;
}

// Nonnegative residue of a single coordinate (the flat-index digit).
inline int residue_coord(std::int64_t c, int n) {
  return static_cast<int>(((c % n) + n) % n);
}

// Reduce an integer vector to its canonical representative.
Coords canonical(const Coords& p, const LatticeSpec& spec);

// Canonical representative of x - y; both must live on the same lattice.
Coords torus_diff(const Coords& x, const Coords& y, const LatticeSpec& spec);

std::int64_t flat_index(const Coords& p, const LatticeSpec& spec);

// Inverse of flat_index, returning canonical coordinates.
Coords site_at(std::int64_t index, const LatticeSpec& spec);

// All n^d torus frequencies in flat-index order (canonical coordinates).
std::vector<Coords> frequencies(const LatticeSpec& spec);

inline std::int64_t sq_norm(const Coords& p) {
  std::int64_t s = 0;
  for (int j = 0; j < p.size(); ++j) s += std::int64_t(p[j]) * p[j];
  return s;
}

inline double l2_norm(const Coords& p) { return std::sqrt(double(sq_norm(p))); }

// Visits every site in flat-index order; fn(index, canonical_coords).
template <typename Fn>
void for_each_site(const LatticeSpec& spec, Fn&& fn) {
  Coords c = Coords::Zero(spec.d);
  const std::int64_t total = spec.sites();
  for (std::int64_t i = 0; i < total; ++i) {
    std::int64_t rem = i;
    for (int j = spec.d - 1; j >= 0; --j) {
      c[j] = canonical_coord(rem % spec.n, spec.n);
      rem /= spec.n;
    }
    fn(i, c);
  }
}

}  // namespace fracpile
