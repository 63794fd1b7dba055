#include "fracpile/torus.hpp"

namespace fracpile {

Coords canonical(const Coords& p, const LatticeSpec& spec) {
  if (p.size() != spec.d)
    throw std::invalid_argument("canonical: coordinate dimension mismatch");
  Coords out(spec.d);
  for (int j = 0; j < spec.d; ++j) out[j] = canonical_coord(p[j], spec.n);
  return out;
}

Coords torus_diff(const Coords& x, const Coords& y, const LatticeSpec& spec) {
  if (x.size() != spec.d || y.size() != spec.d)
    throw std::invalid_argument("torus_diff: lattice mismatch");
  Coords out(spec.d);
  for (int j = 0; j < spec.d; ++j)
    out[j] = canonical_coord(std::int64_t(x[j]) - std::int64_t(y[j]), spec.n);
  return out;
}

std::int64_t flat_index(const Coords& p, const LatticeSpec& spec) {
  if (p.size() != spec.d)
    throw std::invalid_argument("flat_index: coordinate dimension mismatch");
  std::int64_t idx = 0;
  for (int j = 0; j < spec.d; ++j) idx = idx * spec.n + residue_coord(p[j], spec.n);
  return idx;
}

Coords site_at(std::int64_t index, const LatticeSpec& spec) {
  if (index < 0 || index >= spec.sites())
    throw std::out_of_range("site_at: flat index out of range");
  Coords c(spec.d);
  for (int j = spec.d - 1; j >= 0; --j) {
    c[j] = canonical_coord(index % spec.n, spec.n);
    index /= spec.n;
  }
  return c;
}

std::vector<Coords> frequencies(const LatticeSpec& spec) {
  std::vector<Coords> out;
  out.reserve(size_t(spec.sites()));
  for_each_site(spec, [&](std::int64_t, const Coords& c) { out.push_back(c); });
  return out;
}

}  // namespace fracpile
