#include "fracpile/kernel.hpp"

#include <map>
#include <mutex>

#include "fracpile/fft.hpp"
#include "fracpile/io.hpp"

namespace fracpile {

LatticeConstant lattice_constant(int d, double alpha, double rel_tol) {
  if (alpha <= 0) throw std::invalid_argument("lattice_constant: alpha must be > 0");
  LatticeSumResult s = lattice_power_sum(d, alpha, rel_tol);
  LatticeConstant out;
  out.c_alpha = 1.0 / s.value;
  out.radius = s.radius;
  out.tail_cert = s.cert / s.value;
  return out;
}

LongRangeKernel build_kernel(const LatticeSpec& spec, double alpha, double rel_tol) {
  if (alpha <= 0) throw std::invalid_argument("build_kernel: alpha must be > 0");
  if (!(rel_tol > 0.0) || rel_tol > 1e-6)
    throw std::invalid_argument("build_kernel: rel_tol must lie in (0, 1e-6]");

  ResidueSumResult sums = periodized_power_sum(spec, alpha, rel_tol);

  // ||z|| is even, so residue classes x and -x carry identical mass; average
  // the two accumulators to make the symmetry exact in floating point.
  const std::int64_t sites = spec.sites();
  Eigen::ArrayXd w = sums.values;
  for_each_site(spec, [&](std::int64_t i, const Coords& c) {
    Coords neg = canonical(Coords(-c), spec);
    std::int64_t j = flat_index(neg, spec);
    if (j > i) {
      double avg = 0.5 * (w[i] + w[j]);
      w[i] = avg;
      w[j] = avg;
    }
  });

  KahanSum total;
  for (std::int64_t i = 0; i < sites; ++i) total.add(w[i]);

  LongRangeKernel kernel;
  kernel.spec = spec;
  kernel.alpha = alpha;
  kernel.rel_tol = rel_tol;
  kernel.weights = w / total.value();
  kernel.truncation_radius = sums.radius;
  kernel.tail_cert = sums.cert / total.value();
  kernel.unnormalized_total = total.value();

  if ((kernel.weights <= 0.0).any())
    throw std::runtime_error("build_kernel: nonpositive weight (corrupted sum)");
  return kernel;
}

std::shared_ptr<const LongRangeKernel> get_or_build_kernel(const LatticeSpec& spec,
                                                           double alpha,
                                                           double rel_tol) {
  using Key = std::tuple<int, int, double, double>;
  static std::map<Key, std::shared_ptr<const LongRangeKernel>> registry;
  static std::mutex mtx;
  const Key key{spec.d, spec.n, alpha, rel_tol};
  {
    std::lock_guard<std::mutex> lock(mtx);
    auto it = registry.find(key);
    if (it != registry.end()) return it->second;
  }

  std::shared_ptr<const LongRangeKernel> built;
  auto path = kernel_cache_path(spec, alpha, rel_tol);
  if (path) {
    if (auto loaded = load_kernel(*path)) {
      if (loaded->spec == spec && loaded->alpha == alpha && loaded->rel_tol == rel_tol)
        built = std::make_shared<const LongRangeKernel>(std::move(*loaded));
    }
  }
  if (!built) {
    built = std::make_shared<const LongRangeKernel>(build_kernel(spec, alpha, rel_tol));
    if (path) save_kernel(*path, *built);
  }
  std::lock_guard<std::mutex> lock(mtx);
  registry.emplace(key, built);
  return built;
}

Field apply_generator(const LongRangeKernel& kernel, const Field& f) {
  if (f.size() != kernel.spec.sites())
    throw std::invalid_argument("apply_generator: field size mismatch");
  return circular_convolve(kernel.spec, kernel.weights, f) - f;
}

Field apply_generator_dense(const LongRangeKernel& kernel, const Field& f) {
  const LatticeSpec& spec = kernel.spec;
  if (f.size() != spec.sites())
    throw std::invalid_argument("apply_generator_dense: field size mismatch");
  const std::int64_t sites = spec.sites();
  Field out(sites);
  std::vector<Coords> site_coords(size_t(sites), Coords(spec.d));
  for_each_site(spec, [&](std::int64_t i, const Coords& c) { site_coords[size_t(i)] = c; });
  for (std::int64_t i = 0; i < sites; ++i) {
    KahanSum acc;
    for (std::int64_t j = 0; j < sites; ++j) {
      Coords diff = torus_diff(site_coords[size_t(i)], site_coords[size_t(j)], spec);
      acc.add(kernel.weights[flat_index(diff, spec)] * f[j]);
    }
    out[i] = acc.value() - f[i];
  }
  return out;
}

}  // namespace fracpile
