#include "fracpile/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fracpile {
namespace {

constexpr char kMagic[4] = {'F', 'P', 'K', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& off) {
  if (off + sizeof(T) > in.size()) throw std::runtime_error("kernel cache: truncated file");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), std::streamsize(contents.size()));
    if (!out) {
      fs::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string encode_kernel(const LongRangeKernel& kernel) {
  std::string out;
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, std::uint32_t(kernel.spec.d));
  put<std::uint64_t>(out, std::uint64_t(kernel.spec.n));
  put<double>(out, kernel.alpha);
  put<double>(out, kernel.rel_tol);
  put<std::uint64_t>(out, std::uint64_t(kernel.truncation_radius));
  put<double>(out, kernel.tail_cert);
  put<double>(out, kernel.unnormalized_total);
  for (std::int64_t i = 0; i < kernel.weights.size(); ++i) put<double>(out, kernel.weights[i]);
  return out;
}

LongRangeKernel decode_kernel(const std::string& bytes) {
  size_t off = 0;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("kernel cache: bad magic");
  off = 4;
  if (take<std::uint32_t>(bytes, off) != kVersion)
    throw std::runtime_error("kernel cache: unsupported version");
  LongRangeKernel k;
  int d = int(take<std::uint32_t>(bytes, off));
  int n = int(take<std::uint64_t>(bytes, off));
  k.spec = LatticeSpec(d, n);
  k.alpha = take<double>(bytes, off);
  k.rel_tol = take<double>(bytes, off);
  k.truncation_radius = int(take<std::uint64_t>(bytes, off));
  k.tail_cert = take<double>(bytes, off);
  k.unnormalized_total = take<double>(bytes, off);
  const std::int64_t sites = k.spec.sites();
  k.weights.resize(sites);
  for (std::int64_t i = 0; i < sites; ++i) k.weights[i] = take<double>(bytes, off);
  if (off != bytes.size()) throw std::runtime_error("kernel cache: trailing bytes");
  return k;
}

void save_kernel(const std::filesystem::path& path, const LongRangeKernel& kernel) {
  atomic_write(path, encode_kernel(kernel));
}

std::optional<LongRangeKernel> load_kernel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_kernel(ss.str());
  } catch (const std::exception&) {
    return std::nullopt;  // corrupted cache entries are rebuilt
  }
}

std::optional<std::filesystem::path> kernel_cache_path(const LatticeSpec& spec,
                                                       double alpha, double rel_tol) {
  const char* dir = std::getenv("FRACPILE_CACHE_DIR");
  if (dir == nullptr || dir[0] == '\0') return std::nullopt;
  // Key on the exact bit patterns so nearby parameters never collide.
  std::uint64_t abits, tbits;
  std::memcpy(&abits, &alpha, 8);
  std::memcpy(&tbits, &rel_tol, 8);
  char name[128];
  std::snprintf(name, sizeof(name), "kernel_d%d_n%d_a%016llx_t%016llx.bin", spec.d,
                spec.n, static_cast<unsigned long long>(abits),
                static_cast<unsigned long long>(tbits));
  return std::filesystem::path(dir) / name;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string kernel_to_csv(const LongRangeKernel& kernel) {
  std::ostringstream out;
  out << "# schema: fracpile/kernel/1\n";
  out << "index,coords,weight\n";
  for_each_site(kernel.spec, [&](std::int64_t i, const Coords& c) {
    out << i << ",";
    for (int j = 0; j < kernel.spec.d; ++j) out << (j ? ";" : "") << c[j];
    out << "," << format_double(kernel.weights[i]) << "\n";
  });
  return out.str();
}

}  // namespace fracpile
