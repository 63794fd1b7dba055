#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fracpile/kernel.hpp"

namespace fracpile {

// All file outputs go through a temp-file + rename so an interrupted run
// never leaves a partial file behind.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

// Kernel cache file: little-endian header (magic, version, d, n, alpha,
// rel_tol, R, tail_cert, unnormalized_total) followed by n^d weights as
// 64-bit floats in flat-index order.
std::string encode_kernel(const LongRangeKernel& kernel);
LongRangeKernel decode_kernel(const std::string& bytes);

void save_kernel(const std::filesystem::path& path, const LongRangeKernel& kernel);
std::optional<LongRangeKernel> load_kernel(const std::filesystem::path& path);

// Cache location: $FRACPILE_CACHE_DIR if set, else no disk caching.
std::optional<std::filesystem::path> kernel_cache_path(const LatticeSpec& spec,
                                                       double alpha, double rel_tol);

// CSV export `index,coords,weight` (coords joined with ';').
std::string kernel_to_csv(const LongRangeKernel& kernel);

// Fixed-width float formatting used by every data file (byte-reproducible).
std::string format_double(double v);

}  // namespace fracpile
