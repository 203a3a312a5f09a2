#pragma once

// Reduction and update kernels used on the hot paths (Bellman backups,
// row norms, max-abs scans). Each kernel has a scalar reference version and
// ISA-specific variants; a table for the best ISA the CPU supports is chosen
// on first use. Set LORA_SIMD=scalar|avx2|neon to force a variant.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace lora::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
    Isa isa;
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum_squares)(const double* x, std::size_t n);
    double (*max_abs)(const double* x, std::size_t n);
    // y <- y + a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
};

std::string_view isa_name(Isa isa);

/// ISAs compiled into this binary and supported by the running CPU.
std::vector<Isa> available_isas();

/// Throws std::invalid_argument if the ISA is not available.
const KernelTable& kernels_for(Isa isa);

/// The table selected at startup.
const KernelTable& active_kernels();

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active_kernels().dot(x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}
inline double sum_squares(std::span<const double> x) {
    return active_kernels().sum_squares(x.data(), x.size());
}
inline double max_abs(std::span<const double> x) {
    return active_kernels().max_abs(x.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active_kernels().axpy(a, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

namespace detail {
extern const KernelTable scalar_table;
// Null when the variant is not compiled for this target.
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace lora::simd
