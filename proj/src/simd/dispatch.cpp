#include <cstdlib>
#include <stdexcept>
#include <string>

#include "lora/simd/kernels.hpp"

namespace lora::simd {

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

std::vector<Isa> available_isas() {
    std::vector<Isa> out{Isa::scalar};
    if (detail::avx2_table()) out.push_back(Isa::avx2);
    if (detail::neon_table()) out.push_back(Isa::neon);
    return out;
}

const KernelTable& kernels_for(Isa isa) {
    const KernelTable* t = nullptr;
    switch (isa) {
        case Isa::scalar: t = &detail::scalar_table; break;
        case Isa::avx2: t = detail::avx2_table(); break;
        case Isa::neon: t = detail::neon_table(); break;
    }
    if (!t) throw std::invalid_argument("kernel variant '" + std::string(isa_name(isa)) +
                                        "' is not available on this CPU");
    return *t;
}

namespace {

const KernelTable& select() {
    if (const char* forced = std::getenv("LORA_SIMD")) {
        const std::string name(forced);
        for (Isa isa : available_isas())
            if (isa_name(isa) == name) return kernels_for(isa);
    }
    if (const auto* t = detail::avx2_table()) return *t;
    if (const auto* t = detail::neon_table()) return *t;
    return detail::scalar_table;
}

}  // namespace

const KernelTable& active_kernels() {
    static const KernelTable& table = select();
    return table;
}

}  // namespace lora::simd
