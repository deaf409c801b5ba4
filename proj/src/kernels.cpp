// Runtime selection of the kernel variant. The AVX2 table is only registered
// when the binary was built with the variant and the CPU reports support.

#include "mobhsmm/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace mobhsmm::kernels {

#if defined(MOBHSMM_HAVE_AVX2)
const Ops* avx2_ops_impl(); // kernels_avx2.cpp
#endif

const Ops* avx2_ops() {
#if defined(MOBHSMM_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_ops_impl();
#endif
    return nullptr;
}

const std::vector<const Ops*>& available_ops() {
    static const std::vector<const Ops*> all = [] {
        std::vector<const Ops*> v{&scalar_ops()};
        if (const Ops* a = avx2_ops()) v.push_back(a);
        return v;
    }();
    return all;
}

namespace {

const Ops* select_default() {
    if (const char* env = std::getenv("MOBHSMM_SIMD")) {
        for (const Ops* ops : available_ops())
            if (std::strcmp(ops->name, env) == 0) return ops;
        return &scalar_ops(); // unknown name falls back to the reference path
    }
    const auto& all = available_ops();
    return all.back(); // widest available variant
}

const Ops*& active_slot() {
    static const Ops* active = select_default();
    return active;
}

} // namespace

const Ops& active_ops() { return *active_slot(); }

bool force_ops(const char* name) {
    for (const Ops* ops : available_ops()) {
        if (std::strcmp(ops->name, name) == 0) {
            active_slot() = ops;
            return true;
        }
    }
    return false;
}

} // namespace mobhsmm::kernels
