#include "apiseq/setops.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>

namespace apiseq::setops {

size_t intersect_count_scalar(std::span<const uint64_t> a, std::span<const uint64_t> b) {
    size_t i = 0, j = 0, count = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j])
            ++i;
        else if (b[j] < a[i])
            ++j;
        else
            ++count, ++i, ++j;
    }
    return count;
}

namespace {

// For |a| << |b| a binary search per element beats the merge walk.
size_t intersect_count_gallop(std::span<const uint64_t> small, std::span<const uint64_t> big) {
    size_t count = 0;
    auto lo = big.begin();
    for (uint64_t key : small) {
        lo = std::lower_bound(lo, big.end(), key);
        if (lo == big.end()) break;
        if (*lo == key) ++count, ++lo;
    }
    return count;
}

constexpr size_t kGallopRatio = 64;

using KernelFn = size_t (*)(std::span<const uint64_t>, std::span<const uint64_t>);

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Kernel detect_kernel() {
    if (const char* env = std::getenv("APISEQ_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) return Kernel::Scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Kernel::Avx2;
    }
    return avx2_available() ? Kernel::Avx2 : Kernel::Scalar;
}

std::atomic<Kernel> g_kernel{detect_kernel()};

KernelFn kernel_fn(Kernel kernel) {
#if defined(__x86_64__) || defined(_M_X64)
    if (kernel == Kernel::Avx2) return &intersect_count_avx2;
#endif
    return &intersect_count_scalar;
}

} // namespace

void set_kernel(Kernel kernel) {
    if (kernel == Kernel::Auto) kernel = detect_kernel();
    if (kernel == Kernel::Avx2 && !avx2_available()) kernel = Kernel::Scalar;
    g_kernel.store(kernel, std::memory_order_relaxed);
}

Kernel active_kernel() { return g_kernel.load(std::memory_order_relaxed); }

const char* kernel_name() {
    return active_kernel() == Kernel::Avx2 ? "avx2" : "scalar";
}

size_t intersect_count(std::span<const uint64_t> a, std::span<const uint64_t> b) {
    if (a.empty() || b.empty()) return 0;
    if (a.size() * kGallopRatio < b.size()) return intersect_count_gallop(a, b);
    if (b.size() * kGallopRatio < a.size()) return intersect_count_gallop(b, a);
    return kernel_fn(active_kernel())(a, b);
}

} // namespace apiseq::setops
