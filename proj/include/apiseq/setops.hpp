#pragma once

// Sorted-set kernels behind the similarity coefficients. An n-gram set is a
// strictly increasing array of packed u64 keys; every coefficient reduces to
// |X ∩ Y| plus the two set sizes, so intersection counting is the scan-time
// hot loop. A scalar merge walk is the reference; on x86-64 an AVX2 block
// kernel is selected at runtime. Both require strictly increasing inputs.

#include <cstddef>
#include <cstdint>
#include <span>

namespace apiseq::setops {

enum class Kernel : uint8_t { Auto, Scalar, Avx2 };

// Reference implementation: two-pointer merge walk.
size_t intersect_count_scalar(std::span<const uint64_t> a, std::span<const uint64_t> b);

#if defined(__x86_64__) || defined(_M_X64)
// AVX2 block kernel: compares 4x4 element blocks via rotated equality masks,
// falls back to the scalar walk for the tails. Call only when cpuid reports
// AVX2 (the dispatcher checks).
size_t intersect_count_avx2(std::span<const uint64_t> a, std::span<const uint64_t> b);
#endif

// Dispatched entry point. Very asymmetric inputs are routed to a galloping
// binary-search count first; otherwise the selected kernel runs.
size_t intersect_count(std::span<const uint64_t> a, std::span<const uint64_t> b);

// Force a kernel (tests, APISEQ_KERNEL=scalar|avx2 env, CLI flags).
// Auto re-detects from cpuid.
void set_kernel(Kernel kernel);
Kernel active_kernel();
const char* kernel_name();

} // namespace apiseq::setops
