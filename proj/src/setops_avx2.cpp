// AVX2 intersection kernel. Built with -mavx2 in its own translation unit;
// the dispatcher in setops.cpp only routes here when cpuid reports AVX2.

#include "apiseq/setops.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace apiseq::setops {

namespace {

inline size_t merge_tail(const uint64_t* a, size_t i, size_t na, const uint64_t* b,
                         size_t j, size_t nb) {
    size_t count = 0;
    while (i < na && j < nb) {
        if (a[i] < b[j])
            ++i;
        else if (b[j] < a[i])
            ++j;
        else
            ++count, ++i, ++j;
    }
    return count;
}

} // namespace

size_t intersect_count_avx2(std::span<const uint64_t> sa, std::span<const uint64_t> sb) {
    const uint64_t* a = sa.data();
    const uint64_t* b = sb.data();
    const size_t na = sa.size(), nb = sb.size();
    size_t i = 0, j = 0, count = 0;

    // Compare 4-element blocks all-against-all via three lane rotations.
    // Inputs are strictly increasing, so each a-lane matches at most one
    // b element and the per-lane OR of the equality masks counts it once.
    while (i + 4 <= na && j + 4 <= nb) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + j));
        __m256i eq = _mm256_cmpeq_epi64(va, vb);
        const __m256i vb1 = _mm256_permute4x64_epi64(vb, _MM_SHUFFLE(0, 3, 2, 1));
        eq = _mm256_or_si256(eq, _mm256_cmpeq_epi64(va, vb1));
        const __m256i vb2 = _mm256_permute4x64_epi64(vb, _MM_SHUFFLE(1, 0, 3, 2));
        eq = _mm256_or_si256(eq, _mm256_cmpeq_epi64(va, vb2));
        const __m256i vb3 = _mm256_permute4x64_epi64(vb, _MM_SHUFFLE(2, 1, 0, 3));
        eq = _mm256_or_si256(eq, _mm256_cmpeq_epi64(va, vb3));
        count += static_cast<size_t>(
            __builtin_popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_castsi256_pd(eq)))));
        // Advance whichever block has the smaller maximum; matches with
        // later blocks on the other side are impossible past it.
        const uint64_t amax = a[i + 3], bmax = b[j + 3];
        if (amax <= bmax) i += 4;
        if (bmax <= amax) j += 4;
    }
    return count + merge_tail(a, i, na, b, j, nb);
}

} // namespace apiseq::setops

#endif // x86-64
