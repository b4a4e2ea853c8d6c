#pragma once

#include <cstdint>
#include <cstdlib>

#include <cblas.h>

namespace i2vwm {

namespace gemm_detail {

// OpenBLAS's runtime dispatcher misreads hypervisor-masked CPUID and can
// fall back to generic SSE2 kernels. Pick the kernel family from the
// compiler's feature probe instead, unless the user already chose one.
// Priority 101 runs this before OpenBLAS's own initializer when the
// archive is linked statically (the build links the static archive).
__attribute__((constructor(101))) inline void select_kernel() {
    if (std::getenv("OPENBLAS_CORETYPE") == nullptr) {
        __builtin_cpu_init();
        if (__builtin_cpu_supports("avx512f")) setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
        else if (__builtin_cpu_supports("avx2")) setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
    }
}

} // namespace gemm_detail

#if defined(__AVX512F__)
#include <immintrin.h>

namespace gemm_detail {

// Outer-product microkernel for C[m x n] = alpha*A*B + beta*C with small m
// and wide n: rows of B stream once per m-block while accumulators stay in
// registers. Library GEMMs handle these panel shapes poorly.
inline void gemm_nn_smallm(std::int64_t m, std::int64_t n, std::int64_t k, float alpha,
                           const float* a, std::int64_t lda, const float* b, std::int64_t ldb,
                           float beta, float* c, std::int64_t ldc) {
    constexpr std::int64_t MB = 8;  // rows per block
    constexpr std::int64_t NV = 32; // columns per tile (2 zmm)
    for (std::int64_t i0 = 0; i0 < m; i0 += MB) {
        const std::int64_t mb = std::min(MB, m - i0);
        std::int64_t j = 0;
        for (; j + NV <= n; j += NV) {
            __m512 acc[MB][2];
            for (std::int64_t i = 0; i < mb; ++i) {
                acc[i][0] = _mm512_setzero_ps();
                acc[i][1] = _mm512_setzero_ps();
            }
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const __m512 b0 = _mm512_loadu_ps(b + kk * ldb + j);
                const __m512 b1 = _mm512_loadu_ps(b + kk * ldb + j + 16);
                for (std::int64_t i = 0; i < mb; ++i) {
                    const __m512 av = _mm512_set1_ps(a[(i0 + i) * lda + kk]);
                    acc[i][0] = _mm512_fmadd_ps(av, b0, acc[i][0]);
                    acc[i][1] = _mm512_fmadd_ps(av, b1, acc[i][1]);
                }
            }
            for (std::int64_t i = 0; i < mb; ++i) {
                float* cp = c + (i0 + i) * ldc + j;
                __m512 c0 = _mm512_mul_ps(acc[i][0], _mm512_set1_ps(alpha));
                __m512 c1 = _mm512_mul_ps(acc[i][1], _mm512_set1_ps(alpha));
                if (beta != 0.0f) {
                    c0 = _mm512_fmadd_ps(_mm512_set1_ps(beta), _mm512_loadu_ps(cp), c0);
                    c1 = _mm512_fmadd_ps(_mm512_set1_ps(beta), _mm512_loadu_ps(cp + 16), c1);
                }
                _mm512_storeu_ps(cp, c0);
                _mm512_storeu_ps(cp + 16, c1);
            }
        }
        for (; j < n; ++j) { // ragged tail
            for (std::int64_t i = 0; i < mb; ++i) {
                float acc = 0.0f;
                for (std::int64_t kk = 0; kk < k; ++kk)
                    acc += a[(i0 + i) * lda + kk] * b[kk * ldb + j];
                float* cp = c + (i0 + i) * ldc + j;
                *cp = alpha * acc + (beta != 0.0f ? beta * *cp : 0.0f);
            }
        }
    }
}

} // namespace gemm_detail
#endif

// C[m x n] = alpha * A[m x k] (or A^T) * B[k x n] (or B^T) + beta * C
// Row-major throughout; thin wrapper so the BLAS backend stays swappable.
inline void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
                 float alpha, const float* a, std::int64_t lda, const float* b, std::int64_t ldb,
                 float beta, float* c, std::int64_t ldc) {
#if defined(__AVX512F__)
    if (!trans_a && !trans_b && n >= 32 && m <= 192) {
        gemm_detail::gemm_nn_smallm(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
        return;
    }
#endif
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, int(m), int(n), int(k), alpha, a, int(lda), b,
                int(ldb), beta, c, int(ldc));
}

} // namespace i2vwm
