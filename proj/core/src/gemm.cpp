#include "unibench/gemm.hpp"

#include "unibench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace unibench {

namespace {

void require_same_n(const MatrixF32& a, const MatrixF32& b, const MatrixF32* c = nullptr) {
    if (a.n() != b.n() || (c != nullptr && c->n() != a.n())) {
        throw ConfigError("gemm: dimension mismatch");
    }
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

} // namespace

MatrixF32::MatrixF32(std::size_t n) : n_(n), buffer_(n * n * sizeof(float)) {
    if (n == 0) {
        throw ConfigError("matrix dimension must be >= 1");
    }
}

float counter_uniform(std::uint64_t seed, std::uint64_t index) noexcept {
    const std::uint64_t x = splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15ull);
    return static_cast<float>(x >> 40) * 0x1.0p-24f;
}

MatrixF32 generate_matrix(std::size_t n, std::uint64_t seed) {
    MatrixF32 m(n);
    auto values = m.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = counter_uniform(seed, i);
    }
    return m;
}

void gemm_naive_into(const MatrixF32& a, const MatrixF32& b, MatrixF32& c) {
    require_same_n(a, b, &c);
    const std::size_t n = a.n();
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* pc = c.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            float sum = 0.0f;
            for (std::size_t k = 0; k < n; ++k) {
                sum += pa[i * n + k] * pb[k * n + j];
            }
            pc[i * n + j] = sum;
        }
    }
}

MatrixF32 gemm_naive(const MatrixF32& a, const MatrixF32& b) {
    require_same_n(a, b);
    MatrixF32 c(a.n());
    gemm_naive_into(a, b, c);
    return c;
}

void gemm_tiled_into(const MatrixF32& a, const MatrixF32& b, MatrixF32& c, std::size_t tile, WorkerPool& pool,
                     std::size_t threads) {
    require_same_n(a, b, &c);
    if (tile == 0) {
        throw ConfigError("gemm_tiled: tile must be >= 1");
    }
    const std::size_t n = a.n();
    const std::size_t tile_rows = (n + tile - 1) / tile;
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, pool.size());
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* pc = c.data().data();

    const std::function<void(std::size_t)> job = [&](std::size_t w) {
        const Chunk rows = static_chunk(tile_rows, workers, w);
        for (std::size_t ib = rows.begin; ib < rows.end; ++ib) {
            const std::size_t i0 = ib * tile;
            const std::size_t i1 = std::min(n, i0 + tile);
            std::fill(pc + i0 * n, pc + i1 * n, 0.0f);
            for (std::size_t k0 = 0; k0 < n; k0 += tile) {
                const std::size_t k1 = std::min(n, k0 + tile);
                for (std::size_t j0 = 0; j0 < n; j0 += tile) {
                    const std::size_t j1 = std::min(n, j0 + tile);
                    for (std::size_t i = i0; i < i1; ++i) {
                        float* __restrict crow = pc + i * n;
                        for (std::size_t k = k0; k < k1; ++k) {
                            const float aik = pa[i * n + k];
                            const float* __restrict brow = pb + k * n;
                            for (std::size_t j = j0; j < j1; ++j) {
                                crow[j] += aik * brow[j];
                            }
                        }
                    }
                }
            }
        }
    };
    pool.run(workers, job);
}

MatrixF32 gemm_tiled(const MatrixF32& a, const MatrixF32& b, std::size_t tile, std::size_t threads) {
    require_same_n(a, b);
    MatrixF32 c(a.n());
    WorkerPool pool(std::max<std::size_t>(threads, 1));
    gemm_tiled_into(a, b, c, tile, pool, threads);
    return c;
}

double gemm_error_bound(std::size_t n, double max_abs_a, double max_abs_b) {
    return 16.0 * kFp32Epsilon * static_cast<double>(n) * max_abs_a * max_abs_b;
}

double max_abs(std::span<const float> values) noexcept {
    double m = 0.0;
    for (float v : values) {
        m = std::max(m, static_cast<double>(std::fabs(v)));
    }
    return m;
}

GemmVerification verify_gemm(const MatrixF32& c, const MatrixF32& oracle, const MatrixF32& a, const MatrixF32& b) {
    require_same_n(a, b, &c);
    require_same_n(c, oracle);
    const std::size_t n = c.n();
    GemmVerification v;
    v.bound = gemm_error_bound(n, max_abs(a.data()), max_abs(b.data()));
    const auto got = c.data();
    const auto want = oracle.data();
    bool finite = true;
    for (std::size_t idx = 0; idx < got.size(); ++idx) {
        const double err = std::fabs(static_cast<double>(got[idx]) - static_cast<double>(want[idx]));
        if (!std::isfinite(err)) {
            finite = false;
        }
        if (!(err <= v.max_abs_error)) {
            v.max_abs_error = err;
            v.worst_row = idx / n;
            v.worst_col = idx % n;
        }
    }
    v.passed = finite && v.max_abs_error <= v.bound;
    return v;
}

} // namespace unibench
