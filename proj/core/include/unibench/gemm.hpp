#pragma once

#include "unibench/aligned_buffer.hpp"
#include "unibench/worker_pool.hpp"

#include <cstddef>
#include <cstdint>
#include <span>

namespace unibench {

// Square row-major FP32 matrix in a zeroed, page-aligned allocation whose
// length is rounded up to a whole number of pages.
class MatrixF32 {
public:
    explicit MatrixF32(std::size_t n);

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t alloc_bytes() const noexcept { return buffer_.size_bytes(); }

    [[nodiscard]] std::span<float> data() noexcept { return buffer_.as<float>(n_ * n_); }
    [[nodiscard]] std::span<const float> data() const noexcept { return buffer_.as<float>(n_ * n_); }

    float& operator()(std::size_t row, std::size_t col) noexcept { return data()[row * n_ + col]; }
    float operator()(std::size_t row, std::size_t col) const noexcept { return data()[row * n_ + col]; }

    [[nodiscard]] AlignedBuffer& buffer() noexcept { return buffer_; }
    [[nodiscard]] const AlignedBuffer& buffer() const noexcept { return buffer_; }

private:
    std::size_t n_;
    AlignedBuffer buffer_;
};

// ceil(n^2 * 4 / 16384) * 16384.
constexpr std::size_t matrix_alloc_bytes(std::size_t n) noexcept {
    return round_up_to_page(n * n * sizeof(float));
}

// Counter-based generator: element i of a matrix drawn with `seed` is
//   x = splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15)
//   value = (x >> 40) * 2^-24
// giving 24-bit uniform floats in [0, 1) that any language can reproduce.
float counter_uniform(std::uint64_t seed, std::uint64_t index) noexcept;

// Deterministic dense matrix with values in [0, 1). Throws ConfigError when
// n == 0.
MatrixF32 generate_matrix(std::size_t n, std::uint64_t seed);

// n^2 (2n - 1): n multiplications and n - 1 additions per output element.
constexpr std::uint64_t gemm_flops(std::uint64_t n) noexcept {
    return n * n * (2 * n - 1);
}

// Triple loop, FP32 accumulation with k ascending, single thread. This is the
// verification oracle for every other implementation.
MatrixF32 gemm_naive(const MatrixF32& a, const MatrixF32& b);
void gemm_naive_into(const MatrixF32& a, const MatrixF32& b, MatrixF32& c);

// Blocked multiply parallelized over rows of output tiles. Each element is
// accumulated with k ascending, so with one thread the result matches
// gemm_naive bit-for-bit.
MatrixF32 gemm_tiled(const MatrixF32& a, const MatrixF32& b, std::size_t tile, std::size_t threads);
void gemm_tiled_into(const MatrixF32& a, const MatrixF32& b, MatrixF32& c, std::size_t tile, WorkerPool& pool,
                     std::size_t threads);

struct GemmVerification {
    bool passed = false;
    double max_abs_error = 0.0;
    double bound = 0.0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
};

inline constexpr double kFp32Epsilon = 1.0 / (1u << 23);

// 16 * eps * n * max|A| * max|B|.
double gemm_error_bound(std::size_t n, double max_abs_a, double max_abs_b);
double max_abs(std::span<const float> values) noexcept;

GemmVerification verify_gemm(const MatrixF32& c, const MatrixF32& oracle, const MatrixF32& a, const MatrixF32& b);

} // namespace unibench
