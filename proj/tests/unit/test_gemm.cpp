#include "unibench/errors.hpp"
#include "unibench/gemm.hpp"
#include "unibench/gemm_provider.hpp"
#include "unibench/gemm_suite.hpp"

#include "test_util.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace unibench;
using boost::multiprecision::cpp_int;

namespace {

cpp_int exact_flops(std::uint64_t n) {
    const cpp_int m = n;
    return m * m * (2 * m - 1);
}

// Double-precision reference, independent of the library kernels.
std::vector<double> reference_product(const MatrixF32& a, const MatrixF32& b) {
    const std::size_t n = a.n();
    std::vector<double> c(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j)
                c[i * n + j] += static_cast<double>(a(i, k)) * static_cast<double>(b(k, j));
    return c;
}

bool bit_identical(const MatrixF32& x, const MatrixF32& y) {
    return x.n() == y.n() && std::memcmp(x.data().data(), y.data().data(), x.n() * x.n() * sizeof(float)) == 0;
}

GemmConfig small_config() {
    GemmConfig cfg;
    cfg.sizes = {16, 32};
    cfg.repetitions = 3;
    cfg.tile = 8;
    return cfg;
}

} // namespace

TEST(GemmFlops, MatchesArbitraryPrecisionForDefaultSizes) {
    for (std::size_t n : GemmConfig{}.sizes) {
        EXPECT_EQ(cpp_int(gemm_flops(n)), exact_flops(n)) << n;
    }
    EXPECT_EQ(gemm_flops(1024), 2'146'435'072ull);
    EXPECT_EQ(gemm_flops(1), 1u);
    EXPECT_EQ(gemm_flops(2), 12u);
}

TEST(GemmFlops, RandomSizesMatchArbitraryPrecision) {
    testutil::Gen gen(31);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t n = gen.size(1, 1u << 20);
        EXPECT_EQ(cpp_int(gemm_flops(n)), exact_flops(n)) << n;
    }
}

TEST(GemmMatrix, AllocationIsPageRounded) {
    EXPECT_EQ(matrix_alloc_bytes(32), 16384u);
    EXPECT_EQ(matrix_alloc_bytes(64), 16384u);
    EXPECT_EQ(matrix_alloc_bytes(65), 32768u);
    EXPECT_EQ(matrix_alloc_bytes(1024), 4u * 1024 * 1024);
    MatrixF32 m(65);
    EXPECT_EQ(m.alloc_bytes(), 32768u);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(m.data().data()) % kPageBytes, 0u);
    EXPECT_THROW(MatrixF32(0), ConfigError);
}

TEST(GemmMatrix, CounterGeneratorFrozenValues) {
    // splitmix64 finalizer over seed + (i + 1) * golden gamma, top 24 bits.
    EXPECT_EQ(counter_uniform(42, 0), 0.7415648698806763f);
    EXPECT_EQ(counter_uniform(42, 1), 0.1599103808403015f);
    EXPECT_EQ(counter_uniform(42, 2), 0.27860110998153687f);
    EXPECT_EQ(counter_uniform(42, 3), 0.34419065713882446f);
    EXPECT_EQ(counter_uniform(43, 0), 0.7281787395477295f);
    EXPECT_EQ(counter_uniform(7, 1), 0.016788244247436523f);
    EXPECT_EQ(counter_uniform(42, 1000000), 0.6887782216072083f);
}

TEST(GemmMatrix, GeneratorIsDeterministicAndInRange) {
    testutil::Gen gen(32);
    for (int i = 0; i < 20; ++i) {
        const std::size_t n = gen.size(1, 64);
        const std::uint64_t seed = gen.size(0, 1u << 30);
        const MatrixF32 x = generate_matrix(n, seed);
        const MatrixF32 y = generate_matrix(n, seed);
        EXPECT_TRUE(bit_identical(x, y));
        for (float v : x.data()) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LT(v, 1.0f);
        }
        EXPECT_EQ(x(0, 0), counter_uniform(seed, 0));
        EXPECT_EQ(x(n - 1, n - 1), counter_uniform(seed, n * n - 1));
    }
    EXPECT_FALSE(bit_identical(generate_matrix(8, 1), generate_matrix(8, 2)));
}

TEST(GemmNaive, SmallHandCase) {
    MatrixF32 a(2), b(2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    b(0, 0) = 5; b(0, 1) = 6; b(1, 0) = 7; b(1, 1) = 8;
    const MatrixF32 c = gemm_naive(a, b);
    EXPECT_EQ(c(0, 0), 19.0f);
    EXPECT_EQ(c(0, 1), 22.0f);
    EXPECT_EQ(c(1, 0), 43.0f);
    EXPECT_EQ(c(1, 1), 50.0f);
    EXPECT_THROW(gemm_naive(MatrixF32(2), MatrixF32(3)), ConfigError);
}

TEST(GemmNaive, WithinBoundOfDoubleReference) {
    testutil::Gen gen(33);
    for (int i = 0; i < 10; ++i) {
        const std::size_t n = gen.size(1, 96);
        const MatrixF32 a = generate_matrix(n, 100 + i);
        const MatrixF32 b = generate_matrix(n, 200 + i);
        const MatrixF32 c = gemm_naive(a, b);
        const auto ref = reference_product(a, b);
        const double bound = gemm_error_bound(n, max_abs(a.data()), max_abs(b.data()));
        for (std::size_t k = 0; k < ref.size(); ++k) {
            ASSERT_LE(std::fabs(c.data()[k] - ref[k]), bound);
        }
    }
}

TEST(GemmTiled, BitIdenticalToNaiveSingleThread) {
    testutil::Gen gen(34);
    for (int i = 0; i < 40; ++i) {
        const std::size_t n = gen.size(1, 80);
        const std::size_t tile = gen.size(1, n + 5);
        const MatrixF32 a = generate_matrix(n, gen.size(0, 1000));
        const MatrixF32 b = generate_matrix(n, gen.size(0, 1000));
        EXPECT_TRUE(bit_identical(gemm_tiled(a, b, tile, 1), gemm_naive(a, b))) << "n=" << n << " tile=" << tile;
    }
}

TEST(GemmTiled, MultiThreadedWithinBound) {
    testutil::Gen gen(35);
    for (int i = 0; i < 20; ++i) {
        const std::size_t n = gen.size(1, 100);
        const std::size_t tile = gen.size(1, 40);
        const std::size_t threads = gen.size(2, 5);
        const MatrixF32 a = generate_matrix(n, 7);
        const MatrixF32 b = generate_matrix(n, 8);
        const auto v = verify_gemm(gemm_tiled(a, b, tile, threads), gemm_naive(a, b), a, b);
        EXPECT_TRUE(v.passed) << "n=" << n << " tile=" << tile << " threads=" << threads;
    }
    EXPECT_THROW(gemm_tiled(MatrixF32(4), MatrixF32(4), 0, 1), ConfigError);
}

TEST(GemmVerify, BoundFormula) {
    EXPECT_DOUBLE_EQ(gemm_error_bound(512, 1.0, 1.0), 16.0 * std::ldexp(1.0, -23) * 512);
    EXPECT_DOUBLE_EQ(gemm_error_bound(100, 2.0, 0.5), 16.0 * std::ldexp(1.0, -23) * 100);
    EXPECT_EQ(max_abs(std::vector<float>{-3.0f, 2.0f}), 3.0f);
}

TEST(GemmVerify, DetectsPerturbationAboveBound) {
    const std::size_t n = 32;
    const MatrixF32 a = generate_matrix(n, 1);
    const MatrixF32 b = generate_matrix(n, 2);
    const MatrixF32 oracle = gemm_naive(a, b);
    MatrixF32 c = gemm_naive(a, b);
    const auto ok = verify_gemm(c, oracle, a, b);
    EXPECT_TRUE(ok.passed);
    EXPECT_EQ(ok.max_abs_error, 0.0);

    c(5, 7) += static_cast<float>(ok.bound * 4);
    const auto bad = verify_gemm(c, oracle, a, b);
    EXPECT_FALSE(bad.passed);
    EXPECT_EQ(bad.worst_row, 5u);
    EXPECT_EQ(bad.worst_col, 7u);

    c(5, 7) = std::nanf("");
    EXPECT_FALSE(verify_gemm(c, oracle, a, b).passed);
}

TEST(GemmProvider, NamesAndErrors) {
    const auto names = provider_names();
    EXPECT_NE(std::find(names.begin(), names.end(), "none"), names.end());
    EXPECT_NE(std::find(names.begin(), names.end(), default_provider_name()), names.end());
    try {
        make_provider("mkl-gold");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("none"), std::string::npos);
    }
    const auto none = make_provider("none");
    EXPECT_FALSE(none->available());
    const MatrixF32 a = generate_matrix(4, 1);
    EXPECT_FALSE(gemm_external(a, a, none.get()));
    EXPECT_FALSE(gemm_external(a, a, nullptr));
}

TEST(GemmProvider, ExternalAgreesWithNaive) {
    const auto provider = make_provider(default_provider_name());
    if (!provider->available()) {
        GTEST_SKIP() << "no external provider in this build";
    }
    for (std::size_t n : {1u, 2u, 3u, 17u, 64u, 128u}) {
        const MatrixF32 a = generate_matrix(n, 42);
        const MatrixF32 b = generate_matrix(n, 43);
        const auto c = gemm_external(a, b, provider.get());
        ASSERT_TRUE(c);
        EXPECT_TRUE(verify_gemm(*c, gemm_naive(a, b), a, b).passed) << n;
    }
    EXPECT_THROW(gemm_external(MatrixF32(2), MatrixF32(3), provider.get()), ConfigError);
}

TEST(GemmSuite, ParseLists) {
    EXPECT_EQ(parse_size_list("32,64"), (std::vector<std::size_t>{32, 64}));
    EXPECT_THROW(parse_size_list("48"), ConfigError);
    EXPECT_THROW(parse_size_list("32,,64"), ConfigError);
    EXPECT_THROW(parse_size_list("0"), ConfigError);
    EXPECT_EQ(parse_implementation_list("naive,gpu-tiled"), (std::vector<std::string>{"naive", "gpu-tiled"}));
    try {
        parse_implementation_list("naive,cublas");
        FAIL();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("cublas"), std::string::npos);
        for (const auto& name : gemm_implementation_names()) {
            EXPECT_NE(what.find(name), std::string::npos) << name;
        }
    }
}

TEST(GemmSuite, DefaultsAndSkipRules) {
    const GemmConfig cfg;
    EXPECT_EQ(cfg.sizes, (std::vector<std::size_t>{32, 64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384}));
    EXPECT_EQ(cfg.repetitions, 5u);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_FALSE(is_skipped(cfg, "naive", 4096));
    EXPECT_TRUE(is_skipped(cfg, "naive", 8192));
    EXPECT_TRUE(is_skipped(cfg, "tiled", 16384));
    EXPECT_FALSE(is_skipped(cfg, "external", 16384));
    EXPECT_FALSE(is_skipped(cfg, "gpu-naive", 16384));
}

TEST(GemmSuite, ConfigInvariants) {
    auto bad = small_config();
    bad.sizes = {};
    EXPECT_THROW(validate_config(bad), ConfigError);
    bad = small_config();
    bad.sizes = {24};
    EXPECT_THROW(validate_config(bad), ConfigError);
    bad = small_config();
    bad.repetitions = 0;
    EXPECT_THROW(validate_config(bad), ConfigError);
    bad = small_config();
    bad.implementations = {"naive", "blas"};
    EXPECT_THROW(validate_config(bad), ConfigError);
    bad = small_config();
    bad.implementations = {};
    EXPECT_THROW(validate_config(bad), ConfigError);
    bad = small_config();
    bad.tile = 0;
    EXPECT_THROW(validate_config(bad), ConfigError);
}

TEST(GemmSuite, RunsCellsAndReportsSkips) {
    auto cfg = small_config();
    const auto provider = make_provider("none");
    std::size_t before = 0, after = 0, results = 0;
    GemmHooks hooks;
    hooks.before_repetition = [&](const GemmRepetition& r) {
        EXPECT_EQ(r.repetition, before % cfg.repetitions);
        ++before;
    };
    hooks.after_repetition = [&](const GemmRepetition&, double s) {
        EXPECT_GT(s, 0.0);
        ++after;
    };
    hooks.on_result = [&](const GemmResult&) { ++results; };
    const auto out = run_gemm_suite(cfg, {provider.get(), nullptr}, hooks);
    ASSERT_EQ(out.size(), 10u);
    EXPECT_EQ(results, 10u);
    // naive and tiled time; external and GPU cells are skipped.
    EXPECT_EQ(before, 2 * 2 * cfg.repetitions);
    EXPECT_EQ(after, before);
    for (const auto& r : out) {
        if (r.implementation == "naive" || r.implementation == "tiled") {
            EXPECT_EQ(r.status, kStatusOk);
            EXPECT_TRUE(r.verified);
            ASSERT_EQ(r.times_s.size(), cfg.repetitions);
            EXPECT_EQ(r.gflops_best, gemm_gflops_best(r.n, r.times_s));
        } else if (r.implementation == "external") {
            EXPECT_EQ(r.status, kStatusSkippedProvider);
            EXPECT_TRUE(r.times_s.empty());
        } else {
            EXPECT_EQ(r.status, kStatusSkippedNoGpu);
            EXPECT_TRUE(r.times_s.empty());
        }
    }
}

TEST(GemmSuite, VerificationLimitedBySize) {
    auto cfg = small_config();
    cfg.implementations = {"tiled"};
    cfg.verify_max_n = 16;
    auto out = run_gemm_suite(cfg, {});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_TRUE(out[0].verified);
    EXPECT_FALSE(out[1].verified);
    EXPECT_EQ(out[1].status, kStatusOk);
    cfg.verify_all = true;
    out = run_gemm_suite(cfg, {});
    EXPECT_TRUE(out[1].verified);
}

TEST(GemmSuite, SkipRulesOmitCells) {
    auto cfg = small_config();
    cfg.implementations = {"naive", "tiled"};
    cfg.skip_rules = {{"naive", 16}};
    const auto out = run_gemm_suite(cfg, {});
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[2].implementation, "tiled");
    EXPECT_EQ(out[2].n, 32u);
}

TEST(GemmSuite, BestOfNAccounting) {
    testutil::Gen gen(36);
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = std::size_t{1} << gen.size(1, 14);
        auto times = gen.positive_times(gen.size(1, 10));
        const double tmin = *std::min_element(times.begin(), times.end());
        double sum = 0.0;
        for (double t : times) sum += t;
        const double best = gemm_gflops_best(n, times);
        EXPECT_EQ(best, static_cast<double>(gemm_flops(n)) / tmin / 1e9);
        EXPECT_DOUBLE_EQ(gemm_gflops_mean(n, times), static_cast<double>(gemm_flops(n)) / (sum / times.size()) / 1e9);
        EXPECT_LE(gemm_gflops_mean(n, times), best * (1 + 1e-12));
        std::shuffle(times.begin(), times.end(), gen.engine());
        EXPECT_EQ(gemm_gflops_best(n, times), best);
    }
    EXPECT_THROW(gemm_gflops_mean(32, std::vector<double>{}), std::invalid_argument);
}
