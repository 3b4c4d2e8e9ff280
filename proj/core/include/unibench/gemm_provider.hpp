#pragma once

#include "unibench/gemm.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace unibench {

// An optimized single-precision GEMM from outside this project (a BLAS, a
// vendor framework). Computes C = 1 * A * B + 0 * C, row-major, no transposes.
class GemmProvider {
public:
    virtual ~GemmProvider() = default;
    [[nodiscard]] virtual std::string_view name() const = 0;
    [[nodiscard]] virtual bool available() const = 0;
    virtual void multiply(const MatrixF32& a, const MatrixF32& b, MatrixF32& c) const = 0;
};

// "none" plus every provider compiled into this build.
std::vector<std::string> provider_names();
std::string default_provider_name();

// Throws ConfigError listing the valid names when `name` is unknown.
std::unique_ptr<GemmProvider> make_provider(std::string_view name);

// nullopt means skipped(provider): no provider, or it is unavailable.
// Throws ConfigError on a dimension mismatch.
std::optional<MatrixF32> gemm_external(const MatrixF32& a, const MatrixF32& b, const GemmProvider* provider);

} // namespace unibench
