#include "unibench/gemm_provider.hpp"

#include "unibench/errors.hpp"

#if defined(UNIBENCH_HAVE_CBLAS)
#if defined(__APPLE__)
#include <Accelerate/Accelerate.h>
#else
#include <cblas.h>
#endif
#endif

namespace unibench {

namespace {

class NoProvider final : public GemmProvider {
public:
    std::string_view name() const override { return "none"; }
    bool available() const override { return false; }
    void multiply(const MatrixF32&, const MatrixF32&, MatrixF32&) const override {
        throw ConfigError("external GEMM provider 'none' cannot multiply");
    }
};

#if defined(UNIBENCH_HAVE_CBLAS)
class CblasProvider final : public GemmProvider {
public:
    std::string_view name() const override { return "cblas"; }
    bool available() const override { return true; }
    void multiply(const MatrixF32& a, const MatrixF32& b, MatrixF32& c) const override {
        const int n = static_cast<int>(a.n());
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, n, n, 1.0f, a.data().data(), n,
                    b.data().data(), n, 0.0f, c.data().data(), n);
    }
};
#endif

} // namespace

std::vector<std::string> provider_names() {
    std::vector<std::string> names = {"none"};
#if defined(UNIBENCH_HAVE_CBLAS)
    names.emplace_back("cblas");
#endif
    return names;
}

std::string default_provider_name() {
#if defined(UNIBENCH_HAVE_CBLAS)
    return "cblas";
#else
    return "none";
#endif
}

std::unique_ptr<GemmProvider> make_provider(std::string_view name) {
    if (name == "none") {
        return std::make_unique<NoProvider>();
    }
#if defined(UNIBENCH_HAVE_CBLAS)
    if (name == "cblas") {
        return std::make_unique<CblasProvider>();
    }
#endif
    std::string valid;
    for (const auto& n : provider_names()) {
        valid += (valid.empty() ? "" : ", ") + n;
    }
    throw ConfigError("unknown GEMM provider '" + std::string(name) + "' (valid: " + valid + ")");
}

std::optional<MatrixF32> gemm_external(const MatrixF32& a, const MatrixF32& b, const GemmProvider* provider) {
    if (a.n() != b.n()) {
        throw ConfigError("gemm: dimension mismatch");
    }
    if (provider == nullptr || !provider->available()) {
        return std::nullopt;
    }
    MatrixF32 c(a.n());
    provider->multiply(a, b, c);
    return c;
}

} // namespace unibench
