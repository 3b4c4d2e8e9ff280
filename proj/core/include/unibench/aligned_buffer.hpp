#pragma once

#include <cstddef>
#include <memory>
#include <span>

namespace unibench {

// Page size used for every benchmark allocation. Matches the 16 KiB pages of
// Apple Silicon so host buffers can be wrapped by the GPU without copies.
inline constexpr std::size_t kPageBytes = 16384;

constexpr std::size_t round_up_to_page(std::size_t bytes) noexcept {
    return (bytes + kPageBytes - 1) / kPageBytes * kPageBytes;
}

// Zero-initialized, page-aligned heap block whose length is a page multiple.
class AlignedBuffer {
public:
    AlignedBuffer() = default;
    // Allocates round_up_to_page(bytes). Throws std::bad_alloc on failure.
    explicit AlignedBuffer(std::size_t bytes);

    AlignedBuffer(AlignedBuffer&&) noexcept = default;
    AlignedBuffer& operator=(AlignedBuffer&&) noexcept = default;

    [[nodiscard]] std::size_t size_bytes() const noexcept { return size_; }
    [[nodiscard]] std::byte* data() noexcept { return data_.get(); }
    [[nodiscard]] const std::byte* data() const noexcept { return data_.get(); }
    [[nodiscard]] bool empty() const noexcept { return size_ == 0; }

    [[nodiscard]] std::span<std::byte> bytes() noexcept { return {data(), size_}; }
    [[nodiscard]] std::span<const std::byte> bytes() const noexcept { return {data(), size_}; }

    template <typename T>
    [[nodiscard]] std::span<T> as(std::size_t count) noexcept {
        return {reinterpret_cast<T*>(data()), count};
    }
    template <typename T>
    [[nodiscard]] std::span<const T> as(std::size_t count) const noexcept {
        return {reinterpret_cast<const T*>(data()), count};
    }

private:
    struct FreeDeleter {
        void operator()(std::byte* p) const noexcept;
    };

    std::unique_ptr<std::byte, FreeDeleter> data_;
    std::size_t size_ = 0;
};

} // namespace unibench
