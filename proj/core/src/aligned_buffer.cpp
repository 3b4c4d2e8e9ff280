#include "unibench/aligned_buffer.hpp"

#include <cstdlib>
#include <cstring>
#include <new>

namespace unibench {

void AlignedBuffer::FreeDeleter::operator()(std::byte* p) const noexcept {
    std::free(p);
}

AlignedBuffer::AlignedBuffer(std::size_t bytes) {
    const std::size_t rounded = round_up_to_page(bytes);
    if (rounded == 0) {
        return;
    }
    void* raw = std::aligned_alloc(kPageBytes, rounded);
    if (raw == nullptr) {
        throw std::bad_alloc();
    }
    std::memset(raw, 0, rounded);
    data_.reset(static_cast<std::byte*>(raw));
    size_ = rounded;
}

} // namespace unibench
