#pragma once

namespace pidrme {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS after every layer. Call once at startup; a no-op off glibc.
void tune_allocator();

}  // namespace pidrme
