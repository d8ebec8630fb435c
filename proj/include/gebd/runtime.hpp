#pragma once

namespace gebd {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates and frees many multi-megabyte activations per step, and
/// the default glibc policy turns each one into fresh page faults.
void tune_allocator();

} // namespace gebd
