#pragma once

namespace spinegnn {

/// Keeps large freed blocks in the heap instead of returning them to the OS, so the per-step
/// tape buffers are not re-faulted on every forward/backward pass. No-op off glibc.
void configure_allocator();

}  // namespace spinegnn
