#include "spinegnn/platform.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace spinegnn {

void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif
}

}  // namespace spinegnn
