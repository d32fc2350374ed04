#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace eli::cli {

// The training loops allocate and free many 64 KiB batches. With glibc's
// default trim threshold each free at the heap top goes back to the kernel and
// the next allocation page-faults it in again, which costs more than the matmul.
inline void keep_heap_resident() {
#if defined(__GLIBC__)
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
#endif
}

}  // namespace eli::cli
