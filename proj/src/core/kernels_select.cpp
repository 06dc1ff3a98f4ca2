#include "finflow/core/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace finflow::kern {

namespace {

const Ops* select() {
    const char* force = std::getenv("FINFLOW_KERNEL");
#if defined(__x86_64__) || defined(_M_X64)
    if (force && std::strcmp(force, "scalar") == 0) return &scalar_ops();
    if (force && std::strcmp(force, "avx2") == 0 && avx2_available()) return &avx2_ops();
    if (!force && avx2_available()) return &avx2_ops();
#else
    (void)force;
#endif
    return &scalar_ops();
}

} // namespace

const Ops& ops() {
    static const Ops* active = select();
    return *active;
}

} // namespace finflow::kern
