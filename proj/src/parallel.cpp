#include "changetrace/parallel.hpp"

#include <atomic>

namespace ct {

namespace {
std::atomic<unsigned> configured{0};
}

void set_thread_count(unsigned n) { configured = n; }

unsigned thread_count()
{
    const unsigned n = configured;
    if (n) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

}  // namespace ct
