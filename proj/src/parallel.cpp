#include "ffq/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ffq::parallel {

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n, int chunks) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (n == 0) return out;
    std::size_t c = static_cast<std::size_t>(chunks);
    if (c > n) c = n;
    const std::size_t base = n / c;
    const std::size_t rem = n % c;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < c; ++i) {
        const std::size_t len = base + (i < rem ? 1 : 0);
        out.emplace_back(begin, begin + len);
        begin += len;
    }
    return out;
}

}  // namespace ffq::parallel
