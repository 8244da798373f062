#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace ffq::parallel {

// Forwarded to omp_set_num_threads when built with OpenMP; no-op otherwise.
void set_threads(int n);
int max_threads();

// Reductions over subjects are accumulated into a fixed grid of chunks and
// combined in chunk order, so results do not depend on how many worker
// threads execute the loop.
inline constexpr int kAccumChunks = 16;

std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n,
                                                              int chunks = kAccumChunks);

}  // namespace ffq::parallel
