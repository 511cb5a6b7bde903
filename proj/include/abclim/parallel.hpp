#pragma once

#include <cstddef>
#include <functional>

namespace abclim {

// Worker count: ABCLIM_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Calls body(begin, end) over [0, n) in chunks of `chunk` elements. Chunk
// boundaries depend only on n and chunk, never on the worker count.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& body);

// Sum of term(i) over [0, n): per-chunk partial sums combined in chunk
// order, so the result is bitwise identical for any worker count.
double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& term);

inline constexpr std::size_t kReduceChunk = 1 << 14;

}  // namespace abclim
