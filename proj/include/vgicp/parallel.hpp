#pragma once

#include <omp.h>

#include <cstddef>
#include <cstdint>
#include <exception>
#include <vector>

namespace vgicp {

/// Execution options shared by the parallel kernels.
/// threads == 0 means the OpenMP default. When deterministic is set,
/// reductions combine per-block partials over a fixed binary tree whose
/// shape depends only on the input size, so results are bit-identical
/// across runs and thread counts.
struct ExecPolicy {
  int threads = 0;
  bool deterministic = false;

  int resolved_threads() const { return threads > 0 ? threads : omp_get_max_threads(); }
};

template <typename F>
void parallel_for(std::size_t n, const ExecPolicy& policy, F&& body) {
  const int nt = policy.resolved_threads();
  std::exception_ptr failure;
#pragma omp parallel for schedule(static) num_threads(nt) shared(failure)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      // Exceptions must not escape the OpenMP region; rethrow the first one
      // after the join.
#pragma omp critical(vgicp_parallel_for_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Reduction over [0, n). make_block(begin, end) accumulates one block
/// serially in index order; combine(a, b) merges two partials.
///
/// Deterministic mode: fixed block size, pairwise tree combination over
/// block index. Otherwise each thread folds its blocks locally and the
/// per-thread partials are merged in thread order (no atomics either way).
template <typename Partial, typename MakeBlock, typename Combine>
Partial parallel_reduce(std::size_t n, const Partial& zero, const ExecPolicy& policy, MakeBlock&& make_block,
                        Combine&& combine) {
  constexpr std::size_t kBlock = 1024;
  if (n == 0) return zero;

  if (!policy.deterministic) {
    const int nt = policy.resolved_threads();
    std::vector<Partial> per_thread(nt, zero);
#pragma omp parallel num_threads(nt)
    {
      const int tid = omp_get_thread_num();
      Partial local = zero;
#pragma omp for schedule(static) nowait
      for (std::int64_t b = 0; b < static_cast<std::int64_t>((n + kBlock - 1) / kBlock); ++b) {
        const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
        const std::size_t end = begin + kBlock < n ? begin + kBlock : n;
        local = combine(local, make_block(begin, end));
      }
      per_thread[tid] = local;
    }
    Partial total = zero;
    for (const Partial& p : per_thread) total = combine(total, p);
    return total;
  }

  const std::size_t num_blocks = (n + kBlock - 1) / kBlock;
  std::vector<Partial> partials(num_blocks, zero);
  parallel_for(num_blocks, policy, [&](std::size_t b) {
    const std::size_t begin = b * kBlock;
    const std::size_t end = begin + kBlock < n ? begin + kBlock : n;
    partials[b] = make_block(begin, end);
  });

  // Pairwise tree over block indices; the combination order is a function
  // of num_blocks only.
  for (std::size_t stride = 1; stride < num_blocks; stride *= 2) {
    const std::size_t pairs = (num_blocks + 2 * stride - 1) / (2 * stride);
    parallel_for(pairs, policy, [&](std::size_t p) {
      const std::size_t left = 2 * stride * p;
      const std::size_t right = left + stride;
      if (right < num_blocks) {
        partials[left] = combine(partials[left], partials[right]);
      }
    });
  }
  return partials[0];
}

/// Compensated (Kahan) accumulator for a fixed-size Eigen type.
template <typename T>
struct KahanSum {
  T sum;
  T compensation;

  KahanSum() {
    sum.setZero();
    compensation.setZero();
  }

  void add(const T& value) {
    const T y = value - compensation;
    const T t = sum + y;
    compensation = (t - sum) - y;
    sum = t;
  }
};

}  // namespace vgicp
