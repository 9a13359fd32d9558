#pragma once

// Shared aliases, error handling and small numeric utilities.

#include <Eigen/Dense>

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mmesh {

template <int D> using Vec = Eigen::Matrix<double, D, 1>;
template <int D> using Mat = Eigen::Matrix<double, D, D>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Library-wide exception type.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
[[noreturn]] inline void fail(const char* cond, const std::string& msg) {
  std::ostringstream os;
  os << "mmesh: " << msg << " (violated: " << cond << ")";
  throw Error(os.str());
}
}  // namespace detail

#define MMESH_REQUIRE(cond, msg)                        \
  do {                                                  \
    if (!(cond)) ::mmesh::detail::fail(#cond, (msg));   \
  } while (0)

constexpr double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Pairwise summation over a fixed-order range. Deterministic for a given
/// input order and more accurate than naive left-to-right accumulation.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) {
  return pairwise_sum(x.data(), x.size());
}

namespace runtime {

inline int& thread_count_ref() {
  static int n = [] {
    if (const char* env = std::getenv("MMESH_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
  }();
  return n;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = n > 0 ? n : 1; }

}  // namespace runtime

/// Parallel loop over [0, n). The callable must only write to disjoint,
/// index-owned slots; reductions stay with the caller in a fixed order, so
/// results are independent of the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int nt = runtime::thread_count();
  if (nt <= 1 || n < 256) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace mmesh
