#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pfm {

using Index = std::int64_t;
using Vec3 = Eigen::Vector3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Base class of all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input, missing files, bad arguments. Maps to exit code 2.
class InputError : public Error {
public:
  using Error::Error;
};

/// Failure of a numerical procedure (non-convergence, violated hypothesis). Maps to exit code 1.
class NumericalError : public Error {
public:
  using Error::Error;
};

namespace log {

using Sink = std::function<void(const std::string&)>;

inline Sink& sink() {
  static Sink s = [](const std::string& msg) { std::clog << "[pfm] " << msg << '\n'; };
  return s;
}

inline bool& verbose() {
  static bool v = false;
  return v;
}

inline void warn(const std::string& msg) { sink()("warning: " + msg); }

inline void info(const std::string& msg) {
  if (verbose()) sink()(msg);
}

} // namespace log

/// Worker count for parallel loops: PFM_THREADS if set, otherwise the
/// hardware concurrency. Overridable at runtime.
inline int& thread_count() {
  static int n = [] {
    if (const char* env = std::getenv("PFM_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }();
  return n;
}

/// Runs body(i) for i in [0, n) on up to thread_count() threads using a
/// static contiguous partition. Iterations must be independent.
template <class Body>
void parallel_for(Index n, Body&& body) {
  const Index workers = std::min<Index>(std::max(1, thread_count()), n);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = n * w / workers; i < n * (w + 1) / workers; ++i) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace pfm
