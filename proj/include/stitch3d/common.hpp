#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace stitch3d {

/// A point in R^3. Lengths are dimensionless throughout the library.
struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Point3() = default;
  Point3(double px, double py, double pz) : x(px), y(py), z(pz) {}
  explicit Point3(const Eigen::Vector3d& v) : x(v.x()), y(v.y()), z(v.z()) {}

  Eigen::Vector3d vec() const { return {x, y, z}; }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct DegenerateConfiguration : std::runtime_error {
  explicit DegenerateConfiguration(const std::string& what)
      : std::runtime_error(what) {}
};

struct GraphDisconnected : std::runtime_error {
  explicit GraphDisconnected(const std::string& what)
      : std::runtime_error(what) {}
};

struct NotAStarGraph : std::runtime_error {
  explicit NotAStarGraph(const std::string& what) : std::runtime_error(what) {}
};

struct NoPseudoAnchors : std::runtime_error {
  explicit NoPseudoAnchors(const std::string& what)
      : std::runtime_error(what) {}
};

struct InsufficientAnchors : std::runtime_error {
  explicit InsufficientAnchors(const std::string& what)
      : std::runtime_error(what) {}
};

struct SolverFailure : std::runtime_error {
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Runs fn(i) for i in [0, count), spread over worker threads. Each index
/// writes only its own output slot, so results do not depend on scheduling.
inline void parallel_for(int count, const std::function<void(int)>& fn,
                         int max_threads = 0) {
  if (count <= 0) return;
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (max_threads > 0 && max_threads < hw) hw = max_threads;
  const int workers = std::min(hw, count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace stitch3d
