#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace monofix {

// A point of the continuous domain R^d.
using Point = std::vector<double>;

// Per-coordinate interval indices, 1-based: coordinate i lies in interval
// index[i] of {1..m}.
using GridIndex = std::vector<int>;

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public OracleError {
 public:
  using OracleError::OracleError;
};

class RangeError : public OracleError {
 public:
  using OracleError::OracleError;
};

// What to do with a source value outside [0,1].
enum class RangePolicy { reject, clamp };

namespace detail {

struct OracleState {
  std::atomic<std::uint64_t> queries{0};
  std::atomic<std::uint64_t> clamped{0};
  std::mutex warn_mutex;
  std::vector<std::string> warnings;
  std::atomic<bool> echo_warnings{true};
};

template <class T>
std::string format_input(std::span<const T> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

}  // namespace detail

// Black-box function [domain]^d -> [0,1] with query accounting.
//
// BasicOracle is a cheap handle: copies share the source and the counter, so
// an oracle handed to several evaluators reports the combined query count.
// The counter is atomic; concurrent evaluation never loses counts.
template <class Coord>
class BasicOracle {
 public:
  using Source = std::function<double(std::span<const Coord>)>;

  BasicOracle() = default;
  BasicOracle(std::size_t dimension, Source source,
              RangePolicy policy = RangePolicy::reject)
      : dimension_(dimension),
        source_(std::make_shared<Source>(std::move(source))),
        policy_(policy),
        state_(std::make_shared<detail::OracleState>()) {
    if (dimension_ == 0) throw DimensionError("oracle dimension must be >= 1");
  }

  std::size_t dimension() const { return dimension_; }
  RangePolicy range_policy() const { return policy_; }

  double operator()(std::span<const Coord> x) const {
    if (x.size() != dimension_) {
      throw DimensionError("oracle expects dimension " +
                           std::to_string(dimension_) + ", got " +
                           std::to_string(x.size()));
    }
    state_->queries.fetch_add(1, std::memory_order_relaxed);
    double v = (*source_)(x);
    if (std::isfinite(v) && v >= 0.0 && v <= 1.0) return v;
    if (policy_ == RangePolicy::reject || std::isnan(v)) {
      std::ostringstream os;
      os << "oracle value " << v << " outside [0,1] at "
         << detail::format_input(x);
      throw RangeError(os.str());
    }
    double clamped = v < 0.0 ? 0.0 : 1.0;
    record_warning(v, clamped, x);
    return clamped;
  }

  double evaluate(std::span<const Coord> x) const { return (*this)(x); }
  double evaluate(std::initializer_list<Coord> x) const {
    return (*this)(std::span<const Coord>(x.begin(), x.size()));
  }

  std::uint64_t queries() const {
    return state_->queries.load(std::memory_order_relaxed);
  }
  void reset_queries() const { state_->queries.store(0); }

  std::uint64_t clamp_count() const { return state_->clamped.load(); }
  std::vector<std::string> warnings() const {
    std::lock_guard lock(state_->warn_mutex);
    return state_->warnings;
  }
  // Clamp warnings go to stderr unless silenced; they are always recorded.
  void set_echo_warnings(bool echo) const { state_->echo_warnings = echo; }

  explicit operator bool() const { return static_cast<bool>(source_); }

 private:
  void record_warning(double raw, double clamped,
                      std::span<const Coord> x) const {
    state_->clamped.fetch_add(1);
    std::ostringstream os;
    os << "clamped oracle value " << raw << " to " << clamped << " at "
       << detail::format_input(x);
    std::lock_guard lock(state_->warn_mutex);
    // Bounded log; the counter keeps the exact total.
    if (state_->warnings.size() < 1000) state_->warnings.push_back(os.str());
    if (state_->echo_warnings) std::cerr << "warning: " << os.str() << '\n';
  }

  std::size_t dimension_ = 0;
  std::shared_ptr<Source> source_;
  RangePolicy policy_ = RangePolicy::reject;
  std::shared_ptr<detail::OracleState> state_;
};

// Oracle over points of R^d.
using QueryOracle = BasicOracle<double>;

// Oracle over grid indices (1-based per coordinate).
using GridOracle = BasicOracle<int>;

inline QueryOracle make_constant_oracle(std::size_t dimension, double value) {
  return QueryOracle(dimension, [value](std::span<const double>) { return value; });
}

}  // namespace monofix
