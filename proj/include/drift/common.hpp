#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "absl/time/civil_time.h"

namespace drift {

/// Single exception type for every recoverable failure in the library.
/// `stage` is filled in by the pipeline when it re-throws; library code
/// leaves it empty.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string stage = {})
      : std::runtime_error(what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Calendar day in the analysis timezone.
using Date = absl::CivilDay;

/// Daily series aligned to an index; NaN marks a missing entry.
using Series = std::vector<double>;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

inline std::string format_date(Date d) { return absl::FormatCivilTime(d); }

inline Date parse_date(std::string_view text) {
  Date d;
  if (text.size() != 10 || !absl::ParseCivilTime(absl::string_view(text.data(), text.size()), &d)) {
    throw Error("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  return d;
}

/// Neumaier-compensated running sum. Used wherever results must not depend
/// on summation order beyond the last few ulps.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Mean and sample (n-1) standard deviation over the non-missing entries.
struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
};

inline Moments sample_moments(std::span<const double> xs) {
  CompensatedSum s;
  Moments m;
  for (double x : xs) {
    if (!is_missing(x)) {
      s.add(x);
      ++m.count;
    }
  }
  if (m.count == 0) return m;
  m.mean = s.value() / static_cast<double>(m.count);
  if (m.count < 2) return m;
  CompensatedSum ss;
  for (double x : xs) {
    if (!is_missing(x)) ss.add((x - m.mean) * (x - m.mean));
  }
  m.sd = std::sqrt(ss.value() / static_cast<double>(m.count - 1));
  return m;
}

/// Linear-interpolated quantile (type 7) of an already sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return kMissing;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Runs `body(i)` for i in [0, count) on up to `threads` workers using
/// contiguous chunks. Each index is visited exactly once, so results written
/// to slot i are independent of the thread count.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(count, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace drift
