#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace mirrorest {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside its physical domain (negative mass, r_m > r_p, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A quantity with a pole at the requested point, e.g. g_qp at omega = 0.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver (Riccati, self-consistent tracking error) failed to settle.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Quadrature whose estimated tail beyond omega_max is too large.
class TailDominanceError : public Error {
 public:
  using Error::Error;
};

/// Sampling grid of a signal does not match the grid a filter was built on.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or data file.
class ParseError : public Error {
 public:
  using Error::Error;
};

namespace log {

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}
inline WarningHandler& handler() {
  static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}
}  // namespace detail

/// Replaces the warning sink; returns the previous one. Default prints to stderr.
inline WarningHandler set_warning_handler(WarningHandler h) {
  std::lock_guard lock(detail::handler_mutex());
  return std::exchange(detail::handler(), std::move(h));
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::handler_mutex());
  if (detail::handler()) detail::handler()(msg);
}

}  // namespace log

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace mirrorest
