#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

// Every translation unit sees exactly one floating-point width. The library is
// normally built with float; a double build (PLLS_REAL_DOUBLE) lives in its own
// inline namespace so both can be linked into one binary for gradient checks.
#ifdef PLLS_REAL_DOUBLE
#define PLLS_ABI f64
#else
#define PLLS_ABI f32
#endif

namespace plls::inline PLLS_ABI {

#ifdef PLLS_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

/// Shapes that do not compose (matmul inner dims, conv windows, layer chains).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Values outside an operation's mathematical domain (log of x <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke a precondition: non-scalar loss, non-finite action, etc.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace plls::inline PLLS_ABI
