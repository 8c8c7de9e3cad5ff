#pragma once

#include <stdexcept>

namespace degpd {

/// Formula/data wiring problems: unknown columns, too few distinct covariate
/// values, malformed formulas.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with the data content itself (non-finite covariates, non-integer
/// responses).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace degpd
