#pragma once

#include <stdexcept>
#include <string>

namespace mst {

// Base for all library errors. Subclasses distinguish bad input from
// numerical failure so callers (and the CLI exit-code map) can tell them
// apart without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent input data / configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

// Numerical failure at runtime (divergent chain, failed quadrature, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

class DuplicateSiteId : public InputError {
 public:
  explicit DuplicateSiteId(const std::string& id)
      : InputError("duplicate site id: " + id) {}
};

class NonPositiveVariance : public InputError {
 public:
  explicit NonPositiveVariance(const std::string& id)
      : InputError("non-positive sampling variance at site: " + id) {}
};

class TooFewSites : public InputError {
 public:
  explicit TooFewSites(std::size_t j)
      : InputError("dataset needs at least 2 sites, got " +
                   std::to_string(j)) {}
};

class AllSitesExcluded : public InputError {
 public:
  AllSitesExcluded() : InputError("every site failed the cell-count rule") {}
};

class LengthMismatch : public InputError {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : InputError("vector lengths differ: " + std::to_string(a) + " vs " +
                   std::to_string(b)) {}
};

class UnknownShape : public InputError {
 public:
  explicit UnknownShape(const std::string& s)
      : InputError("unknown cross-site distribution shape: " + s) {}
};

class ChainDiverged : public NumericError {
 public:
  explicit ChainDiverged(std::size_t iteration)
      : NumericError("MCMC state became non-finite at iteration " +
                     std::to_string(iteration)),
        iteration(iteration) {}
  std::size_t iteration;
};

class QuadratureFailure : public NumericError {
 public:
  explicit QuadratureFailure(const std::string& msg) : NumericError(msg) {}
};

class InfiniteDivergence : public NumericError {
 public:
  InfiniteDivergence()
      : NumericError("KL divergence is infinite: target has mass where the "
                     "induced pmf has none") {}
};

class DegenerateVariance : public NumericError {
 public:
  DegenerateVariance()
      : NumericError("finite-population variance of posterior means is zero") {
  }
};

class RankDeficient : public InputError {
 public:
  explicit RankDeficient(const std::string& msg) : InputError(msg) {}
};

class SingularSandwich : public NumericError {
 public:
  SingularSandwich() : NumericError("cluster-robust sandwich is singular") {}
};

class UnknownLevel : public InputError {
 public:
  explicit UnknownLevel(const std::string& what)
      : InputError("factor level not seen in training design: " + what) {}
};

class UnknownKind : public InputError {
 public:
  explicit UnknownKind(const std::string& k)
      : InputError("unknown plot-data kind: " + k) {}
};

}  // namespace mst
