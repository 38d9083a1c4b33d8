#pragma once

#include <stdexcept>
#include <string>

namespace beliefmdp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A function handed to integrate() produced a non-finite value.
struct EvaluationError : Error { using Error::Error; };

// Malformed or shape-inconsistent input (files, arrays).
struct SchemaError : Error { using Error::Error; };

// Argument outside its admissible range.
struct DomainError : Error { using Error::Error; };

// Conditioning on an observation of probability zero.
struct UnobservableEvidence : Error { using Error::Error; };

// A posterior is not representable in the configured belief set, or a
// discretization grid fails to cover the effective support.
struct CoverageError : Error { using Error::Error; };

// Reachable-tree expansion exceeded the configured node budget.
struct BudgetExceeded : Error { using Error::Error; };

// The requested operation needs Assumption (D) or (P) and the model
// violates it (for example infinite-horizon discounting with alpha = 1).
struct AssumptionViolation : Error { using Error::Error; };

// Linear-algebra failure (singular innovation covariance and friends).
struct NumericalError : Error { using Error::Error; };

// A policy emitted an out-of-range or non-finite action while simulating.
struct PolicyError : Error { using Error::Error; };

}  // namespace beliefmdp
