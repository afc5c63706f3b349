#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace hca {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;
using Complex = std::complex<double>;

inline constexpr const char* kVersion = "0.1.0";

enum class ErrorCode {
  InvalidInput = 1,
  NotFound,
  MalformedConfiguration,
  NotReversible,
  InnerNotReversible,
  SymbolBudgetExceeded,
  TruncatedOrbit,
  DimensionGuard,
  PromiseViolated,
  NoValidCodeword,
  ParamsViolation,
  OraclePromiseViolated,
  InvalidThresholds,
  PrecisionViolation,
  ToleranceViolation,
  GapViolation,
  DegenerateObservable,
  OverlapViolation,
  Internal,
};

const char* error_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode c, const std::string& msg) : std::runtime_error(msg), code_(c) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& msg) { throw Error(c, msg); }

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace hca
