#pragma once

#include <stdexcept>
#include <string>

namespace mimoplace {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Target (or probe point) sits on the array origin; DOA is undefined.
class ZeroRangeError : public Error {
 public:
  ZeroRangeError() : Error("zero range: direction of arrival is undefined at the origin") {}
};

class OutOfCoverageError : public Error {
 public:
  OutOfCoverageError(double range_m, double max_range_m)
      : Error("range " + std::to_string(range_m) + " m exceeds coverage " +
              std::to_string(max_range_m) + " m"),
        range(range_m) {}
  double range;
};

/// Malformed scenario document. `field` names the offending key path.
class ParseError : public Error {
 public:
  ParseError(std::string field_path, const std::string& what, int line_no = -1)
      : Error(compose(field_path, what, line_no)), field(std::move(field_path)), line(line_no) {}
  std::string field;
  int line;

 private:
  static std::string compose(const std::string& f, const std::string& w, int l) {
    std::string out = "parse error";
    if (l >= 0) out += " at line " + std::to_string(l);
    if (!f.empty()) out += " in field '" + f + "'";
    return out + ": " + w;
  }
};

class SchemaError : public Error {
 public:
  SchemaError(std::string field_path, const std::string& what)
      : Error("schema error in '" + field_path + "': " + what), field(std::move(field_path)) {}
  std::string field;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Scenario is well formed but unsuitable for the requested operation.
class InvalidScenario : public Error {
 public:
  using Error::Error;
};

class SingularRestriction : public Error {
 public:
  using Error::Error;
};

class CellGapError : public Error {
 public:
  CellGapError(int c1, int c2)
      : Error("cells " + std::to_string(c1) + " and " + std::to_string(c2) +
              " are not adjacent; their Fisher block is structurally zero") {}
};

/// Placement constraints that no geometry can satisfy (d > e, non-positive bounds).
class InfeasibleBounds : public Error {
 public:
  using Error::Error;
};

/// Interior-point or local solver did not converge.
class SolverError : public Error {
 public:
  SolverError(std::string status_text, const std::string& what)
      : Error(what), status(std::move(status_text)) {}
  std::string status;
};

class RecoveryInfeasible : public Error {
 public:
  RecoveryInfeasible(double violation)
      : Error("geometry recovery could not reach feasibility (max violation " +
              std::to_string(violation) + " m)"),
        max_violation(violation) {}
  double max_violation;
};

class AllRestartsFailed : public Error {
 public:
  using Error::Error;
};

class GridTooCoarse : public Error {
 public:
  using Error::Error;
};

/// Fisher matrix too ill-conditioned to invert. Carries what was seen.
class SingularFim : public Error {
 public:
  SingularFim(double cond, double min_eig, double max_eig, long dim)
      : Error("singular Fisher information (condition " + std::to_string(cond) + ", eigenvalues [" +
              std::to_string(min_eig) + ", " + std::to_string(max_eig) + "], dim " + std::to_string(dim) +
              ")"),
        condition(cond),
        min_eigenvalue(min_eig),
        max_eigenvalue(max_eig),
        dimension(dim) {}
  double condition;
  double min_eigenvalue;
  double max_eigenvalue;
  long dimension;
};

}  // namespace mimoplace
