#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fibrelin {

// Two error families, matching the CLI exit-code convention:
// InputError -> exit 2, NumericalError -> exit 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual std::string type() const { return "error"; }
};

struct InputError : Error {
    using Error::Error;
    std::string type() const override { return "input"; }
};

struct NumericalError : Error {
    using Error::Error;
    std::string type() const override { return "numerical"; }
};

struct ParseError : InputError {
    int line;  // 1-based, -1 when unknown
    int col;   // 1-based, -1 when unknown
    ParseError(const std::string& msg, int line_ = -1, int col_ = -1)
        : InputError(msg), line(line_), col(col_) {}
    std::string type() const override { return "parse"; }
};

struct UndeclaredSymbolError : ParseError {
    std::string symbol;
    UndeclaredSymbolError(const std::string& sym, int line_ = -1, int col_ = -1)
        : ParseError("undeclared identifier '" + sym + "'", line_, col_), symbol(sym) {}
    std::string type() const override { return "undeclared_symbol"; }
};

struct DimensionError : InputError {
    using InputError::InputError;
    std::string type() const override { return "dimension"; }
};

struct PreconditionError : InputError {
    using InputError::InputError;
    std::string type() const override { return "precondition"; }
};

struct UnboundSymbolError : InputError {
    std::string symbol;
    explicit UnboundSymbolError(const std::string& sym)
        : InputError("no binding for symbol '" + sym + "'"), symbol(sym) {}
    std::string type() const override { return "unbound_symbol"; }
};

struct EvalDomainError : NumericalError {
    std::string subexpression;
    EvalDomainError(const std::string& what_, std::string subexpr)
        : NumericalError(what_ + " in '" + subexpr + "'"), subexpression(std::move(subexpr)) {}
    std::string type() const override { return "eval_domain"; }
};

struct ZeroTestError : NumericalError {
    using NumericalError::NumericalError;
    std::string type() const override { return "zero_test"; }
};

struct NoRelativeDegreeError : NumericalError {
    using NumericalError::NumericalError;
    std::string type() const override { return "no_relative_degree"; }
};

struct DegenerateRelativeDegreeError : NumericalError {
    using NumericalError::NumericalError;
    std::string type() const override { return "degenerate_relative_degree"; }
};

struct RankDeficientError : NumericalError {
    using NumericalError::NumericalError;
    std::string type() const override { return "rank_deficient"; }
};

struct CompletionFailedError : NumericalError {
    using NumericalError::NumericalError;
    std::string type() const override { return "completion_failed"; }
};

struct SingularJacobianError : NumericalError {
    double det;
    std::vector<double> at;
    SingularJacobianError(const std::string& msg, double det_, std::vector<double> at_)
        : NumericalError(msg), det(det_), at(std::move(at_)) {}
    std::string type() const override { return "singular_jacobian"; }
};

struct NonFiniteError : NumericalError {
    double time;
    NonFiniteError(const std::string& msg, double t)
        : NumericalError(msg), time(t) {}
    std::string type() const override { return "non_finite"; }
};

struct ConstraintNotExplicitError : NumericalError {
    using NumericalError::NumericalError;
    std::string type() const override { return "constraint_not_explicit"; }
};

struct FibreSamplingError : NumericalError {
    using NumericalError::NumericalError;
    std::string type() const override { return "fibre_sampling"; }
};

}  // namespace fibrelin
