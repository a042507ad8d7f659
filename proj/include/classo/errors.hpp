#pragma once

#include <stdexcept>
#include <string>

namespace classo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define CLASSO_DEFINE_ERROR(Name, Base)                                        \
    class Name : public Base {                                                 \
    public:                                                                    \
        using Base::Base;                                                      \
        const char* kind() const noexcept override { return #Name; }           \
    };

// problem validation
class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ValidationError"; }
};
CLASSO_DEFINE_ERROR(DimensionMismatch, ValidationError)
CLASSO_DEFINE_ERROR(RankDeficientConstraints, ValidationError)
CLASSO_DEFINE_ERROR(NeedsRidge, ValidationError)
CLASSO_DEFINE_ERROR(InvalidSize, ValidationError)
CLASSO_DEFINE_ERROR(InvalidScenario, ValidationError)
CLASSO_DEFINE_ERROR(MissingVarianceEstimate, ValidationError)

// solver failures
class SolverError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "SolverError"; }
};
CLASSO_DEFINE_ERROR(Infeasible, SolverError)
CLASSO_DEFINE_ERROR(Unbounded, SolverError)
CLASSO_DEFINE_ERROR(MaxIterations, SolverError)
CLASSO_DEFINE_ERROR(SingularSystem, SolverError)
CLASSO_DEFINE_ERROR(InitializationFailed, SolverError)
CLASSO_DEFINE_ERROR(DegenerateProjection, SolverError)
CLASSO_DEFINE_ERROR(ConstraintViolated, SolverError)

// file input and output
CLASSO_DEFINE_ERROR(ParseError, Error)
CLASSO_DEFINE_ERROR(IoError, Error)

#undef CLASSO_DEFINE_ERROR

}  // namespace classo
