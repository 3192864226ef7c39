#pragma once

#include <stdexcept>
#include <string>

namespace ssm {

// Broad failure classes; the CLI maps them onto exit codes 1, 2, 3.
enum class ErrorKind { Validation, Numerical, IO };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), kind_(kind), name_(std::move(name)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

#define SSM_DEFINE_ERROR(Name, Kind)                                            \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, #Name, what) {} \
    };

// model
SSM_DEFINE_ERROR(ParseError, Validation)
SSM_DEFINE_ERROR(DimensionError, Validation)
SSM_DEFINE_ERROR(EquilibriumError, Validation)
SSM_DEFINE_ERROR(CommutatorError, Validation)
SSM_DEFINE_ERROR(PreconditionError, Validation)
SSM_DEFINE_ERROR(EpsDivisionError, Numerical)
SSM_DEFINE_ERROR(FileError, IO)

// spectral
SSM_DEFINE_ERROR(NotDiagonalizableError, Validation)
SSM_DEFINE_ERROR(RealEigenvalueError, Validation)
SSM_DEFINE_ERROR(SpectrumError, Validation)
SSM_DEFINE_ERROR(NoSpectralGapError, Validation)
SSM_DEFINE_ERROR(DegenerateModeError, Validation)
SSM_DEFINE_ERROR(SelectionError, Validation)
SSM_DEFINE_ERROR(NotRealError, Numerical)
SSM_DEFINE_ERROR(AssumptionError, Validation)

// expansion
SSM_DEFINE_ERROR(SolvabilityError, Numerical)
SSM_DEFINE_ERROR(NearResonanceError, Numerical)
SSM_DEFINE_ERROR(OrderError, Numerical)

// correction
SSM_DEFINE_ERROR(LeadingOrderError, Numerical)
SSM_DEFINE_ERROR(QuadratureError, Numerical)
SSM_DEFINE_ERROR(RegimeError, Numerical)
SSM_DEFINE_ERROR(SingularCollocationError, Numerical)
SSM_DEFINE_ERROR(NoConvergenceError, Numerical)
SSM_DEFINE_ERROR(DivergenceError, Numerical)

// verify
SSM_DEFINE_ERROR(ProjectionError, Numerical)
SSM_DEFINE_ERROR(MissingConservedError, Validation)

#undef SSM_DEFINE_ERROR

}  // namespace ssm
