#pragma once

#include <stdexcept>
#include <string>

namespace gpsh {

/// Base class for every library error; catch this to handle anything thrown here.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define GPSH_DEFINE_ERROR(Name)                                        \
    struct Name : Error {                                              \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

// forms / frames
GPSH_DEFINE_ERROR(RankError);
GPSH_DEFINE_ERROR(DimError);
GPSH_DEFINE_ERROR(FieldEvalError);

// grassmann families
GPSH_DEFINE_ERROR(NoWitness);
GPSH_DEFINE_ERROR(ProbeInvalid);
GPSH_DEFINE_ERROR(BudgetExceeded);

// implicit domains
GPSH_DEFINE_ERROR(EmptyBoundary);
GPSH_DEFINE_ERROR(DegenerateDefiningFunction);
GPSH_DEFINE_ERROR(NotStrictlyConvex);
GPSH_DEFINE_ERROR(LambdaSearchFailed);
GPSH_DEFINE_ERROR(DomainError);
GPSH_DEFINE_ERROR(CompositionRuleViolated);

// charts / surfaces
GPSH_DEFINE_ERROR(MetricSingular);
GPSH_DEFINE_ERROR(FrameError);
GPSH_DEFINE_ERROR(RankAmbiguous);
GPSH_DEFINE_ERROR(SurfaceDegenerate);

// lattice solver
GPSH_DEFINE_ERROR(StencilResolutionError);
GPSH_DEFINE_ERROR(NotConverged);
GPSH_DEFINE_ERROR(PreconditionFailed);
GPSH_DEFINE_ERROR(ConeViolation);

#undef GPSH_DEFINE_ERROR

} // namespace gpsh
