#pragma once

#include <stdexcept>
#include <string>

namespace critedge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define CRITEDGE_ERROR(Name)                      \
    struct Name : Error {                         \
        explicit Name(const std::string& what)    \
            : Error(std::string(#Name ": ") + what) {} \
    }

// criticality
CRITEDGE_ERROR(ZeroEigenvalue);
CRITEDGE_ERROR(DimensionMismatch);
CRITEDGE_ERROR(DegenerateHessian);
// dyson
CRITEDGE_ERROR(NoConvergence);
CRITEDGE_ERROR(InvalidEta);
CRITEDGE_ERROR(SingularIterate);
// flow
CRITEDGE_ERROR(ConditionViolated);
CRITEDGE_ERROR(SingularJacobian);
CRITEDGE_ERROR(ContractionFailed);
CRITEDGE_ERROR(RadiusExceeded);
CRITEDGE_ERROR(MeshTooCoarse);
CRITEDGE_ERROR(PairingInfeasible);
CRITEDGE_ERROR(DeltaTvExceeded);
CRITEDGE_ERROR(NotReal);
CRITEDGE_ERROR(NoValidConstant);
CRITEDGE_ERROR(SizePreconditionFailed);
CRITEDGE_ERROR(ResidualExceeded);
// spectra
CRITEDGE_ERROR(UnknownModel);
CRITEDGE_ERROR(QuadratureUnstable);

#undef CRITEDGE_ERROR

}  // namespace critedge
