#pragma once

#include <stdexcept>
#include <string>

namespace cnc {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define CNC_DEFINE_ERROR(name)                \
  struct name : Error {                       \
    using Error::Error;                       \
    name() : Error(#name) {}                  \
  }

CNC_DEFINE_ERROR(DimensionMismatch);
CNC_DEFINE_ERROR(IndexOutOfRange);
CNC_DEFINE_ERROR(InvalidCount);
CNC_DEFINE_ERROR(EmptyDataset);
CNC_DEFINE_ERROR(AllPointsDegenerate);
CNC_DEFINE_ERROR(NotSymmetric);
CNC_DEFINE_ERROR(NotConverged);
CNC_DEFINE_ERROR(NonFiniteResult);
CNC_DEFINE_ERROR(InvalidEps);
CNC_DEFINE_ERROR(StepOrderViolation);
CNC_DEFINE_ERROR(NonFiniteIterate);
CNC_DEFINE_ERROR(EmptyCandidateSet);
CNC_DEFINE_ERROR(InvalidBeta);
CNC_DEFINE_ERROR(RegularizerPresent);
CNC_DEFINE_ERROR(NoNegativeCurvature);
CNC_DEFINE_ERROR(InsufficientSeeds);
CNC_DEFINE_ERROR(MissingSnapshots);
CNC_DEFINE_ERROR(DegenerateInput);
CNC_DEFINE_ERROR(NoSaddleFound);
CNC_DEFINE_ERROR(ParseError);
CNC_DEFINE_ERROR(ValidationError);

#undef CNC_DEFINE_ERROR

}  // namespace cnc
