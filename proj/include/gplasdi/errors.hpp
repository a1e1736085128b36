// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gplasdi {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GPLASDI_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

GPLASDI_DEFINE_ERROR(InvalidArgument);
GPLASDI_DEFINE_ERROR(DimensionMismatch);
GPLASDI_DEFINE_ERROR(SingularSystem);
GPLASDI_DEFINE_ERROR(NotPositiveDefinite);
GPLASDI_DEFINE_ERROR(CflViolation);
GPLASDI_DEFINE_ERROR(SourceExitsDomain);
GPLASDI_DEFINE_ERROR(DegenerateRange);
GPLASDI_DEFINE_ERROR(DegenerateTrajectory);
GPLASDI_DEFINE_ERROR(DegenerateInputs);
GPLASDI_DEFINE_ERROR(NoCandidates);
GPLASDI_DEFINE_ERROR(FormatError);

#undef GPLASDI_DEFINE_ERROR

/// Training diverged. Carries the epoch and the loss components at failure.
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(long epoch, double ae, double sindy, double reg, double total);

  long epoch;
  double ae;
  double sindy;
  double reg;
  double total;
};

}  // namespace gplasdi
