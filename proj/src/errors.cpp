// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/errors.hpp"

#include <sstream>

namespace gplasdi {

namespace {

std::string describe(long epoch, double ae, double sindy, double reg, double total) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite loss at epoch " << epoch << ": L_AE=" << ae << " L_SINDy=" << sindy
     << " reg=" << reg << " total=" << total;
  return os.str();
}

}  // namespace

NonFiniteLoss::NonFiniteLoss(long epoch_, double ae_, double sindy_, double reg_, double total_)
    : Error(describe(epoch_, ae_, sindy_, reg_, total_)),
      epoch(epoch_),
      ae(ae_),
      sindy(sindy_),
      reg(reg_),
      total(total_) {}

}  // namespace gplasdi
