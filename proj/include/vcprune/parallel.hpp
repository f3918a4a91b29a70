#pragma once

namespace vcprune {

/// Thread count used by the OpenMP kernels. Results do not depend on it:
/// each column or row is reduced by one thread in a fixed order.
void set_num_threads(int n);
int num_threads();

} // namespace vcprune
