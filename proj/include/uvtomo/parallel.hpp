#pragma once

namespace uvtomo {

// Sets the worker count for OpenMP loops and Eigen kernels. Our own parallel
// loops have one writer per output element; runs are bit-reproducible for a
// fixed thread count.
void set_num_threads(int n);
int num_threads();

}  // namespace uvtomo
