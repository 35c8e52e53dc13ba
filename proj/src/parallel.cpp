#include "uvtomo/parallel.hpp"

#include <Eigen/Core>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "uvtomo/error.hpp"

namespace uvtomo {

void set_num_threads(int n) {
    if (n <= 0) throw InvalidArgument("thread count must be positive");
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
    Eigen::setNbThreads(n);
}

int num_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace uvtomo
