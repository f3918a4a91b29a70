#include "vcprune/parallel.hpp"

#include <omp.h>

#include "vcprune/error.hpp"

namespace vcprune {

void set_num_threads(int n)
{
    if (n > 0) {
        omp_set_num_threads(n);
    }
}

int num_threads()
{
    return omp_get_max_threads();
}

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::missing_file: return "missing_file";
    case ErrorKind::missing_name: return "missing_name";
    case ErrorKind::dtype_mismatch: return "dtype_mismatch";
    case ErrorKind::rank_mismatch: return "rank_mismatch";
    case ErrorKind::malformed_file: return "malformed_file";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::missing_stats: return "missing_stats";
    case ErrorKind::empty_input: return "empty_input";
    }
    return "unknown";
}

} // namespace vcprune
