#pragma once

#include "svl/kernels.hpp"

namespace svl::kernels {

// Defined in avx2.cpp when built with SVL_HAVE_AVX2; returns the table
// unconditionally (the caller checks CPU support).
const KernelTable& avx2_table_unchecked();

}  // namespace svl::kernels
