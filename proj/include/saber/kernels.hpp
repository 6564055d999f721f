#pragma once

#include <cstddef>

// Low-level arithmetic kernels used by the filtering, power and regression
// inner loops. Every kernel has a scalar reference implementation plus,
// where the target supports it, a SIMD variant (AVX2 on x86-64, NEON on
// aarch64). The dispatched entry points below pick the widest variant the
// running CPU supports; set SABER_KERNELS=scalar in the environment to
// force the reference path.
//
// SIMD variants may reorder reductions and contract multiply-adds, so
// results can differ from the scalar path in the last few ulps. On a given
// machine the selected variant is fixed, so repeated runs are bit-identical.

namespace saber::kernels {

#define SABER_KERNEL_PROTOS                                                  \
  double dot(const double* a, const double* b, std::size_t n);              \
  double sum(const double* x, std::size_t n);                               \
  double sumsq(const double* x, std::size_t n);                             \
  double max_abs(const double* x, std::size_t n);                           \
  void axpy(double a, const double* x, double* y, std::size_t n);           \
  void scale(double* x, double a, std::size_t n);                           \
  void add_scalar(double* x, double a, std::size_t n);                      \
  void sub(const double* a, const double* b, double* out, std::size_t n);   \
  /* z: n interleaved complex values (2n doubles); out[i] = re^2 + im^2 */  \
  void mag_sq(const double* z, double* out, std::size_t n);

namespace scalar {
SABER_KERNEL_PROTOS
}

#if defined(SABER_HAVE_AVX2)
namespace avx2 {
SABER_KERNEL_PROTOS
}
#endif

#if defined(SABER_HAVE_NEON)
namespace neon {
SABER_KERNEL_PROTOS
}
#endif

// Dispatched entry points.
SABER_KERNEL_PROTOS

#undef SABER_KERNEL_PROTOS

// Name of the variant the dispatcher selected ("scalar", "avx2", "neon").
const char* active_backend();

}  // namespace saber::kernels
