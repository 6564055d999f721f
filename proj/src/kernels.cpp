#include "saber/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace saber::kernels {

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  double (*max_abs)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double*, double, std::size_t);
  void (*add_scalar)(double*, double, std::size_t);
  void (*sub)(const double*, const double*, double*, std::size_t);
  void (*mag_sq)(const double*, double*, std::size_t);
  const char* name;
};

constexpr Table kScalar = {
    scalar::dot,   scalar::sum,        scalar::sumsq, scalar::max_abs,
    scalar::axpy,  scalar::scale,      scalar::add_scalar,
    scalar::sub,   scalar::mag_sq,     "scalar"};

#if defined(SABER_HAVE_AVX2)
constexpr Table kAvx2 = {
    avx2::dot,   avx2::sum,        avx2::sumsq, avx2::max_abs,
    avx2::axpy,  avx2::scale,      avx2::add_scalar,
    avx2::sub,   avx2::mag_sq,     "avx2"};
#endif

#if defined(SABER_HAVE_NEON)
constexpr Table kNeon = {
    neon::dot,   neon::sum,        neon::sumsq, neon::max_abs,
    neon::axpy,  neon::scale,      neon::add_scalar,
    neon::sub,   neon::mag_sq,     "neon"};
#endif

Table select() {
  const char* force = std::getenv("SABER_KERNELS");
  if (force != nullptr && std::strcmp(force, "scalar") == 0) return kScalar;
#if defined(SABER_HAVE_AVX2)
  if (force != nullptr && std::strcmp(force, "avx2") == 0) return kAvx2;
  if (force == nullptr && __builtin_cpu_supports("avx2")) return kAvx2;
#endif
#if defined(SABER_HAVE_NEON)
  // NEON is architecturally guaranteed on aarch64.
  if (force == nullptr || std::strcmp(force, "neon") == 0) return kNeon;
#endif
  return kScalar;
}

const Table& table() {
  static const Table t = select();
  return t;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }
double sum(const double* x, std::size_t n) { return table().sum(x, n); }
double sumsq(const double* x, std::size_t n) { return table().sumsq(x, n); }
double max_abs(const double* x, std::size_t n) { return table().max_abs(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
void scale(double* x, double a, std::size_t n) { table().scale(x, a, n); }
void add_scalar(double* x, double a, std::size_t n) { table().add_scalar(x, a, n); }
void sub(const double* a, const double* b, double* out, std::size_t n) { table().sub(a, b, out, n); }
void mag_sq(const double* z, double* out, std::size_t n) { table().mag_sq(z, out, n); }

const char* active_backend() { return table().name; }

}  // namespace saber::kernels
