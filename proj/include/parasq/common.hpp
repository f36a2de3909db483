#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace parasq {

using cplx = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// 2x2 matrix [[a, b], [c, d]]
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    double det() const { return a * d - b * c; }
    Mat2 inverse() const {
        double D = det();
        if (D == 0.0) throw std::domain_error("singular matrix");
        return {d / D, -b / D, -c / D, a / D};
    }
    Mat2 transpose() const { return {a, c, b, d}; }
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a frequency is off the torus lattice or outside the band.
class BandError : public Error {
public:
    BandError(const std::string& what, Vec2 xi) : Error(what), xi(xi) {}
    Vec2 xi;
};

inline int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline int64_t pos_mod(int64_t a, int64_t b) {
    int64_t r = a % b;
    return r < 0 ? r + b : r;
}

// Representative of a modulo b in [-b/2, b/2) for even b.
inline int64_t centered_mod(int64_t a, int64_t b) {
    return pos_mod(a + b / 2, b) - b / 2;
}

inline bool is_pow2(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline bool is_pow4(int64_t n) {
    return is_pow2(n) && (__builtin_ctzll(static_cast<unsigned long long>(n)) % 2 == 0);
}

inline int ilog2(int64_t n) { return 63 - __builtin_clzll(static_cast<unsigned long long>(n)); }

inline int64_t next_pow2(int64_t n) {
    int64_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Seeded generator with portable double/int conversions.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int64_t below(int64_t n) { return static_cast<int64_t>(uniform() * static_cast<double>(n)); }
    cplx unit_phase() {
        double t = 2.0 * kPi * uniform();
        return {std::cos(t), std::sin(t)};
    }

private:
    std::mt19937_64 eng_;
};

// Number of worker threads: PARASQ_THREADS if set, otherwise 1.
int thread_count();
// Forces the thread count (n > 0) over PARASQ_THREADS; 0 clears the override.
void set_thread_override(int n);

// Runs fn(i) for i in [0, n) in blocks of thread_count() threads. Results
// must be written to per-index slots so that reductions stay ordered.
template <class Fn>
void parallel_for(int64_t n, Fn&& fn);

}  // namespace parasq

#include "parasq/detail/parallel.hpp"
