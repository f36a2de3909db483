#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "parasq/common.hpp"

namespace parasq {

// Torus [0, L)^2 sampled on an M x M grid; frequencies live on (2 pi / L) Z^2.
struct GridSpec {
    int64_t R = 0;
    double L = 0.0;
    int64_t M = 0;

    static GridSpec make(int64_t R, int64_t l_factor = 4, int64_t m_factor = 8);
    void validate() const;

    double delta() const { return L / static_cast<double>(M); }
    double dxi() const { return 2.0 * kPi / L; }
    // Coordinate of grid index i in the centred fundamental domain [-L/2, L/2).
    double coord(int64_t i) const { return delta() * static_cast<double>(i < M / 2 ? i : i - M); }
    // Grid index of the point nearest to x (mod M).
    int64_t index(double x) const { return pos_mod(static_cast<int64_t>(std::llround(x / delta())), M); }
    bool operator==(const GridSpec& o) const { return R == o.R && L == o.L && M == o.M; }
};

enum class Band { Parabola, Annulus, Free };

const char* band_name(Band b);

struct Mode {
    int64_t n1 = 0;
    int64_t n2 = 0;
    cplx a{0.0, 0.0};
};

class TorusField {
public:
    GridSpec grid;
    Band band = Band::Parabola;
    std::vector<Mode> modes;  // sorted by (n2, n1), unique
    // Fine-grid samples, row-major with row index j along x2: f(Delta*(i, j)).
    std::shared_ptr<const std::vector<cplx>> samples;

    Vec2 freq(const Mode& m) const {
        return {grid.dxi() * static_cast<double>(m.n1), grid.dxi() * static_cast<double>(m.n2)};
    }
    bool has_samples() const { return samples != nullptr; }
    cplx at(int64_t i, int64_t j) const { return (*samples)[static_cast<size_t>(j * grid.M + i)]; }
};

bool in_band(const GridSpec& g, Band band, Vec2 xi);

// All lattice points in the band, with unit amplitude.
std::vector<Mode> band_lattice(const GridSpec& g, Band band);

// Validates the modes (lattice, band, uniqueness) and optionally samples on the fine grid.
TorusField synthesize(const GridSpec& g, Band band, std::vector<Mode> modes, bool sample = true);
// Same, with frequencies given as real vectors; rejects off-lattice frequencies.
TorusField synthesize_frequencies(const GridSpec& g, Band band,
                                  const std::vector<std::pair<Vec2, cplx>>& coeffs, bool sample = true);

// Unit-modulus random phase on every band lattice point.
TorusField random_field(const GridSpec& g, Band band, uint64_t seed, bool sample = true);

TorusField with_samples(const TorusField& f);

// Exact values at the points (L/m)(i, j) of an m x m subgrid, by folding frequencies mod m.
std::vector<cplx> sample_modes(const std::vector<Mode>& modes, int64_t m);

cplx point_eval(const std::vector<Mode>& modes, double L, Vec2 x);
std::vector<cplx> point_eval(const std::vector<Mode>& modes, double L, const std::vector<Vec2>& xs);

// Grid quadrature Delta^2 sum |f|^p, raised to 1/p.
double lp_norm(const TorusField& f, double p);
double lp_norm_pow(const TorusField& f, double p);

// Coefficient-domain oracles: ||f||_2^2 = L^2 sum |a|^2 and the quartic convolution sum.
double parseval_norm2(const TorusField& f);
double quartic_norm4(const TorusField& f);

// Binary layout: header {int64 R, f64 L, int64 M, int64 count}, then per mode
// the f64 pairs (n1, n2) and (re, im), all little-endian.
void write_field_binary(const TorusField& f, const std::string& path);
TorusField read_field_binary(const std::string& path, Band band = Band::Parabola, bool sample = false);

// CSV with header n1,n2,re,im.
void write_spectrum_csv(const TorusField& f, const std::string& path);
std::vector<Mode> read_spectrum_csv(const std::string& path);

}  // namespace parasq
