#pragma once

#include <string>
#include <vector>

#include "parasq/envelope.hpp"
#include "parasq/geometry.hpp"
#include "parasq/measures.hpp"
#include "parasq/torus.hpp"

namespace parasq {

// ---- two-term split of a finite sum ----

struct BGSplit {
    double lhs = 0.0;       // (sum a_i)^p
    double max_term = 0.0;  // max a_i^p
    double bilinear = 0.0;  // (#I)^p max_{i, j not in I_i} (a_i a_j)^{p/2}
    double C1 = 1.0;        // max |I_i|
    double C = 1.0;         // 2^{p-1} max(C1^p, 1)
    double bound = 0.0;     // C (max_term + bilinear)
    bool holds = false;
};

// Neighbourhoods I_i are index lists; each must contain i.
BGSplit bg_split(const std::vector<double>& a, const std::vector<std::vector<size_t>>& I, double p);

// ---- pointwise broad-narrow split ----

struct BroadNarrowPoint {
    Vec2 x;
    double lhs = 0.0;       // |f(x)|^p
    double narrow = 0.0;    // sum_theta |f_theta(x)|^p
    double bilinear = 0.0;  // sum over levels, parents and separated child pairs of |f_t1 f_t2|^{p/2}
    double tight = 0.0;     // level-by-level bound 2^{p-1}(C^m narrow + sum_j C^j K^p bil_j)
    double bound = 0.0;     // 2^{p-1} C^m (narrow + K^p bilinear)
};

struct BroadNarrowReport {
    int64_t R = 0;
    int64_t K = 0;
    int m = 0;
    int64_t threshold = 1;  // children i, j are separated when |i - j| > threshold
    double p = 0.0;
    double C1 = 0.0;
    double C = 0.0;          // per-level constant from bg_split
    double prefactor = 0.0;  // 2^{p-1} C^m
    double mismatch = 1.0;   // K^m / R^{1/2}
    int64_t violations = 0;
    double max_ratio = 0.0;    // max lhs / bound
    double empirical_C = 0.0;  // smallest C' with lhs <= C'^m (narrow + K^p bilinear) at every point
    std::vector<BroadNarrowPoint> points;
};

BroadNarrowReport broad_narrow(const TorusField& f, const std::vector<Vec2>& points, double p, int64_t K,
                               int64_t threshold = 1);

// Random grid points of the torus (seeded).
std::vector<Vec2> random_points(const GridSpec& g, int64_t n, uint64_t seed);

// ---- parabolic rescaling ----

// Trigonometric polynomial with real frequencies (not tied to a square torus).
struct FreeField {
    std::vector<std::pair<Vec2, cplx>> terms;
    cplx eval(Vec2 x) const;
};

struct Rescaled {
    Cap cap;
    int64_t Rs = 0;             // R s^2
    double density_factor = 0;  // s^3: spectral density factor of the pullback
    double band_defect = 0.0;   // max |eta2 - eta1^2| * Rs, <= 1 inside the band
    FreeField g;                // g(x) = e^{-i x.(c/s, -c^2/s^2)} f(L_tau x)
};

// Pulls the spectrum back by A_tau^{-1}; rejects modes with |xi1 - c| > s.
Rescaled parabolic_rescale(const TorusField& f, const Cap& cap);

// ---- bilinear constants ----

struct BilinearPair {
    int64_t Rs = 0;
    int64_t K = 0;
    Cap tau1, tau2;
    double separation = 0.0;
    TorusField g1, g2;
};

// Unit-modulus random coefficients on two caps of width 1/K at distance >= 1/K.
BilinearPair random_pair(int64_t Rs, int64_t K, uint64_t seed);
BilinearPair make_pair(const TorusField& g1, const Cap& tau1, const TorusField& g2, const Cap& tau2, int64_t K);

struct BilinearResult {
    double B_area = 0.0;
    double I_B = 0.0;       // int_B |g1 g2|^2
    double I_BY = 0.0;      // int_{B cap Y} |g1 g2|^2
    double rho_Y = 0.0;     // max over unit cubes q in B of |q cap Y| / |q|
    double N1 = 0.0;        // ||g1||^2_{L^2(w_B)}
    double N2 = 0.0;
    double C_bil = 0.0;     // int_B |g1 g2|^2 |B| / (N1 N2)
    double C_J = 0.0;       // int |g1 g2|^2 (phi * 1_B) |B| / (N1 N2)
    double Lambda = 0.0;    // max_q (max_q F / min_q F*phi), F = |g1 g2|^2
    double C_Y = 0.0;       // I_BY |B| / (rho_Y N1 N2)
    double chain = 0.0;     // rho_Y Lambda C_J |B|^{-1} N1 N2
    bool l4_holds = false;  // I_BY <= chain
    double orth1 = 0.0;     // ||g_tau1||^2_{L^2(w_B)} / ||(sum_theta |g_theta|^2)^{1/2}||^2_{L^2(w_B)}
    double orth2 = 0.0;
    Vec2 witness;           // point of max |g1 g2|
};

// B is the side-Rs square centred at the origin; Y is given by the support of a grid measure.
BilinearResult bilinear_check(const BilinearPair& pair, const GridMeasure& Y, bool orthogonality = false);

// Constant-tracking rows: R, K, s, pair id, measured constant, witness point.
struct ConstantRow {
    int64_t R = 0;
    int64_t K = 0;
    double s = 0.0;
    std::string pair_id;
    double constant = 0.0;
    Vec2 witness;
};

void write_constants_csv(const std::vector<ConstantRow>& rows, const std::string& path);

}  // namespace parasq
