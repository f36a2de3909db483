#pragma once

#include <string>
#include <vector>

#include "parasq/geometry.hpp"
#include "parasq/measures.hpp"
#include "parasq/torus.hpp"

namespace parasq {

constexpr double kWindowEps = 0.1;

// Smooth step: 0 for u <= 0, 1 for u >= 1, S(u) + S(1-u) = 1.
double smooth_step(double u);
// Even bump, 1 on |x| <= 1/2 - eps, 1/2 at |x| = 1/2, 0 for |x| >= 1/2 + eps.
double window_bump(double x, double eps = kWindowEps);
// Partition-of-unity window of a cap at xi1 (edge caps absorb the missing neighbour).
double cap_window(const Cap& cap, double xi1, double eps = kWindowEps);

struct CapPiece {
    Cap cap;
    std::vector<Mode> modes;
};

// f_tau for every cap at dyadic scale s; the pieces sum to f.
std::vector<CapPiece> cap_decompose(const TorusField& f, double s);

// Sum over the caps of packets whose coefficients are window_bump((xi1 - c) / s) on the band
// lattice, normalised to unit coefficient sum per cap (L^1-normalised bumps).
TorusField packet_field(const GridSpec& g, const std::vector<Cap>& caps, bool sample = false);

// Side of the coarse subgrid used for square functions and envelope cell sums.
int64_t square_grid_size(const GridSpec& g, const std::vector<CapPiece>& pieces);

struct SquareGrid {
    int64_t m = 0;
    double h = 0.0;
    std::vector<double> S;  // sum_tau |f_tau|^2 at the subgrid points
};

SquareGrid square_function(const TorusField& f, double s);
double square_function_norm(const SquareGrid& sq, double p);

// ---- kappa ----

struct EnvelopeStat {
    TileIndex u;
    double HU = 0.0;
    double maxHT = 0.0;
    TileIndex argT;
};

struct CapKappa {
    Cap cap;
    std::vector<EnvelopeStat> envelopes;  // H(U) > 0 only, in flat-index order
};

struct KappaTable {
    GridSpec grid;
    std::vector<double> scales;
    std::vector<std::vector<CapKappa>> caps;  // [scale][cap]
    std::string path;                          // stream, uniform, prefix or exhaustive
};

enum class KappaPath { Auto, Stream, Prefix, Exhaustive };

KappaTable build_kappa_table(const GridMeasure& H, KappaPath path = KappaPath::Auto);

double kappa_value(double HU, double maxHT, double s, int64_t R, double p);

struct KappaWitness {
    double value = 0.0;
    double s = 0.0;
    Cap cap;
    TileIndex u;
    TileIndex t;
};

struct KappaMax {
    double value = 0.0;
    KappaWitness witness;
    std::vector<double> per_scale;
};

KappaMax kappa_max(const KappaTable& table, double p);

// kappa of one envelope, by direct enumeration of its tubes.
double kappa_single(const GridMeasure& H, const Cap& cap, TileIndex u, double p);

// Tile membership by explicit reduction modulo the period lattice.
bool tile_contains(const Locator& loc, TileIndex z, Vec2 x);

// ---- envelope theorem ----

struct EnvelopeData {
    GridSpec grid;
    int64_t m = 0;
    double h = 0.0;
    std::vector<double> S;                                  // square function squared on the subgrid
    std::vector<double> scales;
    std::vector<std::vector<std::vector<double>>> cells;   // [scale][cap][envelope flat] integral of G_tau
};

EnvelopeData compute_envelope_data(const TorusField& f);

// int G_tau w_U for an envelope U.
double weighted_cell_integral(const EnvelopeData& env, size_t scale, const Locator& loc, TileIndex u);

struct EnvTerm {
    double s = 0.0;
    Cap cap;
    TileIndex u;
    double kappa = 0.0;
    double area = 0.0;
    double g_wu = 0.0;
    double term = 0.0;
};

struct RatioReport {
    int64_t R = 0;
    double p = 0.0;
    double lhs = 0.0;       // ||f||_{L^p(H)}
    double lhs_pow = 0.0;   // ||f||^p_{L^p(H)}
    KappaMax kmax;
    double sq_norm = 0.0;   // ||(sum |f_theta|^2)^{1/2}||_p
    double sq_rhs = 0.0;    // (kappa_max + R^{-40}) * sq_norm
    double env_rhs = 0.0;   // sum kappa^p |U|^{1-p/2} (int G w_U)^{p/2}
    double ratio_sq = 0.0;  // lhs / sq_rhs
    double ratio_env = 0.0; // lhs_pow / env_rhs
    std::vector<EnvTerm> terms;
};

// |f|^p summed against H for each p.
std::vector<double> weighted_lp_pows(const TorusField& f, const GridMeasure& H, const std::vector<double>& ps);

RatioReport assemble_ratio(const EnvelopeData& env, const KappaTable& table, double lhs_pow, double p);

RatioReport verify_weighted_sq(const TorusField& f, const GridMeasure& H, double p);

void write_terms_csv(const RatioReport& r, const std::string& path);

}  // namespace parasq
