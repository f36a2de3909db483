#pragma once

#include <string>
#include <vector>

#include "parasq/common.hpp"
#include "parasq/measures.hpp"
#include "parasq/torus.hpp"

namespace parasq {

// eta(t) = (sin(t/2) / (t/2))^2: Fourier support [-1, 1], eta(0) = 1, eta ~ 1 on [-1, 1].
double eta(double t);

// Periodic line [-L/2, L/2) sampled at M points; frequencies (2 pi / L) Z.
struct Line {
    int64_t R = 0;
    double L = 0.0;
    int64_t M = 0;

    static Line make(int64_t R, int64_t l_factor = 8, int64_t m_factor = 16);
    double delta() const { return L / static_cast<double>(M); }
    double dxi() const { return 2.0 * kPi / L; }
    double coord(int64_t i) const { return delta() * static_cast<double>(i < M / 2 ? i : i - M); }
};

struct LineMode {
    int64_t n = 0;
    cplx a{0.0, 0.0};
};

// Initial datum with spectrum on the [-1, 1] part of the line lattice.
struct Spectrum1D {
    Line line;
    std::vector<LineMode> modes;  // sorted by n, unique
};

Spectrum1D make_spectrum(const Line& line, std::vector<LineMode> modes);
// Samples a profile xi -> a(xi) at every lattice frequency in [-1, 1] (zeros dropped).
template <class F>
Spectrum1D sample_spectrum(const Line& line, F&& profile) {
    std::vector<LineMode> modes;
    auto nmax = static_cast<int64_t>(std::floor(1.0 / line.dxi()));
    for (int64_t n = -nmax; n <= nmax; ++n) {
        cplx a = profile(line.dxi() * static_cast<double>(n));
        if (a != cplx(0.0, 0.0)) modes.push_back({n, a});
    }
    return make_spectrum(line, std::move(modes));
}

struct Propagation {
    Spectrum1D spec;
    double R = 0.0;  // time scale of the cutoff eta(t / R)
    bool cutoff = true;
    std::vector<double> ts;
    std::vector<std::vector<cplx>> slices;  // slices[k][i] at (line.coord(i), ts[k])
};

// U_R f(x, t) = eta(t / R) sum a e^{i(x xi + t xi^2)} on the line grid, one inverse FFT per slice.
Propagation propagate(const Spectrum1D& f, double R, const std::vector<double>& ts, bool cutoff = true);
// Direct summation at one space-time point.
cplx evaluate_U(const Spectrum1D& f, double R, double x, double t, bool cutoff = true);
// Delta * sum |u|^p over one slice, and the line L^p norm of the initial datum.
double slice_lp_pow(const std::vector<cplx>& slice, const Line& line, double p);
double line_lp_norm(const Spectrum1D& f, double p);

// ---- circle multiplier ----

// psi(u) = window_bump(0.6 u): psi(0) = 1, supported in [-1, 1].
double sr_psi(double u);
// S_R f: multiplies each annulus coefficient by psi(R (1 - |xi|)); the spectrum must lie in the
// lower sector |xi1| <= -xi2 of the annulus.
TorusField apply_SR(const TorusField& f);

// ---- Nikodym maximal function ----

// Values on x in [-1, 1) (nx cells of width hx, periodic) times nt rows t_k = -1 + (k + 1/2) 2 / nt.
struct SpaceTimeGrid {
    int64_t nx = 0;
    int64_t nt = 0;
    std::vector<double> vals;  // row-major [t][x]
    double hx() const { return 2.0 / static_cast<double>(nx); }
    double ht() const { return 2.0 / static_cast<double>(nt); }
    double x(int64_t i) const { return -1.0 + (static_cast<double>(i) + 0.5) * hx(); }
    double t(int64_t k) const { return -1.0 + (static_cast<double>(k) + 0.5) * ht(); }
};

struct NikodymResult {
    int64_t R = 0;
    std::vector<double> y;       // cell edges -1 + i hx, so tubes of width 2/R align with cells
    std::vector<double> N;
    std::vector<double> best_w;  // maximising direction
};

// sup over w in R^{-1} Z cap [-1, 1] of the average of |g| over T_w + (y, 0),
// T_w = {|x + 2 t w| <= 1/R, |t| <= 1}; g is piecewise constant on cells.
NikodymResult nikodym_max(const SpaceTimeGrid& g, int64_t R);
double grid_lq_norm(const SpaceTimeGrid& g, double q);
double line_lq_norm(const std::vector<double>& v, double h, double q);

// ---- space-time measures ----

struct PointMeasure {
    std::vector<Vec2> pts;  // (x, t)
    std::vector<double> mass;
    std::string family;
    double total() const;
};

// mu_R(E) = mu({(x, t): (R x, R^2 t) in E}).
PointMeasure rescale_measure(const PointMeasure& mu, double R);

// Families on the anisotropic grid (1/R) Z x (1/R^2) Z: point, x_segment, t_segment, parabolic_box, square.
PointMeasure lemma_family(const std::string& name, int64_t R);
std::vector<std::string> lemma_family_names();

struct LemmaCheck {
    std::string family;
    std::string bound;     // par_high, par_low, alpha_high, alpha_low
    double param = 0.0;    // beta or alpha
    double target = 0.0;   // exponent of mu_R's certificate
    double exponent = 0.0; // predicted power of R
    double mu_cert = 0.0;  // [mu]_{beta,par} or [mu]_alpha, radii >= 1/R (1/R^2 for alpha_high)
    double muR_cert = 0.0; // <mu_R>_target, radii >= 1
    double ratio = 0.0;    // muR_cert / (mu_cert R^exponent)
    bool pass = false;     // ratio <= 8
    // brute-force confirmation (when requested)
    bool brute = false;
    double mu_brute = 0.0;
    double muR_brute = 0.0;
    bool brute_consistent = false;  // computed <= brute <= 4^param computed for both certificates
    bool brute_pass = false;        // muR_brute <= 8 mu_brute R^exponent
};

std::vector<LemmaCheck> measure_lemma(const std::string& family, int64_t R, bool brute);

// ---- exponent fits ----

struct ExponentFit {
    std::string name;
    std::string relation;  // "eq": |slope - predicted| <= tol, "le": slope <= predicted + tol, "ge": slope >= predicted - tol
    std::vector<double> R;
    std::vector<double> values;
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms residual of the log-log fit
    double predicted = 0.0;
    double tolerance = 0.1;
    double sufficiency = 0.0;  // upper exponent implied by the sufficiency results, when relevant
    bool pass = false;
};

ExponentFit fit_exponent(const std::string& name, const std::vector<double>& R, const std::vector<double>& values,
                         double predicted, double tol = 0.1, const std::string& relation = "eq");

// ---- lower-bound families ----

struct FlsPoint {
    int64_t R = 0;
    double numerator = 0.0;
    double denominator = 0.0;
    double ratio = 0.0;
    double band_lo = 0.0;  // slab family: range of R^{1/2} |U_R g| on G
    double band_hi = 0.0;
};

// Chirp: f^(xi) = e^{-i R xi^2} psi(xi), psi in C_c([1/8, 1]) equal to 1 on [1/4, 3/4]; mu = 1_F,
// F = {|x| <= 1/4, R - 1/4 <= t <= R}.
FlsPoint chirp_ratio(int64_t R, double p);
// Slab: g^(xi) = psi2(R^{1/2}(xi + 1)), psi2 in C_c([1/4, 4]) equal to 1 on [1/2, 2];
// mu = min(R^{(alpha-2)/2}, R^{alpha-3/2}) 1_G, G = {|x - 2t| <= c R^{1/2}, 0 <= t <= R}.
FlsPoint slab_ratio(int64_t R, double p, double alpha, double c = 0.25, int64_t nt = 64);
// Lattice: f = sum_l e^{i(x, t).xi_l} with xi_l the lattice mode nearest (l, l^2), l in R^{-kappa} Z,
// over Y = Gamma + B_c; ratio ||f||_{L^p(Y)} / ||(sum_l |f_l|^2)^{1/2}||_p.
FlsPoint lattice_ratio(int64_t R, double p, double kappa, double c = 0.125, double cutoff = 0.5);

// Sufficiency exponents.
double zeta_sufficient(double alpha, double p);  // 1/p - (2 - alpha)(1/p - 1/4)
double zeta_lower(double alpha, double p);       // max(1/2 - 1/p, min(alpha, 2 alpha - 1) / (2p))
double gamma_alpha(double alpha, double p);      // fractal local smoothing, alpha-dimensional
double gamma_par(double beta, double p);         // parabolic beta-dimensional

FlsPoint fls_point(const std::string& family, double param, double p, int64_t R);

struct FlsPrediction {
    double exponent = 0.0;     // lower-bound exponent the family realises
    double sufficiency = 0.0;  // upper exponent from the sufficiency results
};
FlsPrediction fls_prediction(const std::string& family, double param, double p);

// Family is chirp, slab (param alpha) or lattice (param kappa, alpha = 2 - 3 kappa).
ExponentFit fls_experiment(const std::string& family, double param, double p, const std::vector<int64_t>& Rs);

}  // namespace parasq
