#pragma once

#include <map>
#include <string>
#include <vector>

#include "parasq/common.hpp"
#include "parasq/geometry.hpp"
#include "parasq/torus.hpp"

namespace parasq {

struct Atom {
    int64_t i = 0;  // x1 grid index in [0, M)
    int64_t j = 0;  // x2 grid index
    double mass = 0.0;
};

enum class MeasureKind { Weight, Raw };

// Non-negative atomic measure on the fine grid. Weights have density
// mass / Delta^2 in [0, 1]. Storage is sparse (atoms sorted row-major by
// (j, i)), dense (M*M masses) or uniform (one mass on every grid point).
class GridMeasure {
public:
    enum class Storage { Sparse, Dense, Uniform };

    GridSpec grid;
    MeasureKind kind = MeasureKind::Weight;
    Storage storage = Storage::Sparse;
    std::vector<Atom> atoms;
    std::vector<double> dense;
    double uniform_mass = 0.0;
    std::string family;
    std::map<std::string, double> params;

    static GridMeasure sparse(const GridSpec& g, std::vector<Atom> atoms, MeasureKind kind = MeasureKind::Weight);
    static GridMeasure dense_from(const GridSpec& g, std::vector<double> masses, MeasureKind kind = MeasureKind::Weight);
    static GridMeasure uniform(const GridSpec& g, double mass, MeasureKind kind = MeasureKind::Weight);

    bool empty() const;
    int64_t support_size() const;
    double total() const;
    double max_density() const;

    // Visits (i, j, mass) for every non-zero atom in row-major order.
    template <class F>
    void for_each(F&& f) const {
        if (storage == Storage::Sparse) {
            for (const auto& a : atoms) f(a.i, a.j, a.mass);
        } else if (storage == Storage::Dense) {
            for (int64_t j = 0; j < grid.M; ++j)
                for (int64_t i = 0; i < grid.M; ++i) {
                    double m = dense[static_cast<size_t>(j * grid.M + i)];
                    if (m != 0.0) f(i, j, m);
                }
        } else if (uniform_mass != 0.0) {
            for (int64_t j = 0; j < grid.M; ++j)
                for (int64_t i = 0; i < grid.M; ++i) f(i, j, uniform_mass);
        }
    }

    // Materialised atom list (small measures only).
    std::vector<Atom> atom_list() const;
};

struct WeightParams {
    std::string family;  // constant, ball, dual_tube, lattice, truncated_lattice, parabolic_boxes, points, bump
    double lambda = 1.0;
    double rho = 1.0;
    Vec2 center{0.0, 0.0};
    double alpha = 1.5;
    int64_t theta = -1;       // dual tube: finest cap index, -1 = cap containing 0
    double kappa = 1.0 / 3.0;
    double c = 0.125;          // lattice ball radius
    double cutoff = 1.0;       // lattice: Gamma restricted to B_{cutoff R}
    double sigma = 4.0;        // bump width
    std::vector<std::pair<Vec2, double>> boxes;  // parabolic boxes (centre, radius)
    std::vector<Atom> points;
};

GridMeasure make_weight(const GridSpec& g, const WeightParams& p);

// Real-coordinate point cloud (for certificates and space-time measures).
struct PointCloud {
    std::vector<Vec2> pts;
    std::vector<double> mass;
    double cell_area = 1.0;  // area represented by one atom (Morrey-Campanato densities)
};

PointCloud to_cloud(const GridMeasure& mu);

enum class CertMode { Alpha, AlphaAll, Parabolic, Morrey };

const char* cert_mode_name(CertMode m);

struct Certificate {
    CertMode mode = CertMode::Alpha;
    double param = 0.0;
    double q = 1.0;
    double rho_min = 1.0;
    double value = 0.0;
    double radius = 0.0;
    Vec2 center{0.0, 0.0};
    double guarantee = 1.0;  // true supremum <= guarantee * value
};

// Supremum over dyadic radii >= rho_min and a centre lattice of spacing r/2
// (boxes: (r/2, r^2/2)) of
//   Alpha / AlphaAll : r^{-a} mu(B_r(z))
//   Parabolic        : r^{-b} mu(box r x r^2)
//   Morrey (delta,q) : r^delta (r^{-3} int_box H^q)^{1/q}
Certificate certify(const PointCloud& cloud, CertMode mode, double param, double q = 1.0, double rho_min = 1.0);
// Same, for several parameters sharing one pass over radii and centres.
std::vector<Certificate> certify_multi(const PointCloud& cloud, CertMode mode, const std::vector<double>& params,
                                       double q = 1.0, double rho_min = 1.0);

// Brute force over the given centres and every critical radius >= rho_min.
Certificate certify_brute(const PointCloud& cloud, CertMode mode, double param, const std::vector<Vec2>& centers,
                          double q = 1.0, double rho_min = 1.0);
// Same, for several parameters with one sort per centre.
std::vector<Certificate> certify_brute_multi(const PointCloud& cloud, CertMode mode, const std::vector<double>& params,
                                             const std::vector<Vec2>& centers, double q = 1.0, double rho_min = 1.0);

Certificate dimension_certificate(const GridMeasure& mu, CertMode mode, double param, double q = 1.0);

// H(x) = sum_a m_a c_N (1+|x-a|)^{-N} on the grid, truncated at |x-a| <= 16.
GridMeasure smooth_measure(const GridMeasure& mu, int N = 10, bool clamp = false);
double smoothing_constant(int N);

struct LevelSet {
    double lambda = 0.0;
    std::vector<Atom> atoms;
};

struct LevelSets {
    std::vector<LevelSet> levels;  // lambda = 1, 1/2, 1/4, ...
    std::vector<Atom> residual;    // density below the floor
};

LevelSets dyadic_level_sets(const GridMeasure& H, double floor);

// Level maximising lambda * sum_{Y_lambda} |f|^p Delta^2, with |f|^p given per atom.
struct PigeonholeChoice {
    size_t level = 0;
    double lambda = 0.0;
    double value = 0.0;
    double total = 0.0;
};

PigeonholeChoice pigeonhole_level(const LevelSets& sets, const GridSpec& g,
                                  const std::vector<std::vector<double>>& fp_per_level);

void write_measure_csv(const GridMeasure& mu, const std::string& path);

}  // namespace parasq
