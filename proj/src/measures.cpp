#include "parasq/measures.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

namespace parasq {

namespace {

bool row_major_less(const Atom& a, const Atom& b) { return a.j != b.j ? a.j < b.j : a.i < b.i; }

// Sort and merge atoms on the same grid point; merge keeps the larger mass
// (set union) or adds (accumulation).
std::vector<Atom> canonical(std::vector<Atom> atoms, bool add) {
    std::sort(atoms.begin(), atoms.end(), row_major_less);
    std::vector<Atom> out;
    for (const auto& a : atoms) {
        if (!out.empty() && out.back().i == a.i && out.back().j == a.j) {
            out.back().mass = add ? out.back().mass + a.mass : std::max(out.back().mass, a.mass);
        } else {
            out.push_back(a);
        }
    }
    std::erase_if(out, [](const Atom& a) { return a.mass == 0.0; });
    return out;
}

double torus_diff(double a, double b, double L) {
    double d = std::fmod(a - b, L);
    if (d < -L / 2) d += L;
    if (d >= L / 2) d -= L;
    return d;
}

// Grid points inside a disk of radius rho around z (torus images identified).
std::vector<std::pair<int64_t, int64_t>> disk_points(const GridSpec& g, Vec2 z, double rho) {
    std::vector<std::pair<int64_t, int64_t>> out;
    double d = g.delta();
    auto i0 = static_cast<int64_t>(std::floor((z.x - rho) / d)), i1 = static_cast<int64_t>(std::ceil((z.x + rho) / d));
    auto j0 = static_cast<int64_t>(std::floor((z.y - rho) / d)), j1 = static_cast<int64_t>(std::ceil((z.y + rho) / d));
    for (int64_t j = j0; j <= j1; ++j)
        for (int64_t i = i0; i <= i1; ++i) {
            double dx = static_cast<double>(i) * d - z.x, dy = static_cast<double>(j) * d - z.y;
            if (dx * dx + dy * dy <= rho * rho) out.emplace_back(pos_mod(i, g.M), pos_mod(j, g.M));
        }
    return out;
}

std::vector<Atom> fatten(const GridSpec& g, const std::vector<Vec2>& centres, double c) {
    std::vector<Atom> atoms;
    double m = g.delta() * g.delta();
    for (const auto& z : centres) {
        atoms.push_back({g.index(z.x), g.index(z.y), m});
        for (auto [i, j] : disk_points(g, z, c)) atoms.push_back({i, j, m});
    }
    return canonical(std::move(atoms), false);
}

}  // namespace

GridMeasure GridMeasure::sparse(const GridSpec& g, std::vector<Atom> atoms, MeasureKind kind) {
    GridMeasure mu;
    mu.grid = g;
    mu.kind = kind;
    mu.storage = Storage::Sparse;
    for (const auto& a : atoms)
        if (a.i < 0 || a.i >= g.M || a.j < 0 || a.j >= g.M || a.mass < 0.0) throw Error("atom outside grid or negative");
    mu.atoms = canonical(std::move(atoms), true);
    if (kind == MeasureKind::Weight && mu.max_density() > 1.0 + 1e-12) throw Error("weight density exceeds 1");
    return mu;
}

GridMeasure GridMeasure::dense_from(const GridSpec& g, std::vector<double> masses, MeasureKind kind) {
    if (static_cast<int64_t>(masses.size()) != g.M * g.M) throw Error("dense measure: size mismatch");
    GridMeasure mu;
    mu.grid = g;
    mu.kind = kind;
    mu.storage = Storage::Dense;
    mu.dense = std::move(masses);
    for (double m : mu.dense)
        if (m < 0.0) throw Error("negative mass");
    if (kind == MeasureKind::Weight && mu.max_density() > 1.0 + 1e-12) throw Error("weight density exceeds 1");
    return mu;
}

GridMeasure GridMeasure::uniform(const GridSpec& g, double mass, MeasureKind kind) {
    if (mass < 0.0) throw Error("negative mass");
    GridMeasure mu;
    mu.grid = g;
    mu.kind = kind;
    mu.storage = Storage::Uniform;
    mu.uniform_mass = mass;
    if (kind == MeasureKind::Weight && mu.max_density() > 1.0 + 1e-12) throw Error("weight density exceeds 1");
    return mu;
}

bool GridMeasure::empty() const { return support_size() == 0; }

int64_t GridMeasure::support_size() const {
    switch (storage) {
        case Storage::Sparse: return static_cast<int64_t>(atoms.size());
        case Storage::Uniform: return uniform_mass > 0.0 ? grid.M * grid.M : 0;
        case Storage::Dense: return std::count_if(dense.begin(), dense.end(), [](double m) { return m != 0.0; });
    }
    return 0;
}

double GridMeasure::total() const {
    double acc = 0.0;
    if (storage == Storage::Uniform) return uniform_mass * static_cast<double>(grid.M * grid.M);
    for_each([&](int64_t, int64_t, double m) { acc += m; });
    return acc;
}

double GridMeasure::max_density() const {
    double d2 = grid.delta() * grid.delta();
    double mx = 0.0;
    if (storage == Storage::Uniform) return uniform_mass / d2;
    if (storage == Storage::Dense) {
        for (double m : dense) mx = std::max(mx, m);
    } else {
        for (const auto& a : atoms) mx = std::max(mx, a.mass);
    }
    return mx / d2;
}

std::vector<Atom> GridMeasure::atom_list() const {
    if (storage == Storage::Sparse) return atoms;
    std::vector<Atom> out;
    for_each([&](int64_t i, int64_t j, double m) { out.push_back({i, j, m}); });
    return out;
}

GridMeasure make_weight(const GridSpec& g, const WeightParams& p) {
    g.validate();
    double d = g.delta();
    double d2 = d * d;
    double R = static_cast<double>(g.R);
    GridMeasure mu;
    if (p.family == "constant") {
        if (!(p.lambda > 0.0 && p.lambda <= 1.0)) throw Error("constant weight: lambda must lie in (0, 1]");
        mu = GridMeasure::uniform(g, p.lambda * d2);
        mu.params = {{"lambda", p.lambda}};
    } else if (p.family == "ball") {
        if (!(p.rho > 0.0)) throw Error("ball weight: radius must be positive");
        std::vector<Atom> atoms;
        for (auto [i, j] : disk_points(g, p.center, p.rho)) atoms.push_back({i, j, d2});
        mu = GridMeasure::sparse(g, canonical(std::move(atoms), false));
        mu.params = {{"rho", p.rho}, {"z1", p.center.x}, {"z2", p.center.y}};
    } else if (p.family == "dual_tube") {
        if (p.alpha < 0.0 || p.alpha > 2.0) throw Error("dual tube: alpha must lie in [0, 2]");
        double s = 1.0 / std::sqrt(R);
        int64_t k = p.theta >= 0 ? p.theta : cap_index_of(0.0, s);
        auto caps = caps_at_scale(s);
        if (k >= static_cast<int64_t>(caps.size())) throw Error("dual tube: cap index out of range");
        const Cap& cap = caps[static_cast<size_t>(k)];
        Locator loc(cap, TileKind::Tube, g);
        auto corners = tile_corners(cap, TileKind::Tube, {0, 0}, g.R);
        double x0 = corners[0].x, x1 = x0, y0 = corners[0].y, y1 = y0;
        for (auto v : corners) {
            x0 = std::min(x0, v.x), x1 = std::max(x1, v.x);
            y0 = std::min(y0, v.y), y1 = std::max(y1, v.y);
        }
        double m = std::pow(R, (p.alpha - 2.0) / 2.0) * d2;
        std::vector<Atom> atoms;
        for (auto j = static_cast<int64_t>(std::floor(y0 / d)); j <= static_cast<int64_t>(std::ceil(y1 / d)); ++j)
            for (auto i = static_cast<int64_t>(std::floor(x0 / d)); i <= static_cast<int64_t>(std::ceil(x1 / d)); ++i) {
                auto z = loc.locate({static_cast<double>(i) * d, static_cast<double>(j) * d});
                if (z.z1 == 0 && z.z2 == 0) atoms.push_back({pos_mod(i, g.M), pos_mod(j, g.M), m});
            }
        mu = GridMeasure::sparse(g, canonical(std::move(atoms), false));
        mu.params = {{"alpha", p.alpha}, {"theta", static_cast<double>(k)}};
    } else if (p.family == "lattice" || p.family == "truncated_lattice") {
        if (!(p.kappa > 0.0 && p.kappa <= 0.5)) throw Error("lattice weight: kappa must lie in (0, 1/2]");
        double a = 2.0 * kPi * std::pow(R, p.kappa);
        double b = 2.0 * kPi * std::pow(R, 2.0 * p.kappa);
        std::vector<Vec2> gamma;
        if (p.family == "lattice") {
            double rho = p.cutoff * R;
            auto na = static_cast<int64_t>(std::floor(rho / a)), nb = static_cast<int64_t>(std::floor(rho / b));
            for (int64_t v = -nb; v <= nb; ++v)
                for (int64_t u = -na; u <= na; ++u) {
                    Vec2 z{static_cast<double>(u) * a, static_cast<double>(v) * b};
                    if (z.x * z.x + z.y * z.y <= rho * rho) gamma.push_back(z);
                }
        } else {
            auto na = static_cast<int64_t>(std::floor(std::sqrt(R) / a)), nb = static_cast<int64_t>(std::floor(R / b));
            for (int64_t v = 0; v <= nb; ++v)
                for (int64_t u = 0; u <= na; ++u) gamma.push_back({static_cast<double>(u) * a, static_cast<double>(v) * b});
        }
        mu = GridMeasure::sparse(g, fatten(g, gamma, p.c));
        mu.params = {{"kappa", p.kappa}, {"c", p.c}, {"gamma_points", static_cast<double>(gamma.size())}};
        if (p.family == "lattice") mu.params["cutoff"] = p.cutoff;
    } else if (p.family == "parabolic_boxes") {
        std::vector<Atom> atoms;
        for (const auto& [z, r] : p.boxes) {
            auto i0 = static_cast<int64_t>(std::ceil((z.x - r) / d)), i1 = static_cast<int64_t>(std::floor((z.x + r) / d));
            auto j0 = static_cast<int64_t>(std::ceil((z.y - r * r) / d));
            auto j1 = static_cast<int64_t>(std::floor((z.y + r * r) / d));
            for (int64_t j = j0; j <= j1; ++j)
                for (int64_t i = i0; i <= i1; ++i) atoms.push_back({pos_mod(i, g.M), pos_mod(j, g.M), d2});
        }
        mu = GridMeasure::sparse(g, canonical(std::move(atoms), false));
        mu.params = {{"boxes", static_cast<double>(p.boxes.size())}};
    } else if (p.family == "points") {
        mu = GridMeasure::sparse(g, p.points);
    } else if (p.family == "bump") {
        if (!(p.sigma > 0.0) || !(p.lambda > 0.0 && p.lambda <= 1.0)) throw Error("bump weight: bad parameters");
        std::vector<Atom> atoms;
        for (auto [i, j] : disk_points(g, p.center, 8.0 * p.sigma)) {
            double dx = torus_diff(g.coord(i), p.center.x, g.L), dy = torus_diff(g.coord(j), p.center.y, g.L);
            double h = p.lambda * std::exp(-(dx * dx + dy * dy) / (2.0 * p.sigma * p.sigma));
            atoms.push_back({i, j, h * d2});
        }
        mu = GridMeasure::sparse(g, canonical(std::move(atoms), false));
        mu.params = {{"sigma", p.sigma}, {"lambda", p.lambda}};
    } else {
        throw Error("unknown weight family '" + p.family + "'");
    }
    mu.family = p.family;
    return mu;
}

PointCloud to_cloud(const GridMeasure& mu) {
    PointCloud c;
    c.cell_area = mu.grid.delta() * mu.grid.delta();
    mu.for_each([&](int64_t i, int64_t j, double m) {
        c.pts.push_back({mu.grid.coord(i), mu.grid.coord(j)});
        c.mass.push_back(m);
    });
    return c;
}

const char* cert_mode_name(CertMode m) {
    switch (m) {
        case CertMode::Alpha: return "alpha";
        case CertMode::AlphaAll: return "alpha_all";
        case CertMode::Parabolic: return "parabolic";
        case CertMode::Morrey: return "morrey";
    }
    return "?";
}

namespace {

bool is_box(CertMode m) { return m == CertMode::Parabolic || m == CertMode::Morrey; }

double atom_value(const PointCloud& c, size_t k, CertMode mode, double q) {
    if (mode != CertMode::Morrey) return c.mass[k];
    return c.cell_area * std::pow(c.mass[k] / c.cell_area, q);
}

double score(CertMode mode, double r, double sum, double param, double q) {
    if (mode == CertMode::Morrey) return std::pow(r, param) * std::pow(sum / (r * r * r), 1.0 / q);
    return std::pow(r, -param) * sum;
}

double guarantee_factor(CertMode mode, double param, double q) {
    return mode == CertMode::Morrey ? std::pow(4.0, std::max(0.0, 3.0 / q - param)) : std::pow(4.0, param);
}

}  // namespace

Certificate certify(const PointCloud& cloud, CertMode mode, double param, double q, double rho_min) {
    return certify_multi(cloud, mode, {param}, q, rho_min)[0];
}

std::vector<Certificate> certify_multi(const PointCloud& cloud, CertMode mode, const std::vector<double>& params,
                                       double q, double rho_min) {
    for (double param : params)
        if (param < 0.0) throw Error("certificate parameter must be non-negative");
    if (mode == CertMode::Morrey)
        for (double param : params)
            if (!(q >= 1.0 && param * q <= 3.0)) throw Error("Morrey-Campanato needs q >= 1, delta*q <= 3");
    std::vector<Certificate> certs(params.size());
    for (size_t k = 0; k < params.size(); ++k) {
        certs[k].mode = mode;
        certs[k].param = params[k];
        certs[k].q = q;
        certs[k].rho_min = rho_min;
        certs[k].guarantee = guarantee_factor(mode, params[k], q);
    }
    if (cloud.pts.empty()) return certs;
    bool box = is_box(mode);
    double xmin = cloud.pts[0].x, xmax = xmin, ymin = cloud.pts[0].y, ymax = ymin;
    for (const auto& p : cloud.pts) {
        xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
    double extent = box ? std::max(xmax - xmin, std::sqrt(ymax - ymin)) : std::hypot(xmax - xmin, ymax - ymin);
    auto k0 = static_cast<int>(std::ceil(std::log2(rho_min) - 1e-12));
    int k1 = std::max(k0, static_cast<int>(std::ceil(std::log2(std::max(extent, rho_min))))) + 3;
    std::vector<double> val(cloud.pts.size());
    for (size_t k = 0; k < val.size(); ++k) val[k] = atom_value(cloud, k, mode, q);

    using Cell = std::pair<int64_t, int64_t>;
    for (int k = k0; k <= k1; ++k) {
        double r = std::ldexp(1.0, k);
        double hx = r / 2.0, hy = box ? r * r / 2.0 : r / 2.0;
        auto key = [](int64_t a, int64_t b) { return (static_cast<uint64_t>(a) << 32) ^ static_cast<uint32_t>(b); };
        std::unordered_map<uint64_t, std::vector<uint32_t>> buckets;
        std::vector<Cell> occupied;
        for (size_t n = 0; n < cloud.pts.size(); ++n) {
            auto bx = static_cast<int64_t>(std::floor(cloud.pts[n].x / hx));
            auto by = static_cast<int64_t>(std::floor(cloud.pts[n].y / hy));
            auto& members = buckets[key(bx, by)];
            if (members.empty()) occupied.push_back({bx, by});
            members.push_back(static_cast<uint32_t>(n));
        }
        std::vector<Cell> centres;
        centres.reserve(occupied.size() * 16);
        for (auto [bx, by] : occupied)
            for (int64_t cy = by - 1; cy <= by + 2; ++cy)
                for (int64_t cx = bx - 1; cx <= bx + 2; ++cx) centres.push_back({cx, cy});
        std::sort(centres.begin(), centres.end(), [](const Cell& a, const Cell& b) {
            return a.second != b.second ? a.second < b.second : a.first < b.first;
        });
        centres.erase(std::unique(centres.begin(), centres.end()), centres.end());
        for (auto [cx, cy] : centres) {
            Vec2 z{static_cast<double>(cx) * hx, static_cast<double>(cy) * hy};
            double sum = 0.0;
            for (int64_t by = cy - 2; by <= cy + 1; ++by)
                for (int64_t bx = cx - 2; bx <= cx + 1; ++bx) {
                    auto it = buckets.find(key(bx, by));
                    if (it == buckets.end()) continue;
                    for (uint32_t n : it->second) {
                        double dx = cloud.pts[n].x - z.x, dy = cloud.pts[n].y - z.y;
                        bool in = box ? (std::abs(dx) <= r && std::abs(dy) <= r * r) : (dx * dx + dy * dy <= r * r);
                        if (in) sum += val[n];
                    }
                }
            for (auto& cert : certs) {
                double v = score(mode, r, sum, cert.param, q);
                if (v > cert.value) {
                    cert.value = v;
                    cert.radius = r;
                    cert.center = z;
                }
            }
        }
    }
    return certs;
}

std::vector<Certificate> certify_brute_multi(const PointCloud& cloud, CertMode mode, const std::vector<double>& params,
                                             const std::vector<Vec2>& centers, double q, double rho_min) {
    std::vector<Certificate> certs(params.size());
    for (size_t k = 0; k < params.size(); ++k) {
        certs[k].mode = mode;
        certs[k].param = params[k];
        certs[k].q = q;
        certs[k].rho_min = rho_min;
        certs[k].guarantee = 1.0;
    }
    bool box = is_box(mode);
    std::vector<std::pair<double, double>> rv(cloud.pts.size());
    for (const auto& z : centers) {
        for (size_t n = 0; n < cloud.pts.size(); ++n) {
            double dx = std::abs(cloud.pts[n].x - z.x), dy = std::abs(cloud.pts[n].y - z.y);
            double need = box ? std::max(dx, std::sqrt(dy)) : std::hypot(dx, dy);
            rv[n] = {need, atom_value(cloud, n, mode, q)};
        }
        std::sort(rv.begin(), rv.end());
        double sum = 0.0;
        for (size_t n = 0; n < rv.size(); ++n) {
            sum += rv[n].second;
            if (n + 1 < rv.size() && rv[n + 1].first == rv[n].first) continue;
            if (n + 1 < rv.size() && rv[n + 1].first <= rho_min) continue;
            double r = std::max(rv[n].first, rho_min);
            for (size_t k = 0; k < params.size(); ++k) {
                double v = score(mode, r, sum, params[k], q);
                if (v > certs[k].value) {
                    certs[k].value = v;
                    certs[k].radius = r;
                    certs[k].center = z;
                }
            }
        }
    }
    return certs;
}

Certificate certify_brute(const PointCloud& cloud, CertMode mode, double param, const std::vector<Vec2>& centers,
                          double q, double rho_min) {
    return certify_brute_multi(cloud, mode, {param}, centers, q, rho_min).front();
}

Certificate dimension_certificate(const GridMeasure& mu, CertMode mode, double param, double q) {
    double floor_r = mode == CertMode::Alpha ? 1.0 : mu.grid.delta();
    return certify(to_cloud(mu), mode, param, q, floor_r);
}

double smoothing_constant(int N) { return static_cast<double>((N - 1) * (N - 2)) / (2.0 * kPi); }

GridMeasure smooth_measure(const GridMeasure& mu, int N, bool clamp) {
    if (N < 3) throw Error("smoothing exponent must be >= 3");
    const GridSpec& g = mu.grid;
    double cN = smoothing_constant(N);
    double d2 = g.delta() * g.delta();
    const double radius = 16.0;
    std::unordered_map<int64_t, double> acc;
    mu.for_each([&](int64_t i, int64_t j, double m) {
        Vec2 a{g.coord(i), g.coord(j)};
        for (auto [u, v] : disk_points(g, a, radius)) {
            double dx = torus_diff(g.coord(u), a.x, g.L), dy = torus_diff(g.coord(v), a.y, g.L);
            acc[v * g.M + u] += m * cN * std::pow(1.0 + std::hypot(dx, dy), -N);
        }
    });
    std::vector<Atom> atoms;
    atoms.reserve(acc.size());
    for (const auto& [key, h] : acc) {
        double hv = clamp ? std::min(h, 1.0) : h;
        atoms.push_back({key % g.M, key / g.M, hv * d2});
    }
    bool weight = clamp;
    if (!clamp) {
        weight = true;
        for (const auto& a : atoms)
            if (a.mass > d2 * (1.0 + 1e-12)) weight = false;
    }
    GridMeasure out = GridMeasure::sparse(g, std::move(atoms), weight ? MeasureKind::Weight : MeasureKind::Raw);
    out.family = "smoothed_" + mu.family;
    return out;
}

LevelSets dyadic_level_sets(const GridMeasure& H, double floor) {
    LevelSets out;
    double d2 = H.grid.delta() * H.grid.delta();
    H.for_each([&](int64_t i, int64_t j, double m) {
        double h = m / d2;
        if (h < floor) {
            out.residual.push_back({i, j, m});
            return;
        }
        int e = 0;
        std::frexp(h, &e);
        // h in [2^{e-1}, 2^e): lambda = 2^{e-1}; index k = 1 - e for lambda <= 1.
        auto k = static_cast<size_t>(std::max(0, 1 - e));
        if (out.levels.size() <= k) {
            size_t old = out.levels.size();
            out.levels.resize(k + 1);
            for (size_t n = old; n <= k; ++n) out.levels[n].lambda = std::ldexp(1.0, -static_cast<int>(n));
        }
        out.levels[k].atoms.push_back({i, j, m});
    });
    return out;
}

PigeonholeChoice pigeonhole_level(const LevelSets& sets, const GridSpec& g,
                                  const std::vector<std::vector<double>>& fp_per_level) {
    if (fp_per_level.size() != sets.levels.size()) throw Error("pigeonhole: level count mismatch");
    PigeonholeChoice best;
    double d2 = g.delta() * g.delta();
    for (size_t k = 0; k < sets.levels.size(); ++k) {
        const auto& lv = sets.levels[k];
        if (fp_per_level[k].size() != lv.atoms.size()) throw Error("pigeonhole: atom count mismatch");
        double acc = 0.0;
        for (double v : fp_per_level[k]) acc += v * d2;
        double value = lv.lambda * acc;
        best.total += value;
        if (value > best.value) {
            best.value = value;
            best.level = k;
            best.lambda = lv.lambda;
        }
    }
    return best;
}

void write_measure_csv(const GridMeasure& mu, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os.precision(17);
    os << "i,j,mass\n";
    mu.for_each([&](int64_t i, int64_t j, double m) { os << i << ',' << j << ',' << m << '\n'; });
}

}  // namespace parasq
