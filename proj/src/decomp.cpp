#include "parasq/decomp.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>

#include "parasq/fft.hpp"

namespace parasq {

BGSplit bg_split(const std::vector<double>& a, const std::vector<std::vector<size_t>>& I, double p) {
    if (a.size() != I.size()) throw Error("bg_split: one neighbourhood per value required");
    if (p < 1.0) throw Error("bg_split: p must be >= 1");
    BGSplit out;
    size_t n = a.size();
    double sum = 0.0, amax = 0.0;
    out.C1 = 1.0;
    for (size_t i = 0; i < n; ++i) {
        if (a[i] < 0.0) throw Error("bg_split: values must be non-negative");
        if (std::find(I[i].begin(), I[i].end(), i) == I[i].end()) throw Error("bg_split: I_i must contain i");
        for (size_t j : I[i])
            if (j >= n) throw Error("bg_split: neighbourhood index out of range");
        out.C1 = std::max(out.C1, static_cast<double>(I[i].size()));
        sum += a[i];
        amax = std::max(amax, a[i]);
    }
    double pair = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            if (std::find(I[i].begin(), I[i].end(), j) == I[i].end())
                pair = std::max(pair, std::pow(a[i] * a[j], p / 2.0));
    out.lhs = std::pow(sum, p);
    out.max_term = std::pow(amax, p);
    out.bilinear = std::pow(static_cast<double>(n), p) * pair;
    out.C = std::pow(2.0, p - 1.0) * std::max(std::pow(out.C1, p), 1.0);
    out.bound = out.C * (out.max_term + out.bilinear);
    out.holds = out.lhs <= out.bound * (1.0 + 1e-12);
    return out;
}

std::vector<Vec2> random_points(const GridSpec& g, int64_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec2> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t k = 0; k < n; ++k) {
        int64_t i = rng.below(g.M), j = rng.below(g.M);
        out.push_back({g.coord(i), g.coord(j)});
    }
    return out;
}

BroadNarrowReport broad_narrow(const TorusField& f, const std::vector<Vec2>& points, double p, int64_t K,
                               int64_t threshold) {
    if (threshold < 0) throw Error("broad_narrow: threshold must be >= 0");
    CapTree tree = build_cap_tree(f.grid.R, K);
    BroadNarrowReport rep;
    rep.R = f.grid.R;
    rep.K = K;
    rep.m = tree.m;
    rep.threshold = threshold;
    rep.p = p;
    rep.mismatch = tree.mismatch;
    rep.C1 = static_cast<double>(std::min<int64_t>(2 * threshold + 1, K));
    rep.C = std::pow(2.0, p - 1.0) * std::max(std::pow(rep.C1, p), 1.0);
    rep.prefactor = std::pow(2.0, p - 1.0) * std::pow(rep.C, tree.m);

    // Leaves: windowed pieces at scale K^{-m}.
    const auto& leaves = tree.levels.back();
    double s = leaves.front().s;
    std::vector<std::vector<Mode>> leaf_modes(leaves.size());
    double d = f.grid.dxi();
    for (const auto& md : f.modes) {
        double xi1 = d * static_cast<double>(md.n1);
        int64_t k0 = cap_index_of(xi1, s);
        for (int64_t k = std::max<int64_t>(0, k0 - 1); k <= std::min<int64_t>(static_cast<int64_t>(leaves.size()) - 1, k0 + 1);
             ++k) {
            double w = cap_window(leaves[static_cast<size_t>(k)], xi1);
            if (w != 0.0) leaf_modes[static_cast<size_t>(k)].push_back({md.n1, md.n2, md.a * w});
        }
    }
    std::vector<std::vector<cplx>> leaf_vals(leaves.size());
    for (size_t k = 0; k < leaves.size(); ++k)
        if (!leaf_modes[k].empty()) leaf_vals[k] = point_eval(leaf_modes[k], f.grid.L, points);

    int m = tree.m;
    rep.points.resize(points.size());
    parallel_for(static_cast<int64_t>(points.size()), [&](int64_t n) {
        auto un = static_cast<size_t>(n);
        BroadNarrowPoint& pt = rep.points[un];
        pt.x = points[un];
        std::vector<std::vector<cplx>> vals(static_cast<size_t>(m + 1));
        vals[static_cast<size_t>(m)].resize(leaves.size());
        for (size_t k = 0; k < leaves.size(); ++k)
            vals[static_cast<size_t>(m)][k] = leaf_vals[k].empty() ? cplx(0.0, 0.0) : leaf_vals[k][un];
        for (int j = m - 1; j >= 0; --j) {
            const auto& below = vals[static_cast<size_t>(j + 1)];
            auto& here = vals[static_cast<size_t>(j)];
            here.assign(tree.levels[static_cast<size_t>(j)].size(), cplx(0.0, 0.0));
            for (size_t k = 0; k < below.size(); ++k) here[k / static_cast<size_t>(K)] += below[k];
        }
        cplx total = vals[0][0] + vals[0][1];
        pt.lhs = std::pow(std::abs(total), p);
        for (const auto& v : vals[static_cast<size_t>(m)]) pt.narrow += std::pow(std::abs(v), p);
        double tight_bil = 0.0;
        for (int j = 1; j <= m; ++j) {
            const auto& ch = vals[static_cast<size_t>(j)];
            double bj = 0.0;
            for (size_t parent = 0; parent < ch.size() / static_cast<size_t>(K); ++parent)
                for (int64_t a = 0; a < K; ++a)
                    for (int64_t b = a + threshold + 1; b < K; ++b)
                        bj += std::pow(std::abs(ch[parent * static_cast<size_t>(K) + static_cast<size_t>(a)] *
                                                ch[parent * static_cast<size_t>(K) + static_cast<size_t>(b)]),
                                       p / 2.0);
            pt.bilinear += bj;
            tight_bil += std::pow(rep.C, j) * bj;
        }
        double Kp = std::pow(static_cast<double>(K), p);
        pt.tight = std::pow(2.0, p - 1.0) * (std::pow(rep.C, m) * pt.narrow + Kp * tight_bil);
        pt.bound = rep.prefactor * (pt.narrow + Kp * pt.bilinear);
    });
    double Kp = std::pow(static_cast<double>(K), p);
    for (const auto& pt : rep.points) {
        if (pt.lhs > pt.bound * (1.0 + 1e-12)) ++rep.violations;
        if (pt.bound > 0.0) rep.max_ratio = std::max(rep.max_ratio, pt.lhs / pt.bound);
        double base = pt.narrow + Kp * pt.bilinear;
        if (base > 0.0 && m > 0) rep.empirical_C = std::max(rep.empirical_C, std::pow(pt.lhs / base, 1.0 / m));
    }
    return rep;
}

cplx FreeField::eval(Vec2 x) const {
    cplx acc(0.0, 0.0);
    for (const auto& [eta, a] : terms) {
        double ph = eta.x * x.x + eta.y * x.y;
        acc += a * cplx(std::cos(ph), std::sin(ph));
    }
    return acc;
}

Rescaled parabolic_rescale(const TorusField& f, const Cap& cap) {
    if (cap.band != Band::Parabola) throw Error("parabolic_rescale needs a parabola cap");
    Rescaled out;
    out.cap = cap;
    double s = cap.s, c = cap.c;
    double rs = static_cast<double>(f.grid.R) * s * s;
    out.Rs = static_cast<int64_t>(std::llround(rs));
    if (out.Rs < 1) throw Error("parabolic_rescale: cap finer than R^{-1/2}");
    out.density_factor = s * s * s;
    for (const auto& m : f.modes) {
        Vec2 xi = f.freq(m);
        if (std::abs(xi.x - c) > s * (1.0 + 1e-12))
            throw BandError("parabolic_rescale: mode outside the doubled cap", xi);
        Vec2 eta{(xi.x - c) / s, (xi.y - 2.0 * c * xi.x + c * c) / (s * s)};
        out.band_defect = std::max(out.band_defect, std::abs(eta.y - eta.x * eta.x) * rs);
        out.g.terms.emplace_back(eta, m.a);
    }
    return out;
}

namespace {

std::vector<Mode> modes_in_cap(const GridSpec& g, const Cap& cap) {
    std::vector<Mode> out;
    double d = g.dxi();
    for (const auto& m : band_lattice(g, Band::Parabola))
        if (cap_index_of(d * static_cast<double>(m.n1), cap.s) == cap.k) out.push_back(m);
    return out;
}

double cap_gap(const Cap& a, const Cap& b) { return std::max(a.lo(), b.lo()) - std::min(a.hi(), b.hi()); }

// Samples of the unit-mass kernel c (1+|y|)^{-10} on the torus grid, centred at index 0.
std::vector<cplx> kernel_hat(const GridSpec& g) {
    int64_t M = g.M;
    double d = g.delta();
    std::vector<cplx> k(static_cast<size_t>(M * M));
    double sum = 0.0;
    for (int64_t j = 0; j < M; ++j)
        for (int64_t i = 0; i < M; ++i) {
            double v = std::pow(1.0 + std::hypot(g.coord(i), g.coord(j)), -10.0);
            k[static_cast<size_t>(j * M + i)] = v;
            sum += v * d * d;
        }
    for (auto& v : k) v /= sum;
    fft2d(k, M, -1);
    return k;
}

// phi * F on the grid (F real), as Delta^2 sum phi(x - y) F(y).
std::vector<double> convolve(const GridSpec& g, const std::vector<cplx>& khat, const std::vector<double>& F) {
    int64_t M = g.M;
    std::vector<cplx> a(F.begin(), F.end());
    fft2d(a, M, -1);
    double scale = g.delta() * g.delta() / static_cast<double>(M * M);
    for (size_t n = 0; n < a.size(); ++n) a[n] *= khat[n] * scale;
    fft2d(a, M, +1);
    std::vector<double> out(a.size());
    for (size_t n = 0; n < a.size(); ++n) out[n] = a[n].real();
    return out;
}

struct BoxWeight {
    std::vector<cplx> khat;
    std::vector<double> wB;     // (phi * 1_B) / max
    std::vector<double> phiB;   // phi * 1_B
};

bool in_box(const GridSpec& g, int64_t i, int64_t j) {
    double h = static_cast<double>(g.R) / 2.0;
    double x = g.coord(i), y = g.coord(j);
    return x >= -h && x < h && y >= -h && y < h;
}

const BoxWeight& box_weight(const GridSpec& g) {
    static std::mutex mu;
    static std::map<std::pair<int64_t, int64_t>, BoxWeight> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(g.R, g.M);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    BoxWeight bw;
    bw.khat = kernel_hat(g);
    std::vector<double> ind(static_cast<size_t>(g.M * g.M), 0.0);
    for (int64_t j = 0; j < g.M; ++j)
        for (int64_t i = 0; i < g.M; ++i)
            if (in_box(g, i, j)) ind[static_cast<size_t>(j * g.M + i)] = 1.0;
    bw.phiB = convolve(g, bw.khat, ind);
    double mx = *std::max_element(bw.phiB.begin(), bw.phiB.end());
    bw.wB.resize(bw.phiB.size());
    for (size_t n = 0; n < bw.phiB.size(); ++n) bw.wB[n] = bw.phiB[n] / mx;
    return cache[key] = std::move(bw);
}

}  // namespace

BilinearPair make_pair(const TorusField& g1, const Cap& tau1, const TorusField& g2, const Cap& tau2, int64_t K) {
    if (!(g1.grid == g2.grid)) throw Error("bilinear pair: fields on different grids");
    BilinearPair pr;
    pr.Rs = g1.grid.R;
    pr.K = K;
    pr.tau1 = tau1;
    pr.tau2 = tau2;
    pr.separation = cap_gap(tau1, tau2);
    if (pr.separation < 1.0 / static_cast<double>(K) - 1e-12)
        throw Error("bilinear pair: caps closer than 1/K, the separation hypothesis fails");
    auto check = [](const TorusField& g, const Cap& t) {
        for (const auto& m : g.modes) {
            Vec2 xi = g.freq(m);
            if (xi.x < t.lo() - 1e-12 || xi.x > t.hi() + 1e-12) throw BandError("bilinear pair: mode outside its cap", xi);
        }
    };
    check(g1, tau1);
    check(g2, tau2);
    pr.g1 = with_samples(g1);
    pr.g2 = with_samples(g2);
    return pr;
}

BilinearPair random_pair(int64_t Rs, int64_t K, uint64_t seed) {
    if (K < 2 || !is_pow2(K)) throw Error("K must be a power of two >= 2");
    GridSpec g = GridSpec::make(Rs);
    Rng rng(seed);
    auto caps = caps_at_scale(1.0 / static_cast<double>(K));
    auto n = static_cast<int64_t>(caps.size());
    int64_t i = 0, j = 0;
    do {
        i = rng.below(n);
        j = rng.below(n);
    } while (std::abs(i - j) < 2);
    if (i > j) std::swap(i, j);
    auto m1 = modes_in_cap(g, caps[static_cast<size_t>(i)]);
    auto m2 = modes_in_cap(g, caps[static_cast<size_t>(j)]);
    for (auto& m : m1) m.a = rng.unit_phase();
    for (auto& m : m2) m.a = rng.unit_phase();
    return make_pair(synthesize(g, Band::Parabola, m1), caps[static_cast<size_t>(i)],
                     synthesize(g, Band::Parabola, m2), caps[static_cast<size_t>(j)], K);
}

BilinearResult bilinear_check(const BilinearPair& pair, const GridMeasure& Y, bool orthogonality) {
    const GridSpec& g = pair.g1.grid;
    if (!(Y.grid == g)) throw Error("bilinear_check: Y lives on a different grid");
    if (pair.separation < 1.0 / static_cast<double>(pair.K) - 1e-12)
        throw Error("bilinear_check: caps closer than 1/K");
    double inv = 1.0 / g.delta();
    auto per_unit = static_cast<int64_t>(std::llround(inv));
    if (std::abs(inv - static_cast<double>(per_unit)) > 1e-12) throw Error("bilinear_check: 1/Delta must be an integer");
    int64_t M = g.M;
    double d2 = g.delta() * g.delta();
    const BoxWeight& bw = box_weight(g);

    std::vector<double> F(static_cast<size_t>(M * M));
    std::vector<char> inY(F.size(), 0);
    for (size_t n = 0; n < F.size(); ++n) F[n] = std::norm((*pair.g1.samples)[n] * (*pair.g2.samples)[n]);
    Y.for_each([&](int64_t i, int64_t j, double m) {
        if (m > 0.0) inY[static_cast<size_t>(j * M + i)] = 1;
    });
    auto Fphi = convolve(g, bw.khat, F);

    BilinearResult r;
    r.B_area = static_cast<double>(g.R) * static_cast<double>(g.R);
    double maxF = -1.0;
    for (int64_t j = 0; j < M; ++j)
        for (int64_t i = 0; i < M; ++i) {
            auto n = static_cast<size_t>(j * M + i);
            double w = bw.wB[n];
            r.N1 += d2 * std::norm((*pair.g1.samples)[n]) * w;
            r.N2 += d2 * std::norm((*pair.g2.samples)[n]) * w;
            r.C_J += d2 * F[n] * bw.phiB[n];
            if (!in_box(g, i, j)) continue;
            r.I_B += d2 * F[n];
            if (inY[n]) r.I_BY += d2 * F[n];
            if (F[n] > maxF) {
                maxF = F[n];
                r.witness = {g.coord(i), g.coord(j)};
            }
        }
    double phiB_int = r.C_J;
    // Unit cubes: per_unit x per_unit blocks of grid points inside B.
    auto h = static_cast<int64_t>(g.R / 2);
    double cube_pts = static_cast<double>(per_unit * per_unit);
    for (int64_t qy = -h; qy < h; ++qy)
        for (int64_t qx = -h; qx < h; ++qx) {
            double fmax = 0.0, cmin = std::numeric_limits<double>::infinity();
            int64_t ycount = 0;
            for (int64_t b = 0; b < per_unit; ++b)
                for (int64_t a = 0; a < per_unit; ++a) {
                    int64_t i = pos_mod(qx * per_unit + a, M), j = pos_mod(qy * per_unit + b, M);
                    auto n = static_cast<size_t>(j * M + i);
                    fmax = std::max(fmax, F[n]);
                    cmin = std::min(cmin, Fphi[n]);
                    ycount += inY[n];
                }
            r.rho_Y = std::max(r.rho_Y, static_cast<double>(ycount) / cube_pts);
            if (cmin > 0.0) r.Lambda = std::max(r.Lambda, fmax / cmin);
            else if (fmax > 0.0) r.Lambda = std::numeric_limits<double>::infinity();
        }
    double NN = r.N1 * r.N2;
    r.C_bil = NN > 0.0 ? r.I_B * r.B_area / NN : 0.0;
    r.C_J = NN > 0.0 ? phiB_int * r.B_area / NN : 0.0;
    r.C_Y = (NN > 0.0 && r.rho_Y > 0.0) ? r.I_BY * r.B_area / (r.rho_Y * NN) : 0.0;
    r.chain = r.rho_Y * r.Lambda * phiB_int;
    r.l4_holds = r.I_BY <= r.chain * (1.0 + 1e-9) + 1e-300;

    if (orthogonality) {
        double sth = 1.0 / std::sqrt(static_cast<double>(g.R));
        auto ratio = [&](const TorusField& gt) {
            std::map<int64_t, std::vector<Mode>> pieces;
            double dx = g.dxi();
            for (const auto& m : gt.modes) pieces[cap_index_of(dx * static_cast<double>(m.n1), sth)].push_back(m);
            std::vector<double> S(static_cast<size_t>(M * M), 0.0);
            for (const auto& [k, md] : pieces) {
                auto v = sample_modes(md, M);
                for (size_t n = 0; n < S.size(); ++n) S[n] += std::norm(v[n]);
            }
            double num = 0.0, den = 0.0;
            for (size_t n = 0; n < S.size(); ++n) {
                num += d2 * std::norm((*gt.samples)[n]) * bw.wB[n];
                den += d2 * S[n] * bw.wB[n];
            }
            return den > 0.0 ? num / den : 0.0;
        };
        r.orth1 = ratio(pair.g1);
        r.orth2 = ratio(pair.g2);
    }
    return r;
}

void write_constants_csv(const std::vector<ConstantRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os.precision(17);
    os << "R,K,s,pair_id,constant,witness_x,witness_y\n";
    for (const auto& r : rows)
        os << r.R << ',' << r.K << ',' << r.s << ',' << r.pair_id << ',' << r.constant << ',' << r.witness.x << ','
           << r.witness.y << '\n';
}

}  // namespace parasq
