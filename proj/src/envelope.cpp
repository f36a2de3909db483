#include "parasq/envelope.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace parasq {

double smooth_step(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
}

double window_bump(double x, double eps) {
    double ax = std::abs(x);
    if (ax <= 0.5 - eps) return 1.0;
    if (ax >= 0.5 + eps) return 0.0;
    return smooth_step((0.5 + eps - ax) / (2.0 * eps));
}

namespace {

struct WindowSplit {
    int64_t k = 0;       // cap containing xi1
    double w = 1.0;      // its weight
    int64_t nb = -1;     // neighbour receiving 1 - w, or -1
};

WindowSplit split_window(double xi1, double s, double eps) {
    auto n = static_cast<int64_t>(std::llround(2.0 / s));
    WindowSplit out;
    out.k = cap_index_of(xi1, s);
    double c = -1.0 + (static_cast<double>(out.k) + 0.5) * s;
    double u = (xi1 - c) / s;
    if (u == 0.0) return out;
    int64_t nb = out.k + (u > 0.0 ? 1 : -1);
    if (nb < 0 || nb >= n) return out;
    out.w = window_bump(u, eps);
    if (out.w < 1.0) out.nb = nb;
    return out;
}

}  // namespace

double cap_window(const Cap& cap, double xi1, double eps) {
    WindowSplit w = split_window(xi1, cap.s, eps);
    if (cap.k == w.k) return w.w;
    if (cap.k == w.nb) return 1.0 - w.w;
    return 0.0;
}

std::vector<CapPiece> cap_decompose(const TorusField& f, double s) {
    if (s * std::sqrt(static_cast<double>(f.grid.R)) < 1.0 - 1e-12)
        throw Error("cap_decompose: scale " + std::to_string(s) + " is finer than R^{-1/2}");
    Band band = f.band == Band::Annulus ? Band::Annulus : Band::Parabola;
    auto caps = caps_at_scale(s, band);
    std::vector<CapPiece> pieces(caps.size());
    for (size_t k = 0; k < caps.size(); ++k) pieces[k].cap = caps[k];
    double d = f.grid.dxi();
    for (const auto& m : f.modes) {
        WindowSplit w = split_window(d * static_cast<double>(m.n1), s, kWindowEps);
        if (w.w != 0.0) pieces[static_cast<size_t>(w.k)].modes.push_back({m.n1, m.n2, m.a * w.w});
        if (w.nb >= 0) pieces[static_cast<size_t>(w.nb)].modes.push_back({m.n1, m.n2, m.a * (1.0 - w.w)});
    }
    return pieces;
}

TorusField packet_field(const GridSpec& g, const std::vector<Cap>& caps, bool sample) {
    auto lattice = band_lattice(g, Band::Parabola);
    double d = g.dxi();
    std::vector<Mode> modes;
    for (const auto& cap : caps) {
        std::vector<Mode> piece;
        double total = 0.0;
        for (const auto& m : lattice) {
            double b = window_bump((d * static_cast<double>(m.n1) - cap.c) / cap.s);
            if (b == 0.0) continue;
            piece.push_back({m.n1, m.n2, cplx(b, 0.0)});
            total += b;
        }
        if (total == 0.0) throw Error("packet_field: cap " + cap.id() + " holds no lattice point");
        for (auto& m : piece) m.a /= total;
        modes.insert(modes.end(), piece.begin(), piece.end());
    }
    std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.n2 != b.n2 ? a.n2 < b.n2 : a.n1 < b.n1; });
    std::vector<Mode> merged;
    for (const auto& m : modes) {
        if (!merged.empty() && merged.back().n1 == m.n1 && merged.back().n2 == m.n2)
            merged.back().a += m.a;
        else
            merged.push_back(m);
    }
    return synthesize(g, Band::Parabola, std::move(merged), sample);
}

int64_t square_grid_size(const GridSpec& g, const std::vector<CapPiece>& pieces) {
    int64_t spread = 0;
    for (const auto& pc : pieces) {
        if (pc.modes.empty()) continue;
        auto [a1, b1] = std::minmax_element(pc.modes.begin(), pc.modes.end(),
                                            [](const Mode& x, const Mode& y) { return x.n1 < y.n1; });
        auto [a2, b2] = std::minmax_element(pc.modes.begin(), pc.modes.end(),
                                            [](const Mode& x, const Mode& y) { return x.n2 < y.n2; });
        spread = std::max({spread, b1->n1 - a1->n1, b2->n2 - a2->n2});
    }
    auto res = static_cast<int64_t>(std::ceil(8.0 * g.L / std::sqrt(static_cast<double>(g.R))));
    int64_t m = next_pow2(std::max(2 * spread + 1, res));
    return std::min(m, g.M);
}

SquareGrid square_function(const TorusField& f, double s) {
    auto pieces = cap_decompose(f, s);
    SquareGrid sq;
    sq.m = square_grid_size(f.grid, pieces);
    sq.h = f.grid.L / static_cast<double>(sq.m);
    sq.S.assign(static_cast<size_t>(sq.m * sq.m), 0.0);
    for (const auto& pc : pieces) {
        if (pc.modes.empty()) continue;
        auto v = sample_modes(pc.modes, sq.m);
        for (size_t n = 0; n < v.size(); ++n) sq.S[n] += std::norm(v[n]);
    }
    return sq;
}

double square_function_norm(const SquareGrid& sq, double p) {
    double acc = 0.0;
    for (double v : sq.S) acc += std::pow(v, p / 2.0);
    return std::pow(acc * sq.h * sq.h, 1.0 / p);
}

// ---------------------------------------------------------------- kappa

double kappa_value(double HU, double maxHT, double s, int64_t R, double p) {
    if (HU <= 0.0) return 0.0;
    double T = 1.0 / (s * s * s);
    double U = static_cast<double>(R) * static_cast<double>(R) * s;
    return std::pow(maxHT / T, 0.25) * std::pow(HU / U, 1.0 / p - 0.25);
}

bool tile_contains(const Locator& loc, TileIndex z, Vec2 x) {
    const Cap& cap = loc.cap();
    double y1 = cap.s * x.x + 2.0 * cap.c * cap.s * x.y;
    double y2 = cap.s * cap.s * x.y;
    int64_t N = loc.block();
    double half = N > 1 ? static_cast<double>(N) / 2.0 : 0.5;
    double c1 = N > 1 ? static_cast<double>(N * z.z1) - 0.5 : static_cast<double>(z.z1);
    double c2 = N > 1 ? static_cast<double>(N * z.z2) - 0.5 : static_cast<double>(z.z2);
    auto Q = static_cast<double>(loc.period_q() * N), A = static_cast<double>(loc.period_a() * N);
    auto P = static_cast<double>(loc.period_p() * N);
    double d1 = y1 - c1, d2 = y2 - c2;
    double w = std::floor((d2 + half) / P);
    d2 -= w * P;
    d1 -= w * A;
    if (!(d2 < half)) return false;
    double v = std::floor((d1 + half) / Q);
    d1 -= v * Q;
    return d1 < half;
}

namespace {

std::vector<TileIndex> tubes_in_envelope(const Locator& tube_loc, TileIndex u, int64_t N) {
    std::vector<TileIndex> out;
    if (N == 1) {
        out.push_back(tube_loc.reduce(u));
        return out;
    }
    for (int64_t o2 = -N / 2; o2 < N / 2; ++o2)
        for (int64_t o1 = -N / 2; o1 < N / 2; ++o1) out.push_back(tube_loc.reduce({N * u.z1 + o1, N * u.z2 + o2}));
    return out;
}

void finish_cap(CapKappa& ck, const Locator& tl, const Locator& el, const std::vector<double>& HU,
                const std::vector<std::pair<int64_t, double>>& tube_sums) {
    std::vector<double> mx(HU.size(), 0.0);
    std::vector<int64_t> arg(HU.size(), -1);
    for (const auto& [flat, h] : tube_sums) {
        TileIndex u = tl.envelope_of(tl.unflat(flat));
        auto uf = static_cast<size_t>(el.flat(u));
        if (h > mx[uf]) {
            mx[uf] = h;
            arg[uf] = flat;
        }
    }
    for (size_t uf = 0; uf < HU.size(); ++uf) {
        if (HU[uf] <= 0.0) continue;
        EnvelopeStat st;
        st.u = el.unflat(static_cast<int64_t>(uf));
        st.HU = HU[uf];
        st.maxHT = mx[uf];
        st.argT = arg[uf] >= 0 ? tl.unflat(arg[uf]) : TileIndex{};
        ck.envelopes.push_back(st);
    }
}

// Atoms in row-major order; each adds to its tube and envelope.
void stream_cap(const GridMeasure& H, const std::vector<Vec2>& xs, CapKappa& ck, const Locator& tl,
                const Locator& el, std::vector<double>& tube_buf) {
    std::vector<double> HU(static_cast<size_t>(el.count()), 0.0);
    std::vector<std::pair<int64_t, double>> sums;
    const int64_t kMaxArray = int64_t{1} << 25;
    bool use_array = tl.count() <= kMaxArray;
    std::vector<int64_t> touched;
    std::vector<std::pair<int64_t, double>> entries;
    auto add = [&](Vec2 x, double m) {
        TileIndex zt = tl.locate(x);
        int64_t f = tl.flat(zt);
        if (use_array) {
            auto& slot = tube_buf[static_cast<size_t>(f)];
            if (slot == 0.0) touched.push_back(f);
            slot += m;
        } else {
            entries.emplace_back(f, m);
        }
        HU[static_cast<size_t>(el.flat(tl.envelope_of(zt)))] += m;
    };
    if (!xs.empty()) {
        size_t n = 0;
        H.for_each([&](int64_t, int64_t, double m) { add(xs[n++], m); });
    } else {
        const GridSpec& g = H.grid;
        H.for_each([&](int64_t i, int64_t j, double m) { add({g.coord(i), g.coord(j)}, m); });
    }
    if (use_array) {
        std::sort(touched.begin(), touched.end());
        for (int64_t f : touched) {
            sums.emplace_back(f, tube_buf[static_cast<size_t>(f)]);
            tube_buf[static_cast<size_t>(f)] = 0.0;
        }
    } else {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [f, m] : entries) {
            if (!sums.empty() && sums.back().first == f)
                sums.back().second += m;
            else
                sums.emplace_back(f, m);
        }
    }
    finish_cap(ck, tl, el, HU, sums);
}

void uniform_cap(const GridMeasure& H, CapKappa& ck, const Locator& tl, const Locator& el) {
    double d = H.grid.delta();
    double per_tube = H.uniform_mass * std::round(1.0 / (ck.cap.s * ck.cap.s * ck.cap.s * d * d));
    int64_t N = el.block();
    for (int64_t uf = 0; uf < el.count(); ++uf) {
        EnvelopeStat st;
        st.u = el.unflat(uf);
        st.HU = per_tube * static_cast<double>(N * N);
        st.maxHT = per_tube;
        st.argT = tl.reduce({N * st.u.z1, N * st.u.z2});
        if (st.HU > 0.0) ck.envelopes.push_back(st);
    }
}

// Row prefix sums of a dense measure; tube sums as sums of row windows.
void prefix_cap(const GridMeasure& H, const std::vector<double>& prefix, CapKappa& ck, const Locator& tl,
                const Locator& el) {
    const GridSpec& g = H.grid;
    double d = g.delta();
    double s = ck.cap.s, c = ck.cap.c;
    int64_t M = g.M;
    std::vector<double> HU(static_cast<size_t>(el.count()), 0.0);
    std::vector<std::pair<int64_t, double>> sums;
    auto row_window = [&](int64_t j, int64_t a, int64_t b) {
        const double* P = prefix.data() + static_cast<size_t>(pos_mod(j, M) * (M + 1));
        int64_t len = b - a;
        if (len <= 0) return 0.0;
        int64_t a0 = pos_mod(a, M);
        if (a0 + len <= M) return P[a0 + len] - P[a0];
        return (P[M] - P[a0]) + P[a0 + len - M];
    };
    for (int64_t f = 0; f < tl.count(); ++f) {
        TileIndex z = tl.unflat(f);
        double z1 = static_cast<double>(z.z1), z2 = static_cast<double>(z.z2);
        auto j0 = static_cast<int64_t>(std::ceil((z2 - 0.5) / (s * s * d)));
        auto j1 = static_cast<int64_t>(std::ceil((z2 + 0.5) / (s * s * d)));
        double h = 0.0;
        for (int64_t j = j0; j < j1; ++j) {
            double x2 = static_cast<double>(j) * d;
            auto i0 = static_cast<int64_t>(std::ceil((z1 - 0.5 - 2.0 * c * s * x2) / (s * d)));
            auto i1 = static_cast<int64_t>(std::ceil((z1 + 0.5 - 2.0 * c * s * x2) / (s * d)));
            h += row_window(j, i0, i1);
        }
        if (h > 0.0) {
            sums.emplace_back(f, h);
            HU[static_cast<size_t>(el.flat(tl.envelope_of(z)))] += h;
        }
    }
    finish_cap(ck, tl, el, HU, sums);
}

// Mass of the grid points inside one tile, by scanning the tile's bounding box. The box is narrower than
// the torus period (L >= 4R), so no grid point is visited twice.
double scan_tile(const GridSpec& g, const std::vector<double>& mass, const Locator& loc, TileIndex z) {
    auto corners = tile_corners(loc.cap(), loc.kind(), z, g.R);
    double x0 = corners[0].x, x1 = x0, y0 = corners[0].y, y1 = y0;
    for (auto v : corners) {
        x0 = std::min(x0, v.x), x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y), y1 = std::max(y1, v.y);
    }
    double d = g.delta();
    double h = 0.0;
    for (auto j = static_cast<int64_t>(std::floor(y0 / d)); j <= static_cast<int64_t>(std::ceil(y1 / d)); ++j) {
        const double* row = mass.data() + static_cast<size_t>(pos_mod(j, g.M) * g.M);
        for (auto i = static_cast<int64_t>(std::floor(x0 / d)); i <= static_cast<int64_t>(std::ceil(x1 / d)); ++i) {
            double m = row[pos_mod(i, g.M)];
            if (m != 0.0 && tile_contains(loc, z, {static_cast<double>(i) * d, static_cast<double>(j) * d})) h += m;
        }
    }
    return h;
}

void exhaustive_cap(const GridSpec& g, const std::vector<double>& mass, CapKappa& ck, const Locator& tl,
                    const Locator& el) {
    int64_t N = el.block();
    for (int64_t uf = 0; uf < el.count(); ++uf) {
        TileIndex u = el.unflat(uf);
        double hu = scan_tile(g, mass, el, u);
        if (hu <= 0.0) continue;
        EnvelopeStat st;
        st.u = u;
        st.HU = hu;
        int64_t best_flat = -1;
        for (TileIndex t : tubes_in_envelope(tl, u, N)) {
            double ht = scan_tile(g, mass, tl, t);
            int64_t tf = tl.flat(t);
            if (ht > st.maxHT || (ht == st.maxHT && ht > 0.0 && tf < best_flat)) {
                st.maxHT = ht;
                st.argT = t;
                best_flat = tf;
            }
        }
        ck.envelopes.push_back(st);
    }
}

}  // namespace

KappaTable build_kappa_table(const GridMeasure& H, KappaPath path) {
    const GridSpec& g = H.grid;
    KappaTable table;
    table.grid = g;
    table.scales = dyadic_scales(g.R);
    int64_t ncaps = 0;
    for (double s : table.scales) ncaps += static_cast<int64_t>(std::llround(2.0 / s));
    double work = static_cast<double>(H.support_size()) * static_cast<double>(ncaps);
    bool big = work > 1.5e9;
    bool dense_like = H.storage != GridMeasure::Storage::Sparse;
    if (path == KappaPath::Auto) path = (big && dense_like) ? KappaPath::Prefix : KappaPath::Stream;
    if (path == KappaPath::Prefix && !dense_like) path = KappaPath::Stream;

    std::vector<Vec2> xs;
    std::vector<double> ms;
    std::vector<double> mass;
    if (path == KappaPath::Exhaustive) {
        mass.assign(static_cast<size_t>(g.M * g.M), 0.0);
        H.for_each([&](int64_t i, int64_t j, double m) { mass[static_cast<size_t>(j * g.M + i)] = m; });
    } else if (H.storage == GridMeasure::Storage::Sparse) {
        H.for_each([&](int64_t i, int64_t j, double m) {
            xs.push_back({g.coord(i), g.coord(j)});
            ms.push_back(m);
        });
    }
    std::vector<double> prefix;
    if (path == KappaPath::Prefix && H.storage == GridMeasure::Storage::Dense) {
        prefix.assign(static_cast<size_t>(g.M * (g.M + 1)), 0.0);
        for (int64_t j = 0; j < g.M; ++j) {
            double* P = prefix.data() + static_cast<size_t>(j * (g.M + 1));
            const double* row = H.dense.data() + static_cast<size_t>(j * g.M);
            for (int64_t i = 0; i < g.M; ++i) P[i + 1] = P[i] + row[i];
        }
    }
    switch (path) {
        case KappaPath::Stream: table.path = "stream"; break;
        case KappaPath::Prefix: table.path = H.storage == GridMeasure::Storage::Uniform ? "uniform" : "prefix"; break;
        case KappaPath::Exhaustive: table.path = "exhaustive"; break;
        case KappaPath::Auto: break;
    }

    std::vector<double> tube_buf;
    for (double s : table.scales) {
        auto caps = caps_at_scale(s);
        std::vector<CapKappa> row(caps.size());
        for (size_t k = 0; k < caps.size(); ++k) {
            row[k].cap = caps[k];
            Locator tl(caps[k], TileKind::Tube, g), el(caps[k], TileKind::Envelope, g);
            if (path == KappaPath::Stream) {
                if (tl.count() <= (int64_t{1} << 25) && static_cast<int64_t>(tube_buf.size()) < tl.count())
                    tube_buf.assign(static_cast<size_t>(tl.count()), 0.0);
                stream_cap(H, xs, row[k], tl, el, tube_buf);
            } else if (path == KappaPath::Prefix) {
                if (H.storage == GridMeasure::Storage::Uniform)
                    uniform_cap(H, row[k], tl, el);
                else
                    prefix_cap(H, prefix, row[k], tl, el);
            } else {
                exhaustive_cap(g, mass, row[k], tl, el);
            }
        }
        table.caps.push_back(std::move(row));
    }
    return table;
}

KappaMax kappa_max(const KappaTable& table, double p) {
    KappaMax out;
    int64_t R = table.grid.R;
    for (size_t jj = 0; jj < table.scales.size(); ++jj) {
        double s = table.scales[jj];
        double best = 0.0;
        for (const auto& ck : table.caps[jj])
            for (const auto& st : ck.envelopes) {
                double v = kappa_value(st.HU, st.maxHT, s, R, p);
                best = std::max(best, v);
                if (v > out.value) {
                    out.value = v;
                    out.witness = {v, s, ck.cap, st.u, st.argT};
                }
            }
        out.per_scale.push_back(best);
    }
    return out;
}

double kappa_single(const GridMeasure& H, const Cap& cap, TileIndex u, double p) {
    const GridSpec& g = H.grid;
    Locator tl(cap, TileKind::Tube, g), el(cap, TileKind::Envelope, g);
    std::vector<Vec2> xs;
    std::vector<double> ms;
    H.for_each([&](int64_t i, int64_t j, double m) {
        xs.push_back({g.coord(i), g.coord(j)});
        ms.push_back(m);
    });
    double hu = 0.0, mx = 0.0;
    for (size_t n = 0; n < xs.size(); ++n)
        if (tile_contains(el, u, xs[n])) hu += ms[n];
    for (TileIndex t : tubes_in_envelope(tl, el.reduce(u), el.block())) {
        double ht = 0.0;
        for (size_t n = 0; n < xs.size(); ++n)
            if (tile_contains(tl, t, xs[n])) ht += ms[n];
        mx = std::max(mx, ht);
    }
    return kappa_value(hu, mx, cap.s, g.R, p);
}

// ------------------------------------------------------------ envelopes

EnvelopeData compute_envelope_data(const TorusField& f) {
    const GridSpec& g = f.grid;
    EnvelopeData env;
    env.grid = g;
    env.scales = dyadic_scales(g.R);
    double s_theta = env.scales.back();
    auto pieces = cap_decompose(f, s_theta);
    env.m = square_grid_size(g, pieces);
    env.h = g.L / static_cast<double>(env.m);
    int64_t m = env.m;
    env.S.assign(static_cast<size_t>(m * m), 0.0);

    size_t J = env.scales.size() - 1;
    std::vector<std::vector<Locator>> locs(env.scales.size());
    env.cells.resize(env.scales.size());
    for (size_t jj = 0; jj < env.scales.size(); ++jj) {
        for (const auto& cap : caps_at_scale(env.scales[jj])) {
            locs[jj].emplace_back(cap, TileKind::Envelope, g);
            env.cells[jj].emplace_back(static_cast<size_t>(locs[jj].back().count()), 0.0);
        }
    }
    std::vector<double> xc(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) xc[static_cast<size_t>(i)] = env.h * static_cast<double>(i < m / 2 ? i : i - m);
    double h2 = env.h * env.h;

    int64_t nthreads = thread_count();
    for (size_t start = 0; start < pieces.size(); start += static_cast<size_t>(nthreads)) {
        size_t stop = std::min(pieces.size(), start + static_cast<size_t>(nthreads));
        std::vector<std::vector<double>> g2(stop - start);
        std::vector<std::vector<std::vector<double>>> part(stop - start);
        parallel_for(static_cast<int64_t>(stop - start), [&](int64_t t) {
            const auto& pc = pieces[start + static_cast<size_t>(t)];
            auto& gv = g2[static_cast<size_t>(t)];
            auto& pt = part[static_cast<size_t>(t)];
            pt.resize(env.scales.size());
            if (pc.modes.empty()) return;
            auto v = sample_modes(pc.modes, m);
            gv.resize(v.size());
            for (size_t n = 0; n < v.size(); ++n) gv[n] = std::norm(v[n]);
            for (size_t jj = 0; jj < env.scales.size(); ++jj) {
                int64_t kt = pc.cap.k >> (J - jj);
                const Locator& loc = locs[jj][static_cast<size_t>(kt)];
                auto& cells = pt[jj];
                cells.assign(static_cast<size_t>(loc.count()), 0.0);
                for (int64_t j = 0; j < m; ++j)
                    for (int64_t i = 0; i < m; ++i) {
                        TileIndex u = loc.locate({xc[static_cast<size_t>(i)], xc[static_cast<size_t>(j)]});
                        cells[static_cast<size_t>(loc.flat(u))] += gv[static_cast<size_t>(j * m + i)] * h2;
                    }
            }
        });
        for (size_t t = 0; t < stop - start; ++t) {
            const auto& pc = pieces[start + t];
            if (pc.modes.empty()) continue;
            for (size_t n = 0; n < env.S.size(); ++n) env.S[n] += g2[t][n];
            for (size_t jj = 0; jj < env.scales.size(); ++jj) {
                auto kt = static_cast<size_t>(pc.cap.k >> (J - jj));
                auto& dst = env.cells[jj][kt];
                const auto& src = part[t][jj];
                for (size_t n = 0; n < dst.size(); ++n) dst[n] += src[n];
            }
        }
    }
    return env;
}

double weighted_cell_integral(const EnvelopeData& env, size_t scale, const Locator& loc, TileIndex u) {
    static const std::vector<std::pair<int64_t, int64_t>> offsets = [] {
        std::vector<std::pair<int64_t, int64_t>> o;
        for (int64_t r = 0; r <= 2; ++r)
            for (int64_t d2 = -r; d2 <= r; ++d2)
                for (int64_t d1 = -r; d1 <= r; ++d1)
                    if (std::max(std::abs(d1), std::abs(d2)) == r) o.emplace_back(d1, d2);
        return o;
    }();
    const auto& cells = env.cells[scale][static_cast<size_t>(loc.cap().k)];
    std::vector<int64_t> seen;
    double acc = 0.0;
    for (auto [d1, d2] : offsets) {
        int64_t f = loc.flat(loc.reduce({u.z1 + d1, u.z2 + d2}));
        if (std::find(seen.begin(), seen.end(), f) != seen.end()) continue;
        seen.push_back(f);
        double w = std::pow(1.0 + static_cast<double>(std::max(std::abs(d1), std::abs(d2))), -10.0);
        acc += w * cells[static_cast<size_t>(f)];
    }
    double total = std::accumulate(cells.begin(), cells.end(), 0.0);
    return acc + std::pow(4.0, -10.0) * total;
}

std::vector<double> weighted_lp_pows(const TorusField& f, const GridMeasure& H, const std::vector<double>& ps) {
    std::vector<double> out(ps.size(), 0.0);
    const GridSpec& g = H.grid;
    if (!(g == f.grid)) throw Error("field and weight live on different grids");
    bool direct = H.storage == GridMeasure::Storage::Sparse && !f.has_samples() &&
                  static_cast<double>(H.atoms.size()) * static_cast<double>(f.modes.size()) < 4e8;
    if (direct) {
        std::vector<Vec2> xs;
        xs.reserve(H.atoms.size());
        for (const auto& a : H.atoms) xs.push_back({g.coord(a.i), g.coord(a.j)});
        auto vals = point_eval(f.modes, g.L, xs);
        for (size_t k = 0; k < ps.size(); ++k)
            for (size_t n = 0; n < vals.size(); ++n) out[k] += H.atoms[n].mass * std::pow(std::abs(vals[n]), ps[k]);
        return out;
    }
    TorusField fs = with_samples(f);
    H.for_each([&](int64_t i, int64_t j, double m) {
        double a = std::abs(fs.at(i, j));
        for (size_t k = 0; k < ps.size(); ++k) out[k] += m * std::pow(a, ps[k]);
    });
    return out;
}

RatioReport assemble_ratio(const EnvelopeData& env, const KappaTable& table, double lhs_pow, double p) {
    RatioReport r;
    r.R = env.grid.R;
    r.p = p;
    r.lhs_pow = lhs_pow;
    r.lhs = std::pow(lhs_pow, 1.0 / p);
    r.kmax = kappa_max(table, p);
    SquareGrid sq{env.m, env.h, env.S};
    r.sq_norm = square_function_norm(sq, p);
    r.sq_rhs = (r.kmax.value + std::pow(static_cast<double>(r.R), -40.0)) * r.sq_norm;
    r.ratio_sq = r.lhs / r.sq_rhs;
    for (size_t jj = 0; jj < table.scales.size(); ++jj) {
        double s = table.scales[jj];
        for (const auto& ck : table.caps[jj]) {
            if (ck.envelopes.empty()) continue;
            Locator loc(ck.cap, TileKind::Envelope, env.grid);
            for (const auto& st : ck.envelopes) {
                EnvTerm t;
                t.s = s;
                t.cap = ck.cap;
                t.u = st.u;
                t.kappa = kappa_value(st.HU, st.maxHT, s, r.R, p);
                t.area = loc.area();
                t.g_wu = weighted_cell_integral(env, jj, loc, st.u);
                t.term = std::pow(t.kappa, p) * std::pow(t.area, 1.0 - p / 2.0) * std::pow(t.g_wu, p / 2.0);
                r.env_rhs += t.term;
                r.terms.push_back(t);
            }
        }
    }
    r.ratio_env = r.env_rhs > 0.0 ? r.lhs_pow / r.env_rhs : 0.0;
    return r;
}

RatioReport verify_weighted_sq(const TorusField& f, const GridMeasure& H, double p) {
    if (!(p >= 2.0 && p <= 4.0)) throw Error("p must lie in [2, 4]");
    if (H.kind != MeasureKind::Weight) throw Error("verify_weighted_sq needs a weight with density <= 1");
    auto env = compute_envelope_data(f);
    auto table = build_kappa_table(H);
    double lhs = weighted_lp_pows(f, H, {p})[0];
    return assemble_ratio(env, table, lhs, p);
}

void write_terms_csv(const RatioReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os.precision(17);
    os << "s,cap_id,c,u1,u2,kappa,area,g_wu,term\n";
    for (const auto& t : r.terms)
        os << t.s << ',' << t.cap.id() << ',' << t.cap.c << ',' << t.u.z1 << ',' << t.u.z2 << ',' << t.kappa << ','
           << t.area << ',' << t.g_wu << ',' << t.term << '\n';
}

}  // namespace parasq
