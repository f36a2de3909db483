#include "parasq/geometry.hpp"

#include <algorithm>
#include <fstream>

namespace parasq {

std::string Cap::id() const { return "j" + std::to_string(level) + "k" + std::to_string(k); }

Cap make_cap(double s, double c, Band band) {
    if (!(s > 0.0) || s > 1.0) throw Error("cap scale must lie in (0, 1]");
    Cap cap;
    cap.s = s;
    cap.c = c;
    cap.band = band;
    cap.level = static_cast<int>(std::lround(-std::log2(s)));
    cap.k = static_cast<int64_t>(std::floor((c + 1.0) / s));
    return cap;
}

std::vector<double> dyadic_scales(int64_t R) {
    if (!is_pow4(R)) throw Error("R must be a power of 4");
    std::vector<double> out;
    int J = ilog2(R) / 2;
    for (int j = 0; j <= J; ++j) out.push_back(std::ldexp(1.0, -j));
    return out;
}

std::vector<Cap> caps_at_scale(double s, Band band) {
    double inv = 1.0 / s;
    auto n = static_cast<int64_t>(std::llround(2.0 * inv));
    if (std::abs(2.0 * inv - static_cast<double>(n)) > 1e-12 || !is_pow2(n))
        throw Error("caps_at_scale: scale must be dyadic and <= 1");
    std::vector<Cap> out;
    out.reserve(static_cast<size_t>(n));
    int level = static_cast<int>(std::lround(std::log2(inv)));
    for (int64_t k = 0; k < n; ++k) {
        Cap cap;
        cap.level = level;
        cap.k = k;
        cap.s = s;
        cap.c = -1.0 + (static_cast<double>(k) + 0.5) * s;
        cap.band = band;
        out.push_back(cap);
    }
    return out;
}

int64_t cap_index_of(double xi1, double s) {
    auto n = static_cast<int64_t>(std::llround(2.0 / s));
    auto k = static_cast<int64_t>(std::floor((xi1 + 1.0) / s));
    return std::clamp<int64_t>(k, 0, n - 1);
}

CapTransforms cap_transforms(const Cap& cap) {
    CapTransforms t;
    double s = cap.s, c = cap.c;
    if (cap.band == Band::Parabola) {
        t.A_off = {c, c * c};
        t.A_lin = {s, 0.0, 2.0 * c * s, s * s};
        t.L = {1.0 / s, -2.0 * c / (s * s), 0.0, 1.0 / (s * s)};
    } else {
        t.L = circle_tube_map(cap);
    }
    t.Linv = t.L.inverse();
    t.det_L = t.L.det();
    return t;
}

Mat2 circle_tube_map(const Cap& cap) {
    double c = cap.c;
    double w = std::sqrt(std::max(0.0, 1.0 - c * c));
    Vec2 tan{w, c};
    Vec2 nor{c, -w};
    double s = cap.s;
    return {tan.x / s, nor.x / (s * s), tan.y / s, nor.y / (s * s)};
}

const char* tile_kind_name(TileKind k) { return k == TileKind::Tube ? "tube" : "envelope"; }

Locator::Locator(const Cap& cap, TileKind kind, const GridSpec& grid)
    : cap_(cap), kind_(kind), grid_(grid), s_(cap.s), two_cs_(2.0 * cap.c * cap.s), s2_(cap.s * cap.s) {
    if (cap.band != Band::Parabola) throw Error("torus locator requires a parabola cap");
    auto to_int = [](double v, const char* what) {
        auto r = static_cast<int64_t>(std::llround(v));
        if (std::abs(v - static_cast<double>(r)) > 1e-9) throw Error(std::string("tiling not torus-periodic: ") + what);
        return r;
    };
    tq_ = to_int(s_ * grid.L, "sL");
    ta_ = to_int(two_cs_ * grid.L, "2csL");
    tp_ = to_int(s2_ * grid.L, "s^2 L");
    if (kind == TileKind::Envelope) {
        n_ = to_int(static_cast<double>(grid.R) * s2_, "R s^2");
        if (n_ < 1) throw Error("envelope scale below R^{-1/2}");
        if (tq_ % n_ || ta_ % n_ || tp_ % n_) throw Error("envelope tiling not torus-periodic");
    }
    q_ = tq_ / n_;
    a_ = ta_ / n_;
    p_ = tp_ / n_;
}

TileIndex Locator::reduce(TileIndex z) const {
    int64_t w = floor_div(z.z2 + p_ / 2, p_);
    z.z2 -= w * p_;
    z.z1 -= w * a_;
    z.z1 = centered_mod(z.z1, q_);
    return z;
}

TileIndex Locator::locate(Vec2 x) const {
    double y1 = s_ * x.x + two_cs_ * x.y;
    double y2 = s2_ * x.y;
    TileIndex z{static_cast<int64_t>(std::floor(y1 + 0.5)), static_cast<int64_t>(std::floor(y2 + 0.5))};
    if (n_ > 1) z = {floor_div(z.z1 + n_ / 2, n_), floor_div(z.z2 + n_ / 2, n_)};
    return reduce(z);
}

TileIndex Locator::envelope_of(TileIndex tube) const {
    if (kind_ != TileKind::Tube) throw Error("envelope_of requires a tube locator");
    auto N = static_cast<int64_t>(std::llround(static_cast<double>(grid_.R) * s2_));
    TileIndex u = N > 1 ? TileIndex{floor_div(tube.z1 + N / 2, N), floor_div(tube.z2 + N / 2, N)} : tube;
    int64_t q = tq_ / N, a = ta_ / N, p = tp_ / N;
    int64_t w = floor_div(u.z2 + p / 2, p);
    u.z2 -= w * p;
    u.z1 -= w * a;
    u.z1 = centered_mod(u.z1, q);
    return u;
}

double Locator::area() const {
    double t = 1.0 / (s_ * s_ * s_);
    return t * static_cast<double>(n_ * n_);
}

std::array<Vec2, 4> tile_corners(const Cap& cap, TileKind kind, TileIndex z, int64_t R) {
    Mat2 L = cap.band == Band::Parabola ? cap_transforms(cap).L : circle_tube_map(cap);
    double lo1, hi1, lo2, hi2;
    auto N = kind == TileKind::Envelope ? std::llround(static_cast<double>(R) * cap.s * cap.s) : 1LL;
    if (N > 1) {
        double h = static_cast<double>(N) / 2.0;
        lo1 = static_cast<double>(N * z.z1) - h - 0.5;
        hi1 = static_cast<double>(N * z.z1) + h - 0.5;
        lo2 = static_cast<double>(N * z.z2) - h - 0.5;
        hi2 = static_cast<double>(N * z.z2) + h - 0.5;
    } else {
        lo1 = static_cast<double>(z.z1) - 0.5;
        hi1 = static_cast<double>(z.z1) + 0.5;
        lo2 = static_cast<double>(z.z2) - 0.5;
        hi2 = static_cast<double>(z.z2) + 0.5;
    }
    return {L.apply({lo1, lo2}), L.apply({hi1, lo2}), L.apply({hi1, hi2}), L.apply({lo1, hi2})};
}

CapTree build_cap_tree(int64_t R, int64_t K) {
    if (!is_pow4(R)) throw Error("R must be a power of 4");
    if (K < 2 || !is_pow2(K)) throw Error("K must be a power of two >= 2");
    CapTree t;
    t.R = R;
    t.K = K;
    double target = std::sqrt(static_cast<double>(R));
    double width = 1.0;
    while (width * target > 1.0 + 1e-12) {
        width /= static_cast<double>(K);
        ++t.m;
    }
    t.mismatch = target * width;
    t.mismatch = 1.0 / t.mismatch;
    double s = 1.0;
    for (int j = 0; j <= t.m; ++j) {
        auto caps = caps_at_scale(s);
        for (auto& c : caps) c.level = j;
        t.levels.push_back(std::move(caps));
        s /= static_cast<double>(K);
    }
    return t;
}

void write_tiles_csv(const std::string& path, const std::vector<std::pair<Cap, TileIndex>>& tiles, TileKind kind) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os.precision(17);
    os << "cap_id,s,c,z1,z2,kind\n";
    for (const auto& [cap, z] : tiles)
        os << cap.id() << ',' << cap.s << ',' << cap.c << ',' << z.z1 << ',' << z.z2 << ',' << tile_kind_name(kind)
           << '\n';
}

}  // namespace parasq
