#include "parasq/torus.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "parasq/fft.hpp"

namespace parasq {

static_assert(std::endian::native == std::endian::little, "field I/O assumes a little-endian host");

GridSpec GridSpec::make(int64_t R, int64_t l_factor, int64_t m_factor) {
    GridSpec g{R, static_cast<double>(l_factor * R), m_factor * R};
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (!is_pow4(R) || R < 4) throw Error("R must be a power of 4, got " + std::to_string(R));
    double ratio = L / static_cast<double>(R);
    auto n = static_cast<int64_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(n)) > 0 || !is_pow2(n) || n < 4)
        throw Error("L/R must be a power of two >= 4");
    if (dxi() > 2.0 / static_cast<double>(R)) throw Error("frequency lattice too coarse for the band");
    if (!is_pow2(M)) throw Error("M must be a power of two");
    if (delta() > 1.0) throw Error("grid spacing L/M must be <= 1");
    if (static_cast<double>(M) <= 5.0 * L / kPi) throw Error("M must exceed 5L/pi for exact quartic quadrature");
}

const char* band_name(Band b) {
    switch (b) {
        case Band::Parabola: return "parabola";
        case Band::Annulus: return "annulus";
        case Band::Free: return "free";
    }
    return "?";
}

bool in_band(const GridSpec& g, Band band, Vec2 xi) {
    const double tol = 1e-12;
    double r = static_cast<double>(g.R);
    switch (band) {
        case Band::Parabola:
            return std::abs(xi.x) <= 1.0 + tol && std::abs(xi.y - xi.x * xi.x) <= 1.0 / r + tol;
        case Band::Annulus:
            return std::abs(std::hypot(xi.x, xi.y) - 1.0) <= 2.0 / r + tol;
        case Band::Free:
            return true;
    }
    return false;
}

std::vector<Mode> band_lattice(const GridSpec& g, Band band) {
    std::vector<Mode> out;
    double d = g.dxi();
    double r = static_cast<double>(g.R);
    if (band == Band::Parabola) {
        auto n1max = static_cast<int64_t>(std::floor(1.0 / d));
        for (int64_t n1 = -n1max; n1 <= n1max; ++n1) {
            double x1 = d * static_cast<double>(n1);
            auto lo = static_cast<int64_t>(std::ceil((x1 * x1 - 1.0 / r) / d)) - 1;
            auto hi = static_cast<int64_t>(std::floor((x1 * x1 + 1.0 / r) / d)) + 1;
            for (int64_t n2 = lo; n2 <= hi; ++n2)
                if (in_band(g, band, {x1, d * static_cast<double>(n2)})) out.push_back({n1, n2, 1.0});
        }
    } else if (band == Band::Annulus) {
        auto nmax = static_cast<int64_t>(std::ceil((1.0 + 2.0 / r) / d));
        for (int64_t n2 = -nmax; n2 <= nmax; ++n2)
            for (int64_t n1 = -nmax; n1 <= nmax; ++n1)
                if (in_band(g, band, {d * static_cast<double>(n1), d * static_cast<double>(n2)}))
                    out.push_back({n1, n2, 1.0});
    } else {
        throw Error("band_lattice: free band has no finite lattice");
    }
    std::sort(out.begin(), out.end(),
              [](const Mode& a, const Mode& b) { return a.n2 != b.n2 ? a.n2 < b.n2 : a.n1 < b.n1; });
    return out;
}

std::vector<cplx> sample_modes(const std::vector<Mode>& modes, int64_t m) {
    std::vector<cplx> data(static_cast<size_t>(m * m), cplx(0.0, 0.0));
    for (const auto& md : modes) data[static_cast<size_t>(pos_mod(md.n2, m) * m + pos_mod(md.n1, m))] += md.a;
    fft2d(data, m, +1);
    return data;
}

TorusField synthesize(const GridSpec& g, Band band, std::vector<Mode> modes, bool sample) {
    g.validate();
    std::sort(modes.begin(), modes.end(),
              [](const Mode& a, const Mode& b) { return a.n2 != b.n2 ? a.n2 < b.n2 : a.n1 < b.n1; });
    TorusField f;
    f.grid = g;
    f.band = band;
    for (size_t k = 0; k < modes.size(); ++k) {
        Vec2 xi = f.freq(modes[k]);
        if (!in_band(g, band, xi)) {
            std::ostringstream os;
            os << "frequency (" << xi.x << ", " << xi.y << ") outside the " << band_name(band) << " band";
            throw BandError(os.str(), xi);
        }
        if (k > 0 && modes[k].n1 == modes[k - 1].n1 && modes[k].n2 == modes[k - 1].n2)
            throw BandError("duplicate frequency", xi);
    }
    f.modes = std::move(modes);
    if (sample) f.samples = std::make_shared<const std::vector<cplx>>(sample_modes(f.modes, g.M));
    return f;
}

TorusField synthesize_frequencies(const GridSpec& g, Band band,
                                  const std::vector<std::pair<Vec2, cplx>>& coeffs, bool sample) {
    std::vector<Mode> modes;
    double d = g.dxi();
    for (const auto& [xi, a] : coeffs) {
        double u1 = xi.x / d, u2 = xi.y / d;
        double r1 = std::round(u1), r2 = std::round(u2);
        if (std::abs(u1 - r1) > 1e-9 || std::abs(u2 - r2) > 1e-9) {
            std::ostringstream os;
            os << "frequency (" << xi.x << ", " << xi.y << ") is not on the torus lattice";
            throw BandError(os.str(), xi);
        }
        modes.push_back({static_cast<int64_t>(r1), static_cast<int64_t>(r2), a});
    }
    return synthesize(g, band, std::move(modes), sample);
}

TorusField random_field(const GridSpec& g, Band band, uint64_t seed, bool sample) {
    Rng rng(seed);
    auto modes = band_lattice(g, band);
    for (auto& m : modes) m.a = rng.unit_phase();
    return synthesize(g, band, std::move(modes), sample);
}

TorusField with_samples(const TorusField& f) {
    if (f.has_samples()) return f;
    TorusField out = f;
    out.samples = std::make_shared<const std::vector<cplx>>(sample_modes(f.modes, f.grid.M));
    return out;
}

cplx point_eval(const std::vector<Mode>& modes, double L, Vec2 x) {
    double d = 2.0 * kPi / L;
    cplx acc(0.0, 0.0);
    for (const auto& m : modes) {
        double ph = d * (static_cast<double>(m.n1) * x.x + static_cast<double>(m.n2) * x.y);
        acc += m.a * cplx(std::cos(ph), std::sin(ph));
    }
    return acc;
}

std::vector<cplx> point_eval(const std::vector<Mode>& modes, double L, const std::vector<Vec2>& xs) {
    std::vector<cplx> out(xs.size());
    parallel_for(static_cast<int64_t>(xs.size()),
                 [&](int64_t k) { out[static_cast<size_t>(k)] = point_eval(modes, L, xs[static_cast<size_t>(k)]); });
    return out;
}

double lp_norm_pow(const TorusField& f, double p) {
    TorusField s = with_samples(f);
    double acc = 0.0;
    for (const auto& v : *s.samples) acc += std::pow(std::abs(v), p);
    double d = f.grid.delta();
    return acc * d * d;
}

double lp_norm(const TorusField& f, double p) { return std::pow(lp_norm_pow(f, p), 1.0 / p); }

double parseval_norm2(const TorusField& f) {
    double acc = 0.0;
    for (const auto& m : f.modes) acc += std::norm(m.a);
    return acc * f.grid.L * f.grid.L;
}

double quartic_norm4(const TorusField& f) {
    std::unordered_map<int64_t, cplx> conv;
    auto key = [](int64_t a, int64_t b) { return (a << 32) ^ (b & 0xffffffffLL); };
    for (const auto& m : f.modes)
        for (const auto& n : f.modes) conv[key(m.n1 + n.n1, m.n2 + n.n2)] += m.a * n.a;
    std::vector<double> terms;
    terms.reserve(conv.size());
    for (const auto& [k, v] : conv) terms.push_back(std::norm(v));
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc * f.grid.L * f.grid.L;
}

namespace {

template <class T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("truncated field file");
    return v;
}

}  // namespace

void write_field_binary(const TorusField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path);
    put<int64_t>(os, f.grid.R);
    put<double>(os, f.grid.L);
    put<int64_t>(os, f.grid.M);
    put<int64_t>(os, static_cast<int64_t>(f.modes.size()));
    for (const auto& m : f.modes) {
        put<double>(os, static_cast<double>(m.n1));
        put<double>(os, static_cast<double>(m.n2));
        put<double>(os, m.a.real());
        put<double>(os, m.a.imag());
    }
}

TorusField read_field_binary(const std::string& path, Band band, bool sample) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    GridSpec g;
    g.R = get<int64_t>(is);
    g.L = get<double>(is);
    g.M = get<int64_t>(is);
    auto n = get<int64_t>(is);
    if (n < 0) throw Error("negative mode count");
    std::vector<Mode> modes(static_cast<size_t>(n));
    for (auto& m : modes) {
        m.n1 = static_cast<int64_t>(get<double>(is));
        m.n2 = static_cast<int64_t>(get<double>(is));
        double re = get<double>(is);
        m.a = {re, get<double>(is)};
    }
    return synthesize(g, band, std::move(modes), sample);
}

void write_spectrum_csv(const TorusField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os.precision(17);
    os << "n1,n2,re,im\n";
    for (const auto& m : f.modes) os << m.n1 << ',' << m.n2 << ',' << m.a.real() << ',' << m.a.imag() << '\n';
}

std::vector<Mode> read_spectrum_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::string line;
    std::getline(is, line);
    if (line != "n1,n2,re,im") throw Error("spectrum CSV: unexpected header '" + line + "'");
    std::vector<Mode> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Mode m;
        char c1, c2, c3;
        double re, im;
        if (!(ls >> m.n1 >> c1 >> m.n2 >> c2 >> re >> c3 >> im)) throw Error("spectrum CSV: bad line '" + line + "'");
        m.a = {re, im};
        out.push_back(m);
    }
    return out;
}

}  // namespace parasq
