#include <algorithm>
#include <map>

#include "doctest.h"
#include "parasq/envelope.hpp"

using namespace parasq;

namespace {

// Band lattice mode whose first coordinate is nearest to xi1.
Mode nearest_mode(const GridSpec& g, double xi1) {
    auto lattice = band_lattice(g, Band::Parabola);
    Mode best = lattice.front();
    double bd = 1e300;
    for (const auto& m : lattice) {
        Vec2 xi{g.dxi() * static_cast<double>(m.n1), g.dxi() * static_cast<double>(m.n2)};
        double d = std::abs(xi.x - xi1) + std::abs(xi.y - xi1 * xi1);
        if (d < bd) bd = d, best = m;
    }
    return best;
}

GridMeasure constant(const GridSpec& g, double lambda) {
    WeightParams p;
    p.family = "constant";
    p.lambda = lambda;
    return make_weight(g, p);
}

}  // namespace

TEST_CASE("windows partition unity on [-1, 1]") {
    for (double s : {1.0, 0.5, 0.25, 0.125}) {
        auto caps = caps_at_scale(s);
        for (int k = 0; k <= 2000; ++k) {
            double xi = -1.0 + k * 0.001;
            double sum = 0.0;
            for (const auto& c : caps) sum += cap_window(c, xi);
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
    CHECK(window_bump(0.5) == doctest::Approx(0.5));
    CHECK(window_bump(0.0) == 1.0);
    CHECK(window_bump(0.7) == 0.0);
}

TEST_CASE("cap_decompose: mode at a cap centre lands in one piece") {
    auto g = GridSpec::make(64);
    Mode m = nearest_mode(g, 0.375);
    auto f = synthesize(g, Band::Parabola, {m}, false);
    auto pieces = cap_decompose(f, 0.25);
    int nonzero = 0;
    for (const auto& pc : pieces)
        if (!pc.modes.empty()) {
            ++nonzero;
            CHECK(pc.cap.c == 0.375);
            CHECK(pc.modes[0].a == m.a);
        }
    CHECK(nonzero == 1);
}

TEST_CASE("cap_decompose: exact reconstruction and boundary split") {
    auto g = GridSpec::make(64);
    auto f = random_field(g, Band::Parabola, 4, false);
    for (double s : {1.0, 0.5, 0.25, 0.125}) {
        auto pieces = cap_decompose(f, s);
        std::map<std::pair<int64_t, int64_t>, cplx> sum;
        for (const auto& pc : pieces)
            for (const auto& m : pc.modes) sum[{m.n1, m.n2}] += m.a;
        double err = 0.0;
        for (const auto& m : f.modes) err = std::max(err, std::abs(sum[{m.n1, m.n2}] - m.a));
        CHECK(err <= 1e-12);
    }
    // xi1 = 0 is the boundary between the caps [-1/4, 0] and [0, 1/4]
    Mode m = nearest_mode(g, 0.0);
    REQUIRE(m.n1 == 0);
    auto pieces = cap_decompose(synthesize(g, Band::Parabola, {m}, false), 0.25);
    std::vector<double> w;
    for (const auto& pc : pieces)
        if (!pc.modes.empty()) w.push_back(pc.modes[0].a.real());
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cap_decompose rejects scales finer than R^{-1/2}") {
    auto g = GridSpec::make(64);
    auto f = random_field(g, Band::Parabola, 1, false);
    CHECK_THROWS_AS(cap_decompose(f, 1.0 / 16.0), Error);
    CHECK_NOTHROW(cap_decompose(f, 1.0 / 8.0));
}

TEST_CASE("square function: two distant caps give sqrt 2, one cap gives |f|") {
    auto g = GridSpec::make(16);
    auto f = synthesize(g, Band::Parabola, {nearest_mode(g, -0.875), nearest_mode(g, 0.625)}, false);
    auto sq = square_function(f, 0.25);
    for (double v : sq.S) CHECK(std::sqrt(v) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    auto one = synthesize(g, Band::Parabola, {nearest_mode(g, 0.58), nearest_mode(g, 0.69)}, false);
    auto sq1 = square_function(one, 0.25);
    auto vals = sample_modes(one.modes, sq1.m);
    for (size_t n = 0; n < vals.size(); ++n) CHECK(sq1.S[n] == doctest::Approx(std::norm(vals[n])).epsilon(1e-10));
}

TEST_CASE("square function: L2 norm within the window slack of ||f||_2") {
    auto g = GridSpec::make(64);
    auto f = random_field(g, Band::Parabola, 12);
    auto sq = square_function(f, 0.125);
    double sq2 = square_function_norm(sq, 2.0);
    double f2 = lp_norm(f, 2.0);
    CHECK(sq2 <= f2 * (1.0 + 1e-12));
    CHECK(sq2 * sq2 >= 0.95 * f2 * f2);
}

TEST_CASE("kappa: H = 1 gives 1 and H = lambda gives lambda^{1/p} on every envelope") {
    auto g = GridSpec::make(16);
    for (double lambda : {1.0, 0.25}) {
        auto table = build_kappa_table(constant(g, lambda));
        for (double p : {2.0, 3.0, 4.0}) {
            double expect = std::pow(lambda, 1.0 / p), dev = 0.0;
            for (size_t jj = 0; jj < table.scales.size(); ++jj)
                for (const auto& ck : table.caps[jj])
                    for (const auto& st : ck.envelopes)
                        dev = std::max(dev, std::abs(kappa_value(st.HU, st.maxHT, table.scales[jj], g.R, p) - expect));
            CHECK(dev <= 1e-12);
        }
    }
}

TEST_CASE("kappa: unit ball at R = 64, p = 2 has kappa_max ~ R^{-1/2} witnessed at s = 1") {
    auto g = GridSpec::make(64);
    WeightParams wp;
    wp.family = "ball";
    auto H = make_weight(g, wp);
    auto km = kappa_max(build_kappa_table(H), 2.0);
    CHECK(km.witness.s == 1.0);
    CHECK(km.value <= 4.0 / 8.0);
    CHECK(km.value >= 1.0 / (4.0 * 8.0));
    auto ex = kappa_max(build_kappa_table(H, KappaPath::Exhaustive), 2.0);
    CHECK(ex.value == km.value);
    CHECK(kappa_single(H, km.witness.cap, km.witness.u, 2.0) == doctest::Approx(km.value).epsilon(1e-12));
}

TEST_CASE("kappa: monotone in H and affine in 1/p on a log scale") {
    auto g = GridSpec::make(16);
    WeightParams small, big;
    small.family = big.family = "ball";
    small.rho = 2.0;
    big.rho = 4.0;
    auto a = build_kappa_table(make_weight(g, small), KappaPath::Exhaustive);
    auto b = build_kappa_table(make_weight(g, big), KappaPath::Exhaustive);
    for (double p : {2.0, 3.0, 4.0}) CHECK(kappa_max(a, p).value <= kappa_max(b, p).value);
    const auto& st = a.caps[0][0].envelopes.front();
    double s = a.scales[0];
    auto lk = [&](double p) { return std::log(kappa_value(st.HU, st.maxHT, s, g.R, p)); };
    CHECK(lk(3.0) - lk(2.0) == doctest::Approx((lk(4.0) - lk(2.0)) * (1.0 / 3.0 - 0.5) / (0.25 - 0.5)));
}

TEST_CASE("packet field: unit coefficient sum per cap") {
    auto g = GridSpec::make(64);
    auto caps = caps_at_scale(0.125);
    auto f = packet_field(g, {caps[3], caps[12]});
    for (const auto& c : {caps[3], caps[12]}) {
        double sum = 0.0;
        for (const auto& m : f.modes)
            if (window_bump((g.dxi() * static_cast<double>(m.n1) - c.c) / c.s) > 0.0) sum += m.a.real();
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("envelope theorem: env_rhs dominates its largest term; single-theta packet ratio is stable") {
    std::vector<double> ratios;
    for (int64_t R : {16, 64}) {
        auto g = GridSpec::make(R);
        double s = 1.0 / std::sqrt(static_cast<double>(R));
        auto theta = caps_at_scale(s)[static_cast<size_t>(cap_index_of(0.0, s))];
        auto f = packet_field(g, {theta}, true);
        auto rep = verify_weighted_sq(f, constant(g, 1.0), 4.0);
        double largest = 0.0;
        for (const auto& t : rep.terms) largest = std::max(largest, t.term);
        CHECK(rep.env_rhs >= largest);
        CHECK(rep.kmax.value == doctest::Approx(1.0));
        ratios.push_back(rep.ratio_sq);
    }
    CHECK(ratios[1] / ratios[0] <= 2.0);
    CHECK(ratios[0] / ratios[1] <= 2.0);
}

TEST_CASE("verify_weighted_sq input checks") {
    auto g = GridSpec::make(16);
    auto f = random_field(g, Band::Parabola, 1);
    CHECK_THROWS(verify_weighted_sq(f, constant(g, 1.0), 5.0));
    CHECK_THROWS(verify_weighted_sq(f, constant(GridSpec::make(64), 1.0), 2.0));
}
