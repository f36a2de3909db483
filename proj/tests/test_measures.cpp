#include "doctest.h"
#include "parasq/measures.hpp"

using namespace parasq;

namespace {

GridMeasure single_atom(const GridSpec& g, int64_t i, int64_t j, double m) {
    return GridMeasure::sparse(g, {{i, j, m}}, MeasureKind::Raw);
}

}  // namespace

TEST_CASE("constant weight covers the grid with mass Delta^2") {
    auto g = GridSpec::make(16);
    WeightParams p;
    p.family = "constant";
    auto mu = make_weight(g, p);
    CHECK(mu.support_size() == g.M * g.M);
    CHECK(mu.total() == doctest::Approx(g.L * g.L).epsilon(1e-14));
    CHECK(mu.max_density() == doctest::Approx(1.0));
}

TEST_CASE("unit ball weight matches a full-grid scan") {
    GridSpec g{16, 64.0, 512};  // Delta = 1/8
    g.validate();
    WeightParams p;
    p.family = "ball";
    auto mu = make_weight(g, p);
    int64_t count = 0;
    for (int64_t j = 0; j < g.M; ++j)
        for (int64_t i = 0; i < g.M; ++i)
            if (g.coord(i) * g.coord(i) + g.coord(j) * g.coord(j) <= 1.0) ++count;
    CHECK(mu.support_size() == count);
    CHECK(static_cast<double>(count) * g.delta() * g.delta() == doctest::Approx(kPi).epsilon(0.05));
}

TEST_CASE("lattice weight sits on Gamma + B_c") {
    auto g = GridSpec::make(256);
    WeightParams p;
    p.family = "lattice";
    p.kappa = 1.0 / 3.0;
    auto mu = make_weight(g, p);
    REQUIRE(!mu.empty());
    double a = 2.0 * kPi * std::cbrt(256.0), b = 2.0 * kPi * std::pow(256.0, 2.0 / 3.0);
    double reach = std::max(p.c, g.delta() * std::sqrt(0.5)) + 1e-12;
    mu.for_each([&](int64_t i, int64_t j, double m) {
        double x = g.coord(i), y = g.coord(j);
        double dx = x - a * std::round(x / a), dy = y - b * std::round(y / b);
        CHECK(std::hypot(dx, dy) <= reach);
        CHECK(std::hypot(x, y) <= p.cutoff * 256.0 + reach);
        CHECK(m == doctest::Approx(g.delta() * g.delta()));
    });
    CHECK(mu.params.at("gamma_points") > 1.0);
}

TEST_CASE("weight parameter checks") {
    auto g = GridSpec::make(16);
    WeightParams p;
    p.family = "constant";
    p.lambda = 1.5;
    CHECK_THROWS(make_weight(g, p));
    p.family = "nope";
    CHECK_THROWS(make_weight(g, p));
    CHECK_THROWS(GridMeasure::sparse(g, {{0, 0, 1.0}}, MeasureKind::Weight));
}

TEST_CASE("certificate of a unit point mass is 1 for every alpha") {
    auto g = GridSpec::make(16);
    auto mu = single_atom(g, 3, 5, 1.0);
    for (double alpha : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        auto c = dimension_certificate(mu, CertMode::Alpha, alpha);
        CHECK(c.value == doctest::Approx(1.0));
        CHECK(c.radius == 1.0);
    }
}

TEST_CASE("certificate of H = 1 at alpha = 2 is pi up to the quantisation factor") {
    auto g = GridSpec::make(16);
    WeightParams p;
    p.family = "constant";
    auto c = dimension_certificate(make_weight(g, p), CertMode::Alpha, 2.0);
    CHECK(c.guarantee == 16.0);
    CHECK(c.value <= kPi * 1.1);
    CHECK(c.value * c.guarantee >= kPi);
}

TEST_CASE("certificates scale linearly and reproduce at their witness") {
    auto g = GridSpec::make(64);
    WeightParams p;
    p.family = "lattice";
    auto mu = make_weight(g, p);
    auto cloud = to_cloud(mu);
    auto quarter = cloud;
    for (auto& m : quarter.mass) m *= 0.25;
    for (auto mode : {CertMode::Alpha, CertMode::Parabolic}) {
        auto a = certify(cloud, mode, 1.0);
        auto b = certify(quarter, mode, 1.0);
        CHECK(b.value == 0.25 * a.value);
        auto w = certify_brute(cloud, mode, 1.0, {a.center}, 1.0, a.radius);
        CHECK(w.value >= a.value * (1.0 - 1e-9));
    }
}

TEST_CASE("grid certificate brackets the brute-force supremum") {
    auto g = GridSpec::make(16);
    WeightParams p;
    p.family = "ball";
    p.rho = 3.0;
    auto cloud = to_cloud(make_weight(g, p));
    for (double alpha : {0.5, 1.0, 2.0}) {
        auto c = certify(cloud, CertMode::Alpha, alpha);
        auto b = certify_brute(cloud, CertMode::Alpha, alpha, cloud.pts);
        CHECK(c.value <= b.value * (1.0 + 1e-12) * c.guarantee);
        CHECK(b.value <= c.value * c.guarantee * (1.0 + 1e-12));
    }
}

TEST_CASE("smoothing a point mass gives the kernel") {
    auto g = GridSpec::make(16);
    auto H = smooth_measure(single_atom(g, 0, 0, 1.0));
    double cN = smoothing_constant(10);
    double d2 = g.delta() * g.delta();
    bool seen0 = false, seen4 = false;
    H.for_each([&](int64_t i, int64_t j, double m) {
        double r = std::hypot(g.coord(i), g.coord(j));
        CHECK(m / d2 == doctest::Approx(cN * std::pow(1.0 + r, -10.0)).epsilon(1e-12));
        seen0 = seen0 || (i == 0 && j == 0);
        seen4 = seen4 || (j == 0 && g.coord(i) == 4.0);
    });
    CHECK(seen0);
    CHECK(seen4);
}

TEST_CASE("smoothing two atoms at distance 2: midpoint by direct convolution") {
    auto g = GridSpec::make(16);
    auto mu = GridMeasure::sparse(g, {{g.index(-1.0), 0, 1.0}, {g.index(1.0), 0, 1.0}}, MeasureKind::Raw);
    auto H = smooth_measure(mu);
    double cN = smoothing_constant(10), d2 = g.delta() * g.delta();
    double mid = 0.0;
    H.for_each([&](int64_t i, int64_t j, double m) {
        if (i == 0 && j == 0) mid = m / d2;
    });
    CHECK(mid == doctest::Approx(2.0 * cN * std::pow(2.0, -10.0)).epsilon(1e-12));
}

TEST_CASE("smoothing transfers the alpha certificate on the lattice family") {
    auto g = GridSpec::make(64);
    WeightParams p;
    p.family = "lattice";
    auto mu = make_weight(g, p);
    double alpha = 1.0;
    double before = dimension_certificate(mu, CertMode::Alpha, alpha).value;
    double after = dimension_certificate(smooth_measure(mu, 10, true), CertMode::Alpha, alpha).value;
    CHECK(after <= 16.0 * before);
}

TEST_CASE("dyadic level sets") {
    auto g = GridSpec::make(16);
    WeightParams p;
    p.family = "constant";
    auto one = dyadic_level_sets(make_weight(g, p), 1e-40);
    REQUIRE(one.levels.size() == 1);
    CHECK(one.levels[0].lambda == 1.0);
    CHECK(static_cast<int64_t>(one.levels[0].atoms.size()) == g.M * g.M);

    double d2 = g.delta() * g.delta();
    auto two = dyadic_level_sets(GridMeasure::sparse(g, {{0, 0, d2}, {1, 0, 0.25 * d2}, {2, 0, 0.25 * d2}}), 1e-40);
    REQUIRE(two.levels.size() == 3);
    CHECK(two.levels[0].atoms.size() == 1);
    CHECK(two.levels[1].atoms.empty());
    CHECK(two.levels[2].lambda == 0.25);
    CHECK(two.levels[2].atoms.size() == 2);

    p.family = "bump";
    auto bump = make_weight(g, p);
    auto sets = dyadic_level_sets(bump, 1e-40);
    double acc = 0.0;
    for (const auto& lv : sets.levels) acc += lv.lambda * static_cast<double>(lv.atoms.size()) * d2;
    CHECK(acc >= 0.5 * bump.total());
    CHECK(acc <= bump.total());
}

TEST_CASE("pigeonhole picks the level with the largest share") {
    auto g = GridSpec::make(16);
    double d2 = g.delta() * g.delta();
    auto sets = dyadic_level_sets(GridMeasure::sparse(g, {{0, 0, d2}, {1, 0, 0.25 * d2}, {2, 0, 0.25 * d2}}), 1e-40);
    auto pick = pigeonhole_level(sets, g, {{1.0}, {}, {10.0, 10.0}});
    CHECK(pick.level == 2);
    CHECK(pick.value == doctest::Approx(0.25 * 20.0 * d2));
}
