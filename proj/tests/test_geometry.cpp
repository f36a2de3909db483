#include <map>

#include "doctest.h"
#include "parasq/envelope.hpp"
#include "parasq/geometry.hpp"

using namespace parasq;

TEST_CASE("cap tree: R = 16, K = 2") {
    auto t = build_cap_tree(16, 2);
    CHECK(t.m == 2);
    CHECK(t.mismatch == 1.0);
    REQUIRE(t.levels.size() == 3);
    for (int j = 0; j <= 2; ++j) {
        double s = std::ldexp(1.0, -j);
        CHECK(t.levels[j].front().s == s);
        CHECK(t.levels[j].size() == static_cast<size_t>(2.0 / s));
    }
}

TEST_CASE("cap tree: R = 4, K = 2 splits once") {
    auto t = build_cap_tree(4, 2);
    CHECK(t.m == 1);
    CHECK(t.levels.back().front().s == 0.5);
}

TEST_CASE("cap tree: every finest cap has one ancestor per scale") {
    auto t = build_cap_tree(256, 4);
    CHECK(t.m == 2);
    for (const auto& theta : t.levels.back()) {
        int64_t k = theta.k;
        for (int j = t.m; j > 0; --j) {
            int64_t parent = t.parent(j, k);
            const auto& pc = t.levels[static_cast<size_t>(j - 1)][static_cast<size_t>(parent)];
            const auto& c = t.levels[static_cast<size_t>(j)][static_cast<size_t>(k)];
            CHECK(c.lo() >= pc.lo() - 1e-15);
            CHECK(c.hi() <= pc.hi() + 1e-15);
            k = parent;
        }
    }
    CHECK(build_cap_tree(4096, 4).mismatch == 1.0);
    auto odd = build_cap_tree(64, 4);  // R^{1/2} = 8 is not a power of 4: m rounds up
    CHECK(odd.m == 2);
    CHECK(odd.mismatch == 2.0);
}

TEST_CASE("cap tree mismatch is recorded when K^m overshoots") {
    auto t = build_cap_tree(64, 16);
    CHECK(t.m == 1);
    CHECK(t.mismatch == doctest::Approx(2.0));
}

TEST_CASE("cap transforms") {
    auto id = cap_transforms(make_cap(1.0, 0.0));
    CHECK(id.L.a == 1.0);
    CHECK(id.L.b == 0.0);
    CHECK(id.L.c == 0.0);
    CHECK(id.L.d == 1.0);

    auto t = cap_transforms(make_cap(0.25, 0.5));
    CHECK(t.L.a == 4.0);
    CHECK(t.L.b == -16.0);
    CHECK(t.L.c == 0.0);
    CHECK(t.L.d == 16.0);
    CHECK(t.det_L == 64.0);

    for (double c : {-0.875, 0.125, 0.625}) {
        auto tc = cap_transforms(make_cap(0.25, c));
        Vec2 base = tc.A_off;
        CHECK(base.x == c);
        CHECK(base.y == c * c);
    }
}

TEST_CASE("locate: origin and exact preimages") {
    auto g = GridSpec::make(256);
    Cap cap = make_cap(0.25, 0.375);
    Locator loc(cap, TileKind::Tube, g);
    CHECK(loc.locate({0.0, 0.0}) == TileIndex{0, 0});
    auto L = cap_transforms(cap).L;
    CHECK(loc.locate(L.apply({3.0, 5.0})) == TileIndex{3, 5});
    Locator env(cap, TileKind::Envelope, g);
    CHECK(env.locate({0.0, 0.0}) == TileIndex{0, 0});
    CHECK(env.block() == 16);
}

TEST_CASE("locate: random grid points lie in the returned tube") {
    auto g = GridSpec::make(64);
    Rng rng(5);
    for (double s : {1.0, 0.5, 0.25, 0.125}) {
        for (const auto& cap : caps_at_scale(s)) {
            Locator loc(cap, TileKind::Tube, g);
            auto Linv = cap_transforms(cap).Linv;
            for (int k = 0; k < 50; ++k) {
                int64_t i = rng.below(g.M), j = rng.below(g.M);
                Vec2 x{g.coord(i), g.coord(j)};
                auto z = loc.locate(x);
                CHECK(tile_contains(loc, z, x));
                // the unreduced index differs from z by a period; membership in max-norm <= 1/2
                Vec2 y = Linv.apply(x);
                double d1 = y.x - std::floor(y.x + 0.5), d2 = y.y - std::floor(y.y + 0.5);
                CHECK(std::max(std::abs(d1), std::abs(d2)) <= 0.5);
            }
        }
    }
}

TEST_CASE("tiling: tubes partition the grid, envelopes nest tubes, areas match") {
    auto g = GridSpec::make(16);
    for (double s : {1.0, 0.5, 0.25}) {
        for (const auto& cap : caps_at_scale(s)) {
            Locator tube(cap, TileKind::Tube, g);
            Locator env(cap, TileKind::Envelope, g);
            std::map<int64_t, int64_t> counts;
            for (int64_t j = 0; j < g.M; ++j)
                for (int64_t i = 0; i < g.M; ++i) {
                    auto z = tube.locate_grid(i, j);
                    ++counts[tube.flat(z)];
                    CHECK(tube.envelope_of(z) == env.locate_grid(i, j));
                }
            int64_t total = 0;
            for (const auto& [k, v] : counts) total += v;
            CHECK(total == g.M * g.M);
            CHECK(static_cast<int64_t>(counts.size()) == tube.count());
            CHECK(tube.area() == doctest::Approx(1.0 / (s * s * s)));
            CHECK(env.area() == doctest::Approx(16.0 * 16.0 * s));
            double n = 16.0 * s * s;
            CHECK(env.area() / tube.area() == doctest::Approx(n * n));
        }
    }
}

TEST_CASE("cap_index_of is a half-open partition with the right end closed") {
    CHECK(cap_index_of(-1.0, 0.5) == 0);
    CHECK(cap_index_of(-0.5, 0.5) == 1);
    CHECK(cap_index_of(1.0, 0.5) == 3);
    CHECK_THROWS(caps_at_scale(0.3));
}
