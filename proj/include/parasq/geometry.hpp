#pragma once

#include <array>
#include <string>
#include <vector>

#include "parasq/common.hpp"
#include "parasq/torus.hpp"

namespace parasq {

// Cap over the interval [c - s/2, c + s/2] of the first frequency coordinate.
struct Cap {
    int level = 0;
    int64_t k = 0;
    double s = 1.0;
    double c = 0.0;
    Band band = Band::Parabola;

    double lo() const { return c - 0.5 * s; }
    double hi() const { return c + 0.5 * s; }
    std::string id() const;
};

Cap make_cap(double s, double c, Band band = Band::Parabola);

// Dyadic scales 1, 1/2, ..., R^{-1/2}.
std::vector<double> dyadic_scales(int64_t R);

// The 2/s caps tiling [-1, 1] at dyadic scale s.
std::vector<Cap> caps_at_scale(double s, Band band = Band::Parabola);

// Index of the cap at scale s containing xi1; half-open, with xi1 = 1 in the last cap.
int64_t cap_index_of(double xi1, double s);

struct CapTransforms {
    Mat2 A_lin;  // A_tau(xi) = A_off + A_lin xi (parabola only)
    Vec2 A_off;
    Mat2 L;      // tube map
    Mat2 Linv;
    double det_L = 0.0;
};

CapTransforms cap_transforms(const Cap& cap);

enum class TileKind { Tube, Envelope };

const char* tile_kind_name(TileKind k);

struct TileIndex {
    int64_t z1 = 0;
    int64_t z2 = 0;
    bool operator==(const TileIndex& o) const { return z1 == o.z1 && z2 == o.z2; }
};

// Tube/envelope membership for one parabola cap on the torus. Tubes are
// L_tau(z + [-1/2, 1/2)^2); an envelope is an N x N block of tubes, N = R s^2.
class Locator {
public:
    Locator(const Cap& cap, TileKind kind, const GridSpec& grid);

    TileIndex locate(Vec2 x) const;
    TileIndex locate_grid(int64_t i, int64_t j) const { return locate({grid_.coord(i), grid_.coord(j)}); }
    // Envelope containing a (reduced) tube index; only valid on a Tube locator.
    TileIndex envelope_of(TileIndex tube) const;
    TileIndex reduce(TileIndex z) const;
    int64_t flat(TileIndex z) const { return (z.z1 + q_ / 2) + q_ * (z.z2 + p_ / 2); }
    TileIndex unflat(int64_t f) const { return {f % q_ - q_ / 2, f / q_ - p_ / 2}; }
    int64_t count() const { return q_ * p_; }
    int64_t block() const { return n_; }
    // Period lattice in index space: (q, 0) and (a, p).
    int64_t period_q() const { return q_; }
    int64_t period_a() const { return a_; }
    int64_t period_p() const { return p_; }
    double area() const;
    const Cap& cap() const { return cap_; }
    TileKind kind() const { return kind_; }

private:
    Cap cap_;
    TileKind kind_;
    GridSpec grid_;
    double s_, two_cs_, s2_;
    int64_t n_ = 1;          // envelope block size N = R s^2
    int64_t q_, a_, p_;      // periods in this index space
    int64_t tq_, ta_, tp_;   // tube-space periods
};

// Corners of L_tau(z + [-1/2,1/2]^2) (tube) or of the envelope block, in the plane.
std::array<Vec2, 4> tile_corners(const Cap& cap, TileKind kind, TileIndex z, int64_t R);

// Circle-arc caps: L = [t/s | n/s^2] with t, n the unit tangent and normal at (c, -sqrt(1-c^2)).
Mat2 circle_tube_map(const Cap& cap);

struct CapTree {
    int64_t R = 0;
    int64_t K = 0;
    int m = 0;
    double mismatch = 1.0;  // K^m / R^{1/2}
    std::vector<std::vector<Cap>> levels;  // level j: 2 K^j caps of width K^{-j}

    int64_t parent(int level, int64_t k) const { return level == 0 ? -1 : k / K; }
};

CapTree build_cap_tree(int64_t R, int64_t K);

// Writes rows "cap_id,s,c,z1,z2,kind" for the given tiles.
void write_tiles_csv(const std::string& path, const std::vector<std::pair<Cap, TileIndex>>& tiles, TileKind kind);

}  // namespace parasq
