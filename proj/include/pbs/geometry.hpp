#pragma once

#include <optional>
#include <vector>

#include "pbs/corpus.hpp"

namespace pbs {

struct XY {
    double x = 0.0, y = 0.0;  // km in the local projection plane
};

struct BoundingBox {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
};

// Local equirectangular projection about a reference point; adequate at city scale.
struct Projection {
    double lat0 = 0.0, lon0 = 0.0;
    XY to_xy(double lat, double lon) const;
    void to_latlon(const XY& p, double& lat, double& lon) const;
};

// Convex polygon helpers used by the Voronoi construction; exposed for tests.
using Polygon = std::vector<XY>;
Polygon clip_halfplane(const Polygon& poly, double a, double b, double c);  // keep ax+by<=c
XY polygon_centroid(const Polygon& poly);
double polygon_area(const Polygon& poly);
bool point_in_convex_polygon(const Polygon& poly, const XY& p, double tol = 1e-9);

// Centroids of the Voronoi cells of `points`, clipped to `box`.
// Throws data_error for fewer than 3 points or an all-collinear configuration.
std::vector<XY> voronoi_centers(const std::vector<XY>& points, const BoundingBox& box);

// Effective (customer-perceived) distance: cycling leg plus double-weighted
// walking legs to/from the Voronoi centers. May be negative before clamping.
inline double effective_distance_raw(double d_ij, double d_j_mj, double d_i_mi) {
    return d_ij + 2.0 * d_j_mj - 2.0 * d_i_mi;
}

struct Geometry {
    Projection proj;
    int station_count = 0;
    int neighbor_count = 0;                  // N, payout slots per station
    std::vector<XY> station_xy;
    std::vector<XY> center_xy;               // Voronoi cell centroids m_i
    std::vector<double> center_lat, center_lon;
    std::vector<double> euclid;              // S*S, km
    std::vector<double> effective;           // S*S, km, clamped at 0
    std::vector<std::vector<int>> neighbors;          // N_s, ascending effective distance
    std::vector<std::vector<int>> reverse_neighbors;  // N~_s = {t : s in N_t}

    double euclid_km(int i, int j) const { return euclid[static_cast<std::size_t>(i) * station_count + j]; }
    double effective_km(int i, int j) const { return effective[static_cast<std::size_t>(i) * station_count + j]; }
};

// Builds the full geometry. neighbor_count is clamped to station_count-1.
// The Voronoi bounding box defaults to the station extent plus a 1 km margin.
Geometry build_geometry(const Stations& stations, int neighbor_count = 10,
                        std::optional<BoundingBox> box = std::nullopt);

}  // namespace pbs
