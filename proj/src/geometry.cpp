#include "pbs/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pbs {

namespace {
constexpr double earth_radius_km = 6371.0;
constexpr double deg = M_PI / 180.0;
}  // namespace

XY Projection::to_xy(double lat, double lon) const {
    XY p;
    p.x = earth_radius_km * (lon - lon0) * deg * std::cos(lat0 * deg);
    p.y = earth_radius_km * (lat - lat0) * deg;
    return p;
}

void Projection::to_latlon(const XY& p, double& lat, double& lon) const {
    lat = lat0 + p.y / (earth_radius_km * deg);
    lon = lon0 + p.x / (earth_radius_km * deg * std::cos(lat0 * deg));
}

Polygon clip_halfplane(const Polygon& poly, double a, double b, double c) {
    Polygon out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const XY& p = poly[i];
        const XY& q = poly[(i + 1) % n];
        double fp = a * p.x + b * p.y - c;
        double fq = a * q.x + b * q.y - c;
        if (fp <= 0.0) out.push_back(p);
        if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
            double t = fp / (fp - fq);
            out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
        }
    }
    return out;
}

double polygon_area(const Polygon& poly) {
    double a = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const XY& p = poly[i];
        const XY& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

XY polygon_centroid(const Polygon& poly) {
    double a = 0.0, cx = 0.0, cy = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const XY& p = poly[i];
        const XY& q = poly[(i + 1) % n];
        double cross = p.x * q.y - q.x * p.y;
        a += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    a *= 0.5;
    if (std::abs(a) < 1e-12) {
        // degenerate sliver: fall back to the vertex mean
        XY m{0.0, 0.0};
        for (const XY& p : poly) {
            m.x += p.x;
            m.y += p.y;
        }
        if (!poly.empty()) {
            m.x /= static_cast<double>(poly.size());
            m.y /= static_cast<double>(poly.size());
        }
        return m;
    }
    return {cx / (6.0 * a), cy / (6.0 * a)};
}

bool point_in_convex_polygon(const Polygon& poly, const XY& p, double tol) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    double sign = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const XY& a = poly[i];
        const XY& b = poly[(i + 1) % n];
        double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (std::abs(cross) <= tol) continue;
        if (sign == 0.0) sign = cross;
        else if ((cross > 0) != (sign > 0)) return false;
    }
    return true;
}

std::vector<XY> voronoi_centers(const std::vector<XY>& points, const BoundingBox& box) {
    const std::size_t n = points.size();
    if (n < 3) throw data_error("voronoi_centers: need at least 3 stations");
    // collinearity check
    bool collinear = true;
    for (std::size_t k = 2; k < n && collinear; ++k) {
        double cross = (points[1].x - points[0].x) * (points[k].y - points[0].y) -
                       (points[1].y - points[0].y) * (points[k].x - points[0].x);
        if (std::abs(cross) > 1e-9) collinear = false;
    }
    if (collinear) throw data_error("voronoi_centers: degenerate (collinear) station geometry");

    Polygon rect = {{box.min_x, box.min_y}, {box.max_x, box.min_y}, {box.max_x, box.max_y}, {box.min_x, box.max_y}};
    std::vector<XY> centers(n);
    for (std::size_t i = 0; i < n; ++i) {
        Polygon cell = rect;
        for (std::size_t j = 0; j < n && !cell.empty(); ++j) {
            if (j == i) continue;
            // keep points closer to i than to j: 2(pj-pi).x <= |pj|^2-|pi|^2
            double a = 2.0 * (points[j].x - points[i].x);
            double b = 2.0 * (points[j].y - points[i].y);
            double c = points[j].x * points[j].x + points[j].y * points[j].y -
                       points[i].x * points[i].x - points[i].y * points[i].y;
            cell = clip_halfplane(cell, a, b, c);
        }
        centers[i] = cell.empty() ? points[i] : polygon_centroid(cell);
    }
    return centers;
}

Geometry build_geometry(const Stations& stations, int neighbor_count, std::optional<BoundingBox> box) {
    Geometry g;
    const int n = stations.size();
    g.station_count = n;
    g.neighbor_count = std::max(0, std::min(neighbor_count, n - 1));

    double lat0 = 0.0, lon0 = 0.0;
    for (const auto& s : stations.rows) {
        lat0 += s.lat;
        lon0 += s.lon;
    }
    if (n > 0) {
        lat0 /= n;
        lon0 /= n;
    }
    g.proj = Projection{lat0, lon0};

    g.station_xy.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g.station_xy[static_cast<std::size_t>(i)] =
            g.proj.to_xy(stations.rows[static_cast<std::size_t>(i)].lat, stations.rows[static_cast<std::size_t>(i)].lon);

    if (!box) {
        BoundingBox bb;
        bb.min_x = bb.min_y = 1e30;
        bb.max_x = bb.max_y = -1e30;
        for (const XY& p : g.station_xy) {
            bb.min_x = std::min(bb.min_x, p.x);
            bb.min_y = std::min(bb.min_y, p.y);
            bb.max_x = std::max(bb.max_x, p.x);
            bb.max_y = std::max(bb.max_y, p.y);
        }
        bb.min_x -= 1.0;
        bb.min_y -= 1.0;
        bb.max_x += 1.0;
        bb.max_y += 1.0;
        box = bb;
    }

    g.center_xy = voronoi_centers(g.station_xy, *box);
    g.center_lat.resize(static_cast<std::size_t>(n));
    g.center_lon.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g.proj.to_latlon(g.center_xy[static_cast<std::size_t>(i)], g.center_lat[static_cast<std::size_t>(i)],
                         g.center_lon[static_cast<std::size_t>(i)]);

    g.euclid.assign(static_cast<std::size_t>(n) * n, 0.0);
    g.effective.assign(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> walk(static_cast<std::size_t>(n));  // d(s_i, m_i)
    for (int i = 0; i < n; ++i) {
        double dx = g.station_xy[static_cast<std::size_t>(i)].x - g.center_xy[static_cast<std::size_t>(i)].x;
        double dy = g.station_xy[static_cast<std::size_t>(i)].y - g.center_xy[static_cast<std::size_t>(i)].y;
        walk[static_cast<std::size_t>(i)] = std::sqrt(dx * dx + dy * dy);
    }
    std::vector<double> raw(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double dx = g.station_xy[static_cast<std::size_t>(i)].x - g.station_xy[static_cast<std::size_t>(j)].x;
            double dy = g.station_xy[static_cast<std::size_t>(i)].y - g.station_xy[static_cast<std::size_t>(j)].y;
            double d = std::sqrt(dx * dx + dy * dy);
            g.euclid[static_cast<std::size_t>(i) * n + j] = d;
            double r = (i == j) ? 0.0
                                : effective_distance_raw(d, walk[static_cast<std::size_t>(j)], walk[static_cast<std::size_t>(i)]);
            raw[static_cast<std::size_t>(i) * n + j] = r;
            g.effective[static_cast<std::size_t>(i) * n + j] = std::max(0.0, r);
        }
    }

    g.neighbors.assign(static_cast<std::size_t>(n), {});
    g.reverse_neighbors.assign(static_cast<std::size_t>(n), {});
    for (int s = 0; s < n; ++s) {
        std::vector<int> order;
        for (int j = 0; j < n; ++j)
            if (j != s) order.push_back(j);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double ea = g.effective_km(s, a), eb = g.effective_km(s, b);
            if (ea != eb) return ea < eb;
            double ra = raw[static_cast<std::size_t>(s) * n + a], rb = raw[static_cast<std::size_t>(s) * n + b];
            if (ra != rb) return ra < rb;
            return a < b;
        });
        order.resize(static_cast<std::size_t>(g.neighbor_count));
        g.neighbors[static_cast<std::size_t>(s)] = order;
        for (int nb : order) g.reverse_neighbors[static_cast<std::size_t>(nb)].push_back(s);
    }
    return g;
}

}  // namespace pbs
