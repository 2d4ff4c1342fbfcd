#include "pbs/utility.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace pbs {

namespace {
inline double clamp_fill(double f, double fmax) { return f < 0.0 ? 0.0 : (f > fmax ? fmax : f); }
}

std::vector<double> propagate_fill(double f0, double fmax, std::span<const double> eta) {
    std::vector<double> out;
    out.reserve(eta.size() + 1);
    double f = clamp_fill(f0, fmax);
    out.push_back(f);
    for (double e : eta) {
        f = clamp_fill(f + e, fmax);
        out.push_back(f);
    }
    return out;
}

double utility_exact(double fmax, std::span<const double> eta, double f0, double df) {
    if (f0 < 0.0 || f0 > fmax) throw std::invalid_argument("utility_exact: f0 outside [0, fmax]");
    double g0 = f0 + df;
    if (g0 < 0.0 || g0 > fmax) throw std::invalid_argument("utility_exact: f0+df outside [0, fmax]");
    double f = f0, g = g0, u = 0.0;
    for (double e : eta) {
        if (f == g) return u;
        double fn = clamp_fill(f + e, fmax);
        double gn = clamp_fill(g + e, fmax);
        u += std::abs(gn - g) - std::abs(fn - f);
        f = fn;
        g = gn;
    }
    return u;
}

namespace {

// Survivor scan for collapsed plateaus: walks the cumulative profile until the
// feasible start interval dies and reports the endpoint on the killing side.
Plateau degenerate_plateau(double fmax, std::span<const double> eta) {
    double lo = 0.0, hi = fmax, c = 0.0;
    for (double e : eta) {
        c += e;
        double new_lo = std::max(lo, -c);
        double new_hi = std::min(hi, fmax - c);
        if (new_lo > new_hi) {
            double z = (fmax - c < lo) ? lo : hi;
            return Plateau{z, z, true};
        }
        lo = new_lo;
        hi = new_hi;
    }
    return Plateau{lo, hi, false};  // unreachable when called on a degenerate profile
}

}  // namespace

Plateau compute_plateau(double fmax, std::span<const double> eta) {
    double c = 0.0, cmin = 0.0, cmax = 0.0;
    for (double e : eta) {
        c += e;
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
    }
    double lower = std::clamp(-cmin, 0.0, fmax);
    double upper = std::clamp(fmax - cmax, 0.0, fmax);
    if (lower <= upper) return Plateau{lower, upper, false};
    return degenerate_plateau(fmax, eta);
}

Plateau plateau_from_three_calls(double fmax, std::span<const double> eta) {
    double a = utility_exact(fmax, eta, 0.0, fmax);  // lower + upper - fmax
    double mid = 0.5 * (a + fmax);
    double lower = utility_exact(fmax, eta, 0.0, mid);
    double upper = fmax - utility_exact(fmax, eta, fmax, mid - fmax);
    Plateau p{lower, upper, lower >= upper};
    return p;
}

PlateauTable build_plateau_table(const std::vector<double>& fmax, const EtaFn& eta, Minute t0,
                                 int span_minutes, int horizon_minutes) {
    PlateauTable table;
    const int S = static_cast<int>(fmax.size());
    table.station_count = S;
    table.t0 = t0;
    table.span = span_minutes;
    table.cells.assign(static_cast<std::size_t>(S) * span_minutes, Plateau{});

    const int total = span_minutes + horizon_minutes;
    std::vector<double> cum(static_cast<std::size_t>(total) + 1);
    std::vector<double> eta_buf(static_cast<std::size_t>(total));

    for (int s = 0; s < S; ++s) {
        cum[0] = 0.0;
        for (int j = 0; j < total; ++j) {
            eta_buf[static_cast<std::size_t>(j)] = eta(s, t0 + j);
            cum[static_cast<std::size_t>(j) + 1] = cum[static_cast<std::size_t>(j)] + eta_buf[static_cast<std::size_t>(j)];
        }
        // sliding min/max of cum over windows [o, o+horizon]
        std::deque<int> qmin, qmax;
        const int W = horizon_minutes + 1;
        auto push = [&](int j) {
            while (!qmin.empty() && cum[static_cast<std::size_t>(qmin.back())] >= cum[static_cast<std::size_t>(j)]) qmin.pop_back();
            qmin.push_back(j);
            while (!qmax.empty() && cum[static_cast<std::size_t>(qmax.back())] <= cum[static_cast<std::size_t>(j)]) qmax.pop_back();
            qmax.push_back(j);
        };
        for (int j = 0; j < W && j <= total; ++j) push(j);
        for (int o = 0; o < span_minutes; ++o) {
            if (o > 0) {
                int incoming = o + horizon_minutes;
                if (incoming <= total) push(incoming);
                while (qmin.front() < o) qmin.pop_front();
                while (qmax.front() < o) qmax.pop_front();
            }
            double base = cum[static_cast<std::size_t>(o)];
            double wmin = cum[static_cast<std::size_t>(qmin.front())] - base;
            double wmax = cum[static_cast<std::size_t>(qmax.front())] - base;
            double cap = fmax[static_cast<std::size_t>(s)];
            double lower = std::clamp(-wmin, 0.0, cap);
            double upper = std::clamp(cap - wmax, 0.0, cap);
            Plateau p;
            if (lower <= upper) {
                p = Plateau{lower, upper, false};
            } else {
                std::span<const double> window(eta_buf.data() + o, static_cast<std::size_t>(horizon_minutes));
                p = compute_plateau(cap, window);
            }
            table.cells[static_cast<std::size_t>(s) * span_minutes + static_cast<std::size_t>(o)] = p;
        }
    }
    return table;
}

}  // namespace pbs
