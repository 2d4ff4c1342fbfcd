#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pbs/common.hpp"

namespace pbs {

// Expected fill levels are real-valued in prediction; only the simulator holds
// integer fills.

// f_{t+1} = clamp(f_t + eta_t, 0, fmax). Returns eta.size()+1 values, f0 first.
std::vector<double> propagate_fill(double f0, double fmax, std::span<const double> eta);

// Stepwise comparison of the saturated trajectories from f0 and f0+df; the
// running sum of |change_with| - |change_without| until the trajectories merge
// or the horizon ends. utility_exact(.., 0) == 0. Throws std::invalid_argument
// when f0 or f0+df leaves [0, fmax].
double utility_exact(double fmax, std::span<const double> eta, double f0, double df);

struct Plateau {
    double lower = 0.0;
    double upper = 0.0;
    bool degenerate = false;  // station pressured from both sides within the horizon
};

// Start fill levels from which neither capacity bound is hit within the
// horizon. When that interval is empty the plateau collapses to the endpoint of
// the last surviving interval on the side whose bound was hit first, and the
// station is flagged.
Plateau compute_plateau(double fmax, std::span<const double> eta);

// Reconstructs the plateau from three utility_exact evaluations; cross-check
// for compute_plateau.
Plateau plateau_from_three_calls(double fmax, std::span<const double> eta);

inline double plateau_penalty(const Plateau& p, double f) {
    double below = p.lower - f;
    double above = f - p.upper;
    double pen = below > above ? below : above;
    return pen > 0.0 ? pen : 0.0;
}

// Piecewise-linear utility with slope +1 below the plateau, 0 on it, -1 above;
// anchored so that utility_fast(p, f, 0) == 0.
inline double utility_fast(const Plateau& p, double f, double df) {
    return plateau_penalty(p, f) - plateau_penalty(p, f + df);
}

// Plateaus for every station and every start minute of a span; 2*|S|*T values.
struct PlateauTable {
    int station_count = 0;
    Minute t0 = 0;
    int span = 0;  // start minutes covered: [t0, t0+span)
    std::vector<Plateau> cells;

    const Plateau& at(int s, Minute t) const {
        std::int64_t off = t - t0;
        if (off < 0) off = 0;
        if (off >= span) off = span - 1;
        return cells[static_cast<std::size_t>(s) * span + static_cast<std::size_t>(off)];
    }
};

using EtaFn = std::function<double(int station, Minute t)>;

// Builds the table with a sliding min/max window over cumulative net rates;
// only degenerate cells need a sequential first-crossing scan.
PlateauTable build_plateau_table(const std::vector<double>& fmax, const EtaFn& eta, Minute t0,
                                 int span_minutes, int horizon_minutes = 1440);

}  // namespace pbs
