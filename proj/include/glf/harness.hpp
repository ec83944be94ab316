// Run orchestration: flat key-value config, single-run execution with durable
// outputs, crash-safe resume, verification verdicts, and sweep aggregation
// across a decreasing eps list.
//
// Per-run outputs under the run directory:
//   series.csv        one row per observation (flushed as written)
//   tracks.csv        vortex tracks, one row per (observation, track)
//   pairings.ndjson   bump pairings / bad-disk data at t=0 and each horizon
//   run.ndjson        config echo, horizon summaries, verdicts, exit code
//   snapshots/*.glf   initial, per-horizon, final fields
//   checkpoint.glf    rolling resume point (atomically replaced)
//
// Exit-code convention: 0 all requested verifications pass, 2 verification
// failure, 1 error (bad config, degenerate datum, I/O).

#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glf/comparison.hpp"
#include "glf/initial_data.hpp"
#include "glf/integrator.hpp"
#include "glf/vortex.hpp"

namespace glf {

enum class Verification { zeros, energy, jacobian, envelopes, gronwall };

std::string to_string(Verification v);
Verification verification_from_string(const std::string& s);
std::string to_string(DatumKind k);
DatumKind datum_kind_from_string(const std::string& s);

struct RunConfig {
    DatumSpec datum;
    std::vector<double> eps_list;       // strictly decreasing when more than one
    double c0 = 2.0;                    // the horizon verdicts are judged at
    std::vector<double> extra_c0;       // additional horizons observed and reported
    std::optional<int> n_override;      // single-eps configs only
    std::optional<double> dt_override;  // single-eps configs only
    long cadence = 10;                  // observe every k-th step
    long envelope_stride = 5;           // comparison sampled every k-th observation
    long checkpoint_stride = 10;        // checkpoint every k-th observation
    std::string output_dir = "out";
    std::vector<Verification> verify;

    bool wants(Verification v) const;
    void validate_shape() const;  // throws std::invalid_argument naming the rule
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// One observation of the trajectory.  NaN marks a quantity not computed at
// this observation (not requested, or off the envelope stride).
struct SeriesRow {
    long step = 0;
    double t = 0.0;
    bool special = false;  // exact-time horizon observation off the step grid
    double dirichlet = std::numeric_limits<double>::quiet_NaN();
    double potential = std::numeric_limits<double>::quiet_NaN();
    double energy = std::numeric_limits<double>::quiet_NaN();
    double sup_mod = 0.0;
    double min_mod = 0.0;
    long zero_count = -1;  // -1: detection not requested
    int total_degree = 0;
    bool suspect = false;
    double max_drift = std::numeric_limits<double>::quiet_NaN();
    double ju_integral = std::numeric_limits<double>::quiet_NaN();
    double env_f = std::numeric_limits<double>::quiet_NaN();
    double env_h = std::numeric_limits<double>::quiet_NaN();
    double env_ratio = std::numeric_limits<double>::quiet_NaN();
    double grad_f = std::numeric_limits<double>::quiet_NaN();
    double grad_h = std::numeric_limits<double>::quiet_NaN();
    double grad_ratio = std::numeric_limits<double>::quiet_NaN();
    double r_sup = std::numeric_limits<double>::quiet_NaN();
    double r_majorant = std::numeric_limits<double>::quiet_NaN();
};

// What happened at one horizon T(c0) = ln(1/eps) - (1/2) ln ln(1/eps) - c0.
struct HorizonSummary {
    double c0 = 0.0;
    double T = 0.0;
    double energy_at_T = std::numeric_limits<double>::quiet_NaN();
    double min_modulus_to_T = std::numeric_limits<double>::quiet_NaN();
    double drift_at_T = std::numeric_limits<double>::quiet_NaN();
    double drift_ratio = std::numeric_limits<double>::quiet_NaN();  // drift / (eps sqrt(ln 1/eps))
    double m_min = std::numeric_limits<double>::quiet_NaN();        // bad-disk multiplier
    std::vector<double> pairings_over_pi;
    double pairing_error = std::numeric_limits<double>::quiet_NaN();  // vs initial degrees
    bool zero_count_constant = true;
    bool degrees_constant = true;
    bool any_suspect = false;
};

struct Verdict {
    std::string name;
    bool pass = false;
    std::string evidence;  // compact JSON object
};

struct RunResult {
    double eps = 0.0;
    int n = 0;
    double dt = 0.0;
    double t_end = 0.0;
    MadeDatum datum;
    std::vector<HorizonSummary> horizons;  // ascending c0; only positive horizons
    std::vector<SeriesRow> series;
    TrackRecord tracks;
    EnvelopeFit env_fit, grad_env_fit;  // over samples with 0 < t <= T(gate c0)
    GronwallVerdict gronwall;
    double r_ratio_max = 0.0;  // max r_sup / r_majorant over comparison samples
    std::vector<Verdict> verdicts;

    const HorizonSummary* horizon_at(double c0) const;
    bool all_pass() const;
    int exit_code() const;  // 0 or 2
};

RunResult run_single(const RunConfig& cfg, double eps, const std::string& outdir,
                     bool resume = false);

struct SweepResult {
    std::vector<RunResult> runs;     // in eps_list order
    std::vector<Verdict> aggregate;  // cross-eps verdicts
    bool all_pass() const;
    int exit_code() const;
};

SweepResult run_sweep(const RunConfig& cfg, const std::string& outdir, int jobs = 1);

// Cross-eps energy fit verdict (pure; also exercised with synthetic inputs).
Verdict energy_scaling_verdict(std::span<const double> eps, std::span<const double> energies);

// CSV of t,f,h rows (header line optional) for the lemma verifier CLI.
GronwallInstance load_gronwall_csv(const std::string& path, double c);

}  // namespace glf
