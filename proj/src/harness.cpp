#include "glf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "glf/diagnostics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace glf {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

std::string fmt_g17(double x) {
    char b[48];
    std::snprintf(b, sizeof b, "%.17g", x);
    return b;
}

std::string fmt_g6(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%g", x);
    return b;
}

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (trim(v.substr(pos)).empty()) return x;
    } catch (...) {
    }
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (trim(v.substr(pos)).empty()) return x;
    } catch (...) {
    }
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& piece : split(v, ',')) {
        const auto p = trim(piece);
        if (!p.empty()) out.push_back(to_double(key, p));
    }
    return out;
}

// "+1@(0.28,0.30); -1@(0.42,0.34)"
std::vector<PrescribedVortex> parse_vortices(const std::string& v) {
    std::vector<PrescribedVortex> out;
    for (const auto& piece : split(v, ';')) {
        const auto p = trim(piece);
        if (p.empty()) continue;
        const auto at = p.find('@');
        if (at == std::string::npos)
            throw std::invalid_argument("config: vortex entry '" + p + "' is not DEGREE@(x,y)");
        const std::string deg = trim(p.substr(0, at));
        std::string xy = trim(p.substr(at + 1));
        if (xy.size() < 2 || xy.front() != '(' || xy.back() != ')')
            throw std::invalid_argument("config: vortex entry '" + p + "' is not DEGREE@(x,y)");
        xy = xy.substr(1, xy.size() - 2);
        const auto parts = split(xy, ',');
        if (parts.size() != 2)
            throw std::invalid_argument("config: vortex entry '" + p + "' is not DEGREE@(x,y)");
        PrescribedVortex pv;
        pv.degree = static_cast<int>(to_long("datum.vortices", deg));
        pv.pos = {to_double("datum.vortices", trim(parts[0])), to_double("datum.vortices", trim(parts[1]))};
        out.push_back(pv);
    }
    return out;
}

void atomic_write_snapshot(const std::string& path, const VectorField& u, double t, double eps) {
    const std::string tmp = path + ".tmp";
    write_snapshot(tmp, u, t, eps);
    fs::rename(tmp, path);
}

double horizon_time(double eps, double c0) {
    const double lg = std::log(1.0 / eps);
    return lg - 0.5 * std::log(lg) - c0;
}

std::string series_header() {
    return "step,t,special,dirichlet,potential,energy,sup_mod,min_mod,zero_count,total_degree,"
           "suspect,max_drift,ju_integral,env_f,env_h,env_ratio,grad_f,grad_h,grad_ratio,r_sup,"
           "r_majorant";
}

std::string series_line(const SeriesRow& r) {
    std::ostringstream o;
    o << r.step << ',' << fmt_g17(r.t) << ',' << (r.special ? 1 : 0) << ',' << fmt_g17(r.dirichlet)
      << ',' << fmt_g17(r.potential) << ',' << fmt_g17(r.energy) << ',' << fmt_g17(r.sup_mod) << ','
      << fmt_g17(r.min_mod) << ',' << r.zero_count << ',' << r.total_degree << ','
      << (r.suspect ? 1 : 0) << ',' << fmt_g17(r.max_drift) << ',' << fmt_g17(r.ju_integral) << ','
      << fmt_g17(r.env_f) << ',' << fmt_g17(r.env_h) << ',' << fmt_g17(r.env_ratio) << ','
      << fmt_g17(r.grad_f) << ',' << fmt_g17(r.grad_h) << ',' << fmt_g17(r.grad_ratio) << ','
      << fmt_g17(r.r_sup) << ',' << fmt_g17(r.r_majorant);
    return o.str();
}

SeriesRow parse_series_line(const std::string& line) {
    const auto f = split(line, ',');
    if (f.size() != 21) throw std::runtime_error("series.csv: malformed row '" + line + "'");
    SeriesRow r;
    r.step = std::strtol(f[0].c_str(), nullptr, 10);
    r.t = std::strtod(f[1].c_str(), nullptr);
    r.special = f[2] == "1";
    r.dirichlet = std::strtod(f[3].c_str(), nullptr);
    r.potential = std::strtod(f[4].c_str(), nullptr);
    r.energy = std::strtod(f[5].c_str(), nullptr);
    r.sup_mod = std::strtod(f[6].c_str(), nullptr);
    r.min_mod = std::strtod(f[7].c_str(), nullptr);
    r.zero_count = std::strtol(f[8].c_str(), nullptr, 10);
    r.total_degree = static_cast<int>(std::strtol(f[9].c_str(), nullptr, 10));
    r.suspect = f[10] == "1";
    r.max_drift = std::strtod(f[11].c_str(), nullptr);
    r.ju_integral = std::strtod(f[12].c_str(), nullptr);
    r.env_f = std::strtod(f[13].c_str(), nullptr);
    r.env_h = std::strtod(f[14].c_str(), nullptr);
    r.env_ratio = std::strtod(f[15].c_str(), nullptr);
    r.grad_f = std::strtod(f[16].c_str(), nullptr);
    r.grad_h = std::strtod(f[17].c_str(), nullptr);
    r.grad_ratio = std::strtod(f[18].c_str(), nullptr);
    r.r_sup = std::strtod(f[19].c_str(), nullptr);
    r.r_majorant = std::strtod(f[20].c_str(), nullptr);
    return r;
}

double latest_drift(const TrackRecord& rec) {
    double d = 0.0;
    for (const auto& tr : rec.points)
        if (!tr.empty()) d = std::max(d, tr.back().drift);
    return d;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace

std::string to_string(Verification v) {
    switch (v) {
        case Verification::zeros: return "zeros";
        case Verification::energy: return "energy";
        case Verification::jacobian: return "jacobian";
        case Verification::envelopes: return "envelopes";
        case Verification::gronwall: return "gronwall";
    }
    return "?";
}

Verification verification_from_string(const std::string& s) {
    for (auto v : {Verification::zeros, Verification::energy, Verification::jacobian,
                   Verification::envelopes, Verification::gronwall})
        if (to_string(v) == s) return v;
    throw std::invalid_argument("config: unknown verification '" + s +
                                "' (expected zeros, energy, jacobian, envelopes, gronwall)");
}

std::string to_string(DatumKind k) {
    switch (k) {
        case DatumKind::constant: return "constant";
        case DatumKind::product_sine: return "product_sine";
        case DatumKind::prescribed_vortices: return "prescribed_vortices";
        case DatumKind::random_fourier_highenergy: return "random_fourier_highenergy";
        case DatumKind::zero_free_winding: return "zero_free_winding";
    }
    return "?";
}

DatumKind datum_kind_from_string(const std::string& s) {
    for (auto k : {DatumKind::constant, DatumKind::product_sine, DatumKind::prescribed_vortices,
                   DatumKind::random_fourier_highenergy, DatumKind::zero_free_winding})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("config: unknown datum kind '" + s + "'");
}

bool RunConfig::wants(Verification v) const {
    return std::find(verify.begin(), verify.end(), v) != verify.end();
}

void RunConfig::validate_shape() const {
    if (eps_list.empty()) throw std::invalid_argument("config: eps is required");
    for (double e : eps_list)
        if (!(e > 0.0) || !(e < 0.36788))
            throw std::invalid_argument("config: eps rule 0 < eps < 1/e violated by " + fmt_g6(e));
    for (std::size_t i = 0; i + 1 < eps_list.size(); ++i)
        if (!(eps_list[i] > eps_list[i + 1]))
            throw std::invalid_argument("config: eps list must be strictly decreasing");
    if ((n_override || dt_override) && eps_list.size() > 1)
        throw std::invalid_argument("config: n/dt overrides require a single eps");
    for (double e : eps_list) {
        const int n = n_override.value_or(FlowParams::min_nodes(e));
        if (n < static_cast<int>(std::ceil(8.0 / e)))
            throw std::invalid_argument("config: resolution rule n >= ceil(8/eps) violated (n=" +
                                        std::to_string(n) + ", eps=" + fmt_g6(e) + ")");
        if (n < 16 || n % 2 != 0)
            throw std::invalid_argument("config: grid rule n even and >= 16 violated (n=" +
                                        std::to_string(n) + ")");
        if (dt_override) {
            const double cap = std::min(0.05, e / n);
            if (!(*dt_override > 0.0) || *dt_override > cap * (1.0 + 1e-12))
                throw std::invalid_argument(
                    "config: step rule 0 < dt <= min(0.05, eps*spacing) violated (dt=" +
                    fmt_g6(*dt_override) + ", cap=" + fmt_g6(cap) + ")");
        }
        if (!(horizon_time(e, c0) > 0.0))
            throw std::invalid_argument("config: horizon rule T = ln(1/eps) - (1/2)ln ln(1/eps) - c0 > 0 "
                                        "violated at eps=" + fmt_g6(e) + ", c0=" + fmt_g6(c0));
    }
    if (cadence < 1 || envelope_stride < 1 || checkpoint_stride < 1)
        throw std::invalid_argument("config: cadence and strides must be >= 1");
    if (output_dir.empty()) throw std::invalid_argument("config: out must be nonempty");
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    bool saw_verify = false;
    while (std::getline(in, raw)) {
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line without '=': '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "datum.kind") {
            cfg.datum.kind = datum_kind_from_string(val);
        } else if (key == "datum.constant") {
            std::string v = val;
            if (v.size() >= 2 && v.front() == '(' && v.back() == ')') v = v.substr(1, v.size() - 2);
            const auto parts = to_double_list(key, v);
            if (parts.size() != 2)
                throw std::invalid_argument("config: datum.constant expects two numbers");
            cfg.datum.constant_value = {parts[0], parts[1]};
        } else if (key == "datum.vortices") {
            cfg.datum.vortices = parse_vortices(val);
        } else if (key == "datum.core_width") {
            cfg.datum.core_width = to_double(key, val);
        } else if (key == "datum.base_kind") {
            cfg.datum.base_kind = datum_kind_from_string(val);
        } else if (key == "datum.energy_target") {
            cfg.datum.energy_target = to_double(key, val);
        } else if (key == "datum.noise_modes") {
            cfg.datum.noise_modes = static_cast<int>(to_long(key, val));
        } else if (key == "datum.seed") {
            cfg.datum.seed = static_cast<std::uint64_t>(to_long(key, val));
        } else if (key == "eps") {
            cfg.eps_list = to_double_list(key, val);
        } else if (key == "c0") {
            cfg.c0 = to_double(key, val);
        } else if (key == "c0.extra") {
            cfg.extra_c0 = to_double_list(key, val);
        } else if (key == "n") {
            cfg.n_override = static_cast<int>(to_long(key, val));
        } else if (key == "dt") {
            cfg.dt_override = to_double(key, val);
        } else if (key == "cadence") {
            cfg.cadence = to_long(key, val);
        } else if (key == "envelope_stride") {
            cfg.envelope_stride = to_long(key, val);
        } else if (key == "checkpoint_stride") {
            cfg.checkpoint_stride = to_long(key, val);
        } else if (key == "out") {
            cfg.output_dir = val;
        } else if (key == "verify") {
            saw_verify = true;
            cfg.verify.clear();
            for (const auto& piece : split(val, ',')) {
                const auto p = trim(piece);
                if (p.empty()) continue;
                const auto v = verification_from_string(p);
                if (!cfg.wants(v)) cfg.verify.push_back(v);
            }
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    (void)saw_verify;  // absent verify means verify nothing, same as empty
    cfg.validate_shape();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

const HorizonSummary* RunResult::horizon_at(double c0) const {
    for (const auto& h : horizons)
        if (std::abs(h.c0 - c0) <= 1e-9) return &h;
    return nullptr;
}

bool RunResult::all_pass() const {
    for (const auto& v : verdicts)
        if (!v.pass) return false;
    return true;
}

int RunResult::exit_code() const { return all_pass() ? 0 : 2; }

bool SweepResult::all_pass() const {
    for (const auto& r : runs)
        if (!r.all_pass()) return false;
    for (const auto& v : aggregate)
        if (!v.pass) return false;
    return true;
}

int SweepResult::exit_code() const { return all_pass() ? 0 : 2; }

namespace {

// In-flight accumulation for one run.
struct RunFiles {
    std::ofstream series, tracks, pairings;
};

struct HorizonScratch {
    double m_min = nan_v;
    std::vector<double> pairings_over_pi;
};

void rebuild_tracker(Tracker& tracker, const std::vector<std::string>& lines) {
    // rows: step,t,track,x1,x2,degree,drift  grouped by observation in order
    long cur_step = -1;
    double cur_t = 0.0;
    std::vector<Vortex> zs;
    auto flush_obs = [&]() {
        if (zs.empty()) return;
        VortexSet vs;
        vs.zs = zs;
        tracker.add(cur_t, vs);
        zs.clear();
    };
    for (std::size_t i = 1; i < lines.size(); ++i) {  // skip header
        const auto f = split(lines[i], ',');
        if (f.size() != 7) throw std::runtime_error("tracks.csv: malformed row '" + lines[i] + "'");
        const long step = std::strtol(f[0].c_str(), nullptr, 10);
        const double t = std::strtod(f[1].c_str(), nullptr);
        const std::size_t trk = std::strtoul(f[2].c_str(), nullptr, 10);
        if (step != cur_step || t != cur_t) {
            flush_obs();
            cur_step = step;
            cur_t = t;
        }
        if (zs.size() <= trk) zs.resize(trk + 1);
        zs[trk] = Vortex{{std::strtod(f[3].c_str(), nullptr), std::strtod(f[4].c_str(), nullptr)},
                         static_cast<int>(std::strtol(f[5].c_str(), nullptr, 10)), 0.0};
    }
    flush_obs();
}

json verdict_json(const Verdict& v) {
    json j;
    j["type"] = "verdict";
    j["name"] = v.name;
    j["pass"] = v.pass;
    j["evidence"] = json::parse(v.evidence.empty() ? "{}" : v.evidence);
    return j;
}

json gronwall_json(const GronwallVerdict& g) {
    json j;
    j["hyp_integral"] = g.hyp_integral;
    j["hyp_limsup"] = g.hyp_limsup;
    j["hyp_implicit"] = g.hyp_implicit;
    j["conclusion"] = g.conclusion;
    j["validated"] = g.validated;
    j["margin"] = g.margin;
    j["integral_sup"] = g.integral_sup;
    return j;
}

}  // namespace

RunResult run_single(const RunConfig& cfg, double eps, const std::string& outdir, bool resume) {
    FlowParams params;
    params.eps = eps;
    params.n = cfg.n_override.value_or(FlowParams::min_nodes(eps));
    params.c0 = cfg.c0;
    params.dt = cfg.dt_override.value_or(0.0);
    if (params.dt <= 0.0) params.dt = params.dt_cap();

    // Requested horizons, ascending c0, positive T only; t_end = largest T.
    std::vector<double> c0s{cfg.c0};
    c0s.insert(c0s.end(), cfg.extra_c0.begin(), cfg.extra_c0.end());
    std::sort(c0s.begin(), c0s.end());
    c0s.erase(std::unique(c0s.begin(), c0s.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              c0s.end());
    std::vector<HorizonSummary> horizons;
    for (double c0 : c0s) {
        const double T = horizon_time(eps, c0);
        if (T > 0.0) {
            HorizonSummary h;
            h.c0 = c0;
            h.T = T;
            horizons.push_back(h);
        }
    }
    if (horizons.empty() || !(horizon_time(eps, cfg.c0) > 0.0))
        throw std::invalid_argument("run: gate horizon T(c0=" + fmt_g6(cfg.c0) + ") is nonpositive");
    params.t_end = horizons.front().T;
    params.validate();
    const double gate_T = horizon_time(eps, cfg.c0);
    const double dt = params.dt;
    const long K = static_cast<long>(std::floor(params.t_end / dt + 1e-9));

    MadeDatum datum = make_datum(cfg.datum, GridSpec{params.n}, eps);
    const VortexSet& zeros0 = datum.cert.zeros;
    const double pair_minsep = zeros0.zs.size() >= 2 ? zeros0.min_separation() : 0.5;
    const double pair_radius = pair_minsep / 3.0;

    const bool w_zeros = cfg.wants(Verification::zeros);
    const bool w_energy = cfg.wants(Verification::energy);
    const bool w_jac = cfg.wants(Verification::jacobian);
    const bool w_gron = cfg.wants(Verification::gronwall);
    const bool w_env = cfg.wants(Verification::envelopes) || w_gron;
    const bool need_grad = w_energy || w_jac;

    fs::create_directories(fs::path(outdir) / "snapshots");
    const std::string series_path = (fs::path(outdir) / "series.csv").string();
    const std::string tracks_path = (fs::path(outdir) / "tracks.csv").string();
    const std::string pairings_path = (fs::path(outdir) / "pairings.ndjson").string();
    const std::string ckpt_path = (fs::path(outdir) / "checkpoint.glf").string();
    const std::string runnd_path = (fs::path(outdir) / "run.ndjson").string();

    std::vector<SeriesRow> series;
    series.reserve(static_cast<std::size_t>(K / cfg.cadence + 8));
    Tracker tracker(eps);
    std::map<double, HorizonScratch> hscratch;  // keyed by c0

    FlowState start{0.0, 0, datum.u0};
    bool resuming = false;
    if (resume && fs::exists(ckpt_path)) {
        Snapshot snap = read_snapshot(ckpt_path);
        if (snap.u.grid().n != params.n || std::abs(snap.eps - eps) > 1e-12)
            throw std::runtime_error("resume: checkpoint does not match the config (n or eps differ)");
        const long s = std::lround(snap.t / dt);
        if (s < 0 || s > K || std::abs(snap.t - static_cast<double>(s) * dt) > 1e-9)
            throw std::runtime_error("resume: checkpoint time is not on the step grid");

        auto keep_csv = [&](const std::string& path) {
            auto lines = read_lines(path);
            std::vector<std::string> kept;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                if (i == 0 || std::strtol(lines[i].c_str(), nullptr, 10) <= s) kept.push_back(lines[i]);
            }
            write_lines(path, kept);
            return kept;
        };
        const auto series_kept = keep_csv(series_path);
        for (std::size_t i = 1; i < series_kept.size(); ++i)
            series.push_back(parse_series_line(series_kept[i]));
        if (w_zeros) rebuild_tracker(tracker, keep_csv(tracks_path));
        {
            auto lines = read_lines(pairings_path);
            std::vector<std::string> kept;
            for (const auto& l : lines) {
                json j = json::parse(l);
                if (j.value("step", 0L) > s) continue;
                kept.push_back(l);
                if (j.contains("c0") && !j["c0"].is_null()) {
                    HorizonScratch& hsc = hscratch[j["c0"].get<double>()];
                    if (j.contains("m_min") && !j["m_min"].is_null()) hsc.m_min = j["m_min"].get<double>();
                    if (j.contains("over_pi"))
                        hsc.pairings_over_pi = j["over_pi"].get<std::vector<double>>();
                }
            }
            write_lines(pairings_path, kept);
        }
        start = FlowState{snap.t, s, std::move(snap.u)};
        resuming = true;
    }

    RunFiles files;
    const auto mode = resuming ? std::ios::app : std::ios::trunc;
    files.series.open(series_path, mode);
    files.tracks.open(tracks_path, mode);
    files.pairings.open(pairings_path, mode);
    if (!files.series || !files.tracks || !files.pairings)
        throw std::runtime_error("run: cannot open output files under '" + outdir + "'");
    if (!resuming) {
        files.series << series_header() << '\n' << std::flush;
        files.tracks << "step,t,track,x1,x2,degree,drift" << '\n' << std::flush;
        atomic_write_snapshot((fs::path(outdir) / "snapshots" / "initial.glf").string(), datum.u0,
                              0.0, eps);
    }

    SpectralWorkspace ws_obs(GridSpec{params.n});
    std::optional<ComparisonBuilder> cmp;
    if (w_env) cmp.emplace(datum.u0, eps);

    bool tracker_alive = true;
    std::string tracker_error;
    double tracker_fail_t = nan_v;
    const long env_every = cfg.cadence * cfg.envelope_stride;
    const long ckpt_every = cfg.cadence * cfg.checkpoint_stride;
    std::optional<FlowState> pending_ckpt;

    auto observer = [&](const FlowState& st, bool special) {
        SeriesRow row;
        row.step = st.step_count;
        row.t = st.t;
        row.special = special;
        row.sup_mod = sup_norm(st.u);
        row.min_mod = min_modulus(st.u);

        std::optional<ScalarField> ju;
        if (need_grad) {
            GradientField g;
            ws_obs.gradient(st.u, g);
            if (w_energy) {
                const auto er = energy_from_gradient(st.u, g, eps);
                row.dirichlet = er.dirichlet;
                row.potential = er.potential;
                row.energy = er.total();
            }
            if (w_jac) {
                ju = jacobian_from_gradient(g);
                row.ju_integral = integral(*ju);
            }
        }

        if (w_zeros) {
            const VortexSet vs = detect_zeros(st.u);
            row.zero_count = static_cast<long>(vs.zs.size());
            row.total_degree = vs.total_degree();
            row.suspect = vs.suspect;
            if (tracker_alive) {
                try {
                    tracker.add(st.t, vs);
                    row.max_drift = latest_drift(tracker.record());
                    const auto& rec = tracker.record();
                    for (std::size_t k = 0; k < rec.points.size(); ++k) {
                        const auto& p = rec.points[k].back();
                        files.tracks << row.step << ',' << fmt_g17(row.t) << ',' << k << ','
                                     << fmt_g17(p.pos.x) << ',' << fmt_g17(p.pos.y) << ','
                                     << p.degree << ',' << fmt_g17(p.drift) << '\n';
                    }
                    files.tracks << std::flush;
                } catch (const std::exception& e) {
                    tracker_alive = false;
                    tracker_error = e.what();
                    tracker_fail_t = st.t;
                }
            }
        }

        const bool env_due =
            w_env && (special || st.step_count % env_every == 0 || st.step_count == K);
        if (env_due) {
            const ComparisonState cs = cmp->at(st.t, st.u);
            row.env_f = cs.sup_et_w;
            row.env_h = envelope_h(st.t, eps);
            row.env_ratio = row.env_h > 0.0 ? row.env_f / row.env_h : nan_v;
            row.grad_f = cs.sup_grad_w;
            row.grad_h = grad_envelope_h(st.t, eps);
            row.grad_ratio = row.grad_h > 0.0 ? row.grad_f / row.grad_h : nan_v;
            row.r_sup = cs.r_sup;
            row.r_majorant = cs.r_majorant;
        }

        if (special) {
            HorizonSummary* H = nullptr;
            for (auto& h : horizons)
                if (std::abs(h.T - st.t) <= 1e-9) H = &h;
            json line;
            line["step"] = row.step;
            line["t"] = row.t;
            line["c0"] = H ? json(H->c0) : json(nullptr);
            if (H) {
                HorizonScratch& hsc = hscratch[H->c0];
                if (w_zeros) {
                    const BadDiskReport bd = bad_disk_scan(st.u, zeros0, eps);
                    hsc.m_min = bd.m_min;
                    line["m_min"] = bd.m_min;
                    line["disk_radius_unit"] = bd.disk_radius_unit;
                }
                if (w_jac && ju && !zeros0.zs.empty()) {
                    const auto ps = pair_all(*ju, zeros0, pair_radius);
                    hsc.pairings_over_pi.clear();
                    for (double p : ps) hsc.pairings_over_pi.push_back(p / std::numbers::pi);
                    line["radius"] = pair_radius;
                    line["pairings"] = ps;
                    line["over_pi"] = hsc.pairings_over_pi;
                }
                line["min_mod"] = row.min_mod;
                line["energy"] = row.energy;
                line["drift"] = row.max_drift;
                atomic_write_snapshot((fs::path(outdir) / "snapshots" /
                                       ("horizon_c0_" + fmt_g6(H->c0) + ".glf"))
                                          .string(),
                                      st.u, st.t, eps);
            }
            files.pairings << line.dump() << '\n' << std::flush;
        } else if (row.step == 0 && w_jac && ju && !zeros0.zs.empty()) {
            const auto ps = pair_all(*ju, zeros0, pair_radius);
            json line;
            line["step"] = 0;
            line["t"] = 0.0;
            line["c0"] = nullptr;
            line["radius"] = pair_radius;
            line["pairings"] = ps;
            std::vector<double> op;
            for (double p : ps) op.push_back(p / std::numbers::pi);
            line["over_pi"] = op;
            files.pairings << line.dump() << '\n' << std::flush;
        }

        files.series << series_line(row) << '\n' << std::flush;
        series.push_back(row);

        if (!special && st.step_count % ckpt_every == 0) {
            if (pending_ckpt)
                atomic_write_snapshot(ckpt_path, pending_ckpt->u, pending_ckpt->t, eps);
            pending_ckpt = FlowState{st.t, st.step_count, st.u};
        }
    };

    ObservationPlan plan;
    plan.cadence = cfg.cadence;
    for (const auto& h : horizons) plan.special_times.push_back(h.T);

    FlowState final_state = resuming ? run(std::move(start), params, plan, observer)
                                     : run(datum.u0, params, plan, observer);
    atomic_write_snapshot((fs::path(outdir) / "snapshots" / "final.glf").string(), final_state.u,
                          final_state.t, eps);

    // ---- assemble result -------------------------------------------------
    RunResult R;
    R.eps = eps;
    R.n = params.n;
    R.dt = dt;
    R.t_end = params.t_end;
    R.datum = std::move(datum);
    R.series = std::move(series);
    R.tracks = tracker.record();
    R.horizons = std::move(horizons);

    const double drift_unit = eps * std::sqrt(std::log(1.0 / eps));
    for (auto& H : R.horizons) {
        const auto it = hscratch.find(H.c0);
        if (it != hscratch.end()) {
            H.m_min = it->second.m_min;
            H.pairings_over_pi = it->second.pairings_over_pi;
        }
        long count0 = -1;
        double first_change = nan_v;
        for (const auto& r : R.series) {
            if (r.t > H.T + 1e-9) continue;
            H.min_modulus_to_T = std::isnan(H.min_modulus_to_T)
                                     ? r.min_mod
                                     : std::min(H.min_modulus_to_T, r.min_mod);
            if (r.zero_count >= 0) {
                if (count0 < 0) count0 = r.zero_count;
                if (r.zero_count != count0 && std::isnan(first_change)) {
                    H.zero_count_constant = false;
                    first_change = r.t;
                }
                if (r.suspect) H.any_suspect = true;
            }
            if (r.special && std::abs(r.t - H.T) <= 1e-9) {
                H.energy_at_T = r.energy;
                H.drift_at_T = r.max_drift;
            }
        }
        if (w_zeros) {
            if (!tracker_alive && tracker_fail_t <= H.T + 1e-9) H.degrees_constant = false;
            for (const auto& tr : R.tracks.points) {
                int d0 = 0;
                bool first = true;
                for (const auto& p : tr) {
                    if (p.t > H.T + 1e-9) break;
                    if (first) {
                        d0 = p.degree;
                        first = false;
                    } else if (p.degree != d0) {
                        H.degrees_constant = false;
                    }
                }
            }
            H.drift_ratio = H.drift_at_T / drift_unit;
        }
        if (!H.pairings_over_pi.empty() &&
            H.pairings_over_pi.size() == R.datum.cert.zeros.zs.size()) {
            double err = 0.0;
            for (std::size_t j = 0; j < H.pairings_over_pi.size(); ++j)
                err = std::max(err, std::abs(H.pairings_over_pi[j] -
                                             R.datum.cert.zeros.zs[j].degree));
            H.pairing_error = err;
        }
    }

    // Envelope fits over 0 < t <= T(gate); residual-majorant ratio over all samples.
    std::vector<double> ts, fs_env, fs_grad;
    for (const auto& r : R.series) {
        if (!std::isnan(r.r_majorant) && r.r_majorant > 0.0)
            R.r_ratio_max = std::max(R.r_ratio_max, r.r_sup / r.r_majorant);
        if (std::isnan(r.env_f) || !(r.t > 0.0) || r.t > gate_T + 1e-9) continue;
        if (!ts.empty() && !(r.t > ts.back())) continue;  // dedupe special/grid collisions
        ts.push_back(r.t);
        fs_env.push_back(r.env_f);
        fs_grad.push_back(r.grad_f);
    }
    if (!ts.empty()) {
        R.env_fit = fit_envelope(ts, fs_env, eps, &envelope_h);
        R.grad_env_fit = fit_envelope(ts, fs_grad, eps, &grad_envelope_h);
    }

    // Gronwall on the run's own defect: h = a_fit * envelope, c = max(1, a_fit).
    bool gron_ok = false;
    std::string gron_note;
    if (w_gron) {
        const double a = R.env_fit.a_fit;
        if (!(a > 0.0)) {
            gron_ok = true;
            gron_note = "defect at machine zero; lemma vacuous";
        } else if (ts.size() < 3) {
            gron_ok = false;
            gron_note = "fewer than 3 envelope samples before the gate horizon";
        } else {
            GronwallInstance inst;
            inst.t = ts;
            inst.f = fs_env;
            inst.c = std::max(1.0, a);
            inst.T = gate_T;
            for (double t : ts) inst.h.push_back(a * envelope_h(t, eps));
            R.gronwall = gronwall_verify(inst);
            gron_ok = R.gronwall.validated && R.gronwall.hypothesis();
        }
    }

    // ---- verdicts --------------------------------------------------------
    const HorizonSummary* gate = R.horizon_at(cfg.c0);
    if (w_zeros && gate) {
        json ev;
        ev["zero_count_initial"] = R.datum.cert.zeros.zs.size();
        ev["zero_count_constant"] = gate->zero_count_constant;
        ev["degrees_constant"] = gate->degrees_constant;
        ev["any_suspect"] = gate->any_suspect;
        ev["drift_at_T"] = gate->drift_at_T;
        ev["drift_ratio"] = gate->drift_ratio;
        if (!tracker_alive) {
            ev["tracker_error"] = tracker_error;
            ev["tracker_fail_t"] = tracker_fail_t;
        }
        const bool tracker_ok = tracker_alive || tracker_fail_t > gate->T + 1e-9;
        R.verdicts.push_back({"zeros",
                              gate->zero_count_constant && gate->degrees_constant &&
                                  !gate->any_suspect && tracker_ok,
                              ev.dump()});
    }
    if (w_energy) {
        double e0 = nan_v, worst_uptick = 0.0;
        const SeriesRow* prev = nullptr;
        for (const auto& r : R.series) {
            if (r.special || std::isnan(r.energy)) continue;
            if (std::isnan(e0)) e0 = r.energy;
            if (prev) worst_uptick = std::max(worst_uptick, r.energy - prev->energy);
            prev = &r;
        }
        const double tol = 1e-6 * e0;
        json ev;
        ev["E0"] = e0;
        ev["E_at_gate_T"] = gate ? gate->energy_at_T : nan_v;
        ev["worst_uptick"] = worst_uptick;
        ev["tolerance"] = tol;
        R.verdicts.push_back({"energy", !std::isnan(e0) && worst_uptick <= tol, ev.dump()});
    }
    if (w_jac) {
        double max_ju = 0.0;
        for (const auto& r : R.series)
            if (!std::isnan(r.ju_integral)) max_ju = std::max(max_ju, std::abs(r.ju_integral));
        json ev;
        ev["max_abs_ju_integral"] = max_ju;
        ev["pairing_error_at_gate"] = gate ? gate->pairing_error : nan_v;
        if (gate) ev["pairings_over_pi"] = gate->pairings_over_pi;
        R.verdicts.push_back({"jacobian", max_ju <= 1e-8, ev.dump()});
    }
    if (cfg.wants(Verification::envelopes)) {
        bool finite = !ts.empty();
        for (std::size_t i = 0; i < ts.size(); ++i)
            if (!std::isfinite(fs_env[i]) || !std::isfinite(fs_grad[i])) finite = false;
        json ev;
        ev["a_fit"] = R.env_fit.a_fit;
        ev["t_argmax"] = R.env_fit.t_argmax;
        ev["a_grad_fit"] = R.grad_env_fit.a_fit;
        ev["grad_t_argmax"] = R.grad_env_fit.t_argmax;
        ev["r_ratio_max"] = R.r_ratio_max;
        ev["samples"] = ts.size();
        R.verdicts.push_back({"envelopes", finite && R.r_ratio_max <= 4.0, ev.dump()});
    }
    if (w_gron) {
        json ev = gronwall_json(R.gronwall);
        ev["c"] = std::max(1.0, R.env_fit.a_fit);
        ev["a_fit"] = R.env_fit.a_fit;
        if (!gron_note.empty()) ev["note"] = gron_note;
        const double A = std::max(1.0, R.env_fit.a_fit);
        if (eps < 1.0 / (16.0 * A * A)) {
            const MonotoneBound mb = defect_estimate_bound(eps, A);
            ev["defect_bound_margin"] = mb.margin;
            ev["defect_bound_holds"] = mb.holds;
        } else {
            ev["defect_bound_margin"] = nullptr;
        }
        R.verdicts.push_back({"gronwall", gron_ok, ev.dump()});
    }

    // ---- run.ndjson ------------------------------------------------------
    {
        std::ofstream nd(runnd_path, std::ios::trunc);
        json head;
        head["type"] = "run";
        head["eps"] = eps;
        head["n"] = params.n;
        head["dt"] = dt;
        head["t_end"] = params.t_end;
        head["steps"] = K;
        head["cadence"] = cfg.cadence;
        head["datum"] = to_string(cfg.datum.kind);
        head["seed"] = cfg.datum.seed;
        head["alpha0"] = R.datum.cert.alpha0;
        head["zero_count0"] = R.datum.cert.zeros.zs.size();
        head["initial_energy"] = R.datum.achieved_energy;
        head["retries"] = R.datum.retries;
        nd << head.dump() << '\n';
        for (const auto& H : R.horizons) {
            json j;
            j["type"] = "horizon";
            j["c0"] = H.c0;
            j["T"] = H.T;
            j["energy_at_T"] = H.energy_at_T;
            j["min_modulus_to_T"] = H.min_modulus_to_T;
            j["drift_at_T"] = H.drift_at_T;
            j["drift_ratio"] = H.drift_ratio;
            j["m_min"] = H.m_min;
            j["pairings_over_pi"] = H.pairings_over_pi;
            j["pairing_error"] = H.pairing_error;
            j["zero_count_constant"] = H.zero_count_constant;
            j["degrees_constant"] = H.degrees_constant;
            j["any_suspect"] = H.any_suspect;
            nd << j.dump() << '\n';
        }
        if (w_env) {
            json j;
            j["type"] = "envelope";
            j["a_fit"] = R.env_fit.a_fit;
            j["t_argmax"] = R.env_fit.t_argmax;
            j["a_grad_fit"] = R.grad_env_fit.a_fit;
            j["r_ratio_max"] = R.r_ratio_max;
            nd << j.dump() << '\n';
        }
        for (const auto& v : R.verdicts) nd << verdict_json(v).dump() << '\n';
        json tail;
        tail["type"] = "exit";
        tail["code"] = R.exit_code();
        nd << tail.dump() << '\n';
    }
    return R;
}

namespace {

Verdict ratio_stability_verdict(const std::string& name, const std::vector<double>& values,
                                double cap) {
    json ev;
    ev["values"] = values;
    bool pass = false;
    double lo = 1e300, hi = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (values.empty()) {
        pass = false;
        ev["note"] = "no values";
    } else if (hi <= 1e-6) {
        pass = true;  // identically-zero quantity: stable degenerately
        ev["note"] = "all values at machine zero";
    } else if (lo <= 1e-6) {
        pass = false;
        ev["note"] = "mixed zero and nonzero values";
    } else {
        ev["max_over_min"] = hi / lo;
        pass = hi / lo <= cap;
    }
    ev["cap"] = cap;
    return {name, pass, ev.dump()};
}

}  // namespace

Verdict energy_scaling_verdict(std::span<const double> eps, std::span<const double> energies) {
    const ScalingFit fit = fit_log_scaling(eps, energies);
    json ev;
    ev["slope"] = fit.slope;
    ev["intercept"] = fit.intercept;
    ev["max_rel_residual"] = fit.max_rel_residual;
    ev["rel_residuals"] = fit.rel_residuals;
    ev["energies"] = std::vector<double>(energies.begin(), energies.end());
    return {"energy_scaling", fit.max_rel_residual <= 0.15, ev.dump()};
}

SweepResult run_sweep(const RunConfig& cfg, const std::string& outdir, int jobs) {
    cfg.validate_shape();
    if (cfg.eps_list.size() < 3)
        throw std::invalid_argument("sweep: need at least 3 eps values, got " +
                                    std::to_string(cfg.eps_list.size()));
    fs::create_directories(outdir);
    const std::size_t m = cfg.eps_list.size();
    std::vector<std::optional<RunResult>> slots(m);
    std::vector<std::exception_ptr> errors(m);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= m) return;
            const double e = cfg.eps_list[i];
            const std::string sub = (fs::path(outdir) / ("eps_" + fmt_g6(e))).string();
            try {
                slots[i] = run_single(cfg, e, sub, false);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(m)));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::ofstream nd((fs::path(outdir) / "sweep.ndjson").string(), std::ios::trunc);
    for (std::size_t i = 0; i < m; ++i) {
        if (errors[i]) {
            std::string what = "unknown error";
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                what = e.what();
            }
            json j;
            j["type"] = "error";
            j["eps"] = cfg.eps_list[i];
            j["what"] = what;
            nd << j.dump() << '\n' << std::flush;
        }
    }
    for (std::size_t i = 0; i < m; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);  // partials are on disk

    SweepResult S;
    for (auto& s : slots) S.runs.push_back(std::move(*s));

    // ---- aggregates at the gate horizon ---------------------------------
    const bool zero_free = S.runs.front().datum.cert.zeros.zs.empty();
    if (cfg.wants(Verification::zeros)) {
        bool all = true;
        json ev;
        for (const auto& r : S.runs)
            for (const auto& v : r.verdicts)
                if (v.name == "zeros" && !v.pass) all = false;
        ev["runs"] = m;
        S.aggregate.push_back({"zero_conservation", all, ev.dump()});

        if (zero_free) {
            double worst = 1e300;
            for (const auto& r : S.runs)
                if (const auto* g = r.horizon_at(cfg.c0)) worst = std::min(worst, g->min_modulus_to_T);
            json e2;
            e2["min_modulus_over_sweep"] = worst;
            S.aggregate.push_back({"zero_free_persistence", worst > 0.0, e2.dump()});
        } else {
            std::vector<double> ratios, ms;
            for (const auto& r : S.runs)
                if (const auto* g = r.horizon_at(cfg.c0)) {
                    ratios.push_back(g->drift_ratio);
                    ms.push_back(g->m_min);
                }
            S.aggregate.push_back(ratio_stability_verdict("drift_stability", ratios, 4.0));
            double mmax = 0.0;
            for (double v : ms) mmax = std::max(mmax, v);
            json e3;
            e3["m_min_per_run"] = ms;
            e3["m"] = mmax;
            S.aggregate.push_back({"bad_disk", !ms.empty() && mmax <= 16.0, e3.dump()});
        }
    }
    if (cfg.wants(Verification::energy)) {
        std::vector<double> es, Es;
        for (const auto& r : S.runs)
            if (const auto* g = r.horizon_at(cfg.c0)) {
                es.push_back(r.eps);
                Es.push_back(g->energy_at_T);
            }
        S.aggregate.push_back(energy_scaling_verdict(es, Es));
    }
    if (cfg.wants(Verification::envelopes)) {
        std::vector<double> as, gs;
        for (const auto& r : S.runs) {
            as.push_back(r.env_fit.a_fit);
            gs.push_back(r.grad_env_fit.a_fit);
        }
        const Verdict va = ratio_stability_verdict("envelope_stability", as, 4.0);
        const Verdict vg = ratio_stability_verdict("grad_envelope_stability", gs, 4.0);
        S.aggregate.push_back(va);
        S.aggregate.push_back(vg);
    }
    if (cfg.wants(Verification::jacobian) && !zero_free) {
        std::vector<double> errs;
        for (const auto& r : S.runs)
            if (const auto* g = r.horizon_at(cfg.c0)) errs.push_back(g->pairing_error);
        bool monotone = !errs.empty();
        for (std::size_t i = 0; i + 1 < errs.size(); ++i)
            if (!(errs[i + 1] < errs[i])) monotone = false;
        const double last = errs.empty() ? nan_v : errs.back();
        json ev;
        ev["pairing_errors"] = errs;
        ev["monotone_decreasing"] = monotone;
        ev["smallest_eps_error"] = last;
        S.aggregate.push_back({"pairing_concentration", monotone && last <= 0.1, ev.dump()});
    }

    for (const auto& r : S.runs) {
        json j;
        j["type"] = "run";
        j["eps"] = r.eps;
        j["n"] = r.n;
        j["all_pass"] = r.all_pass();
        json vs = json::array();
        for (const auto& v : r.verdicts) vs.push_back(verdict_json(v));
        j["verdicts"] = vs;
        nd << j.dump() << '\n';
    }
    for (const auto& v : S.aggregate) {
        json j = verdict_json(v);
        j["type"] = "aggregate";
        nd << j.dump() << '\n';
    }
    json tail;
    tail["type"] = "exit";
    tail["code"] = S.exit_code();
    nd << tail.dump() << '\n';
    return S;
}

GronwallInstance load_gronwall_csv(const std::string& path, double c) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("gronwall: cannot open '" + path + "'");
    GronwallInstance inst;
    inst.c = c;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string l = trim(line);
        if (l.empty()) continue;
        const auto f = split(l, ',');
        if (f.size() != 3) throw std::invalid_argument("gronwall: expected t,f,h rows, got '" + l + "'");
        if (first) {
            first = false;
            char* end = nullptr;
            std::strtod(f[0].c_str(), &end);
            if (end == f[0].c_str()) continue;  // header line
        }
        char* e0 = nullptr;
        const double t = std::strtod(f[0].c_str(), &e0);
        if (e0 == f[0].c_str()) throw std::invalid_argument("gronwall: malformed row '" + l + "'");
        inst.t.push_back(t);
        inst.f.push_back(std::strtod(f[1].c_str(), nullptr));
        inst.h.push_back(std::strtod(f[2].c_str(), nullptr));
    }
    if (!inst.t.empty()) inst.T = inst.t.back();
    return inst;
}

}  // namespace glf
