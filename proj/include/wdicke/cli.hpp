#pragma once
// Driver layer: run configuration, CSV and manifest output, checksums, the
// portable random-state sampler, and one run_* entry point per experiment.
// The command-line binary is a thin argument shim over these functions, so
// tests drive them directly.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "wdicke/exact.hpp"
#include "wdicke/fullspace.hpp"
#include "wdicke/gdicke.hpp"
#include "wdicke/spectral.hpp"
#include "wdicke/twosite.hpp"

#define WDICKE_VERSION "0.1.0"

namespace wdicke {

// exit codes shared by the binary and the run_* functions
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverError = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string experiment;
    std::vector<int> n_list;
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    std::vector<double> gamma3_list{0.0};
    std::optional<double> gamma3prime;  // unset: follows gamma3 per sweep point
    std::string geometry = "alltoall";  // alltoall | chain
    std::string boundary = "periodic";  // periodic | open
    int sector = 0;                     // sz2 (collective) or delta_sz (chain)
    double safety = 1.0;                // integrator step policy, h = safety/rho
    double horizon = 0.0;               // 0: per-experiment default rule
    double fit_lo = 0.0, fit_hi = 0.0;  // 0: per-experiment default window
    int arnoldi_subspace = 64;
    int arnoldi_restarts = 400;
    double arnoldi_tol = 1e-11;
    std::uint64_t seed = 12345;
    int workers = 1;
    int n_states = 20;
    std::string out_dir = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for '" + key + "': " + v);
    }
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::int64_t x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for '" + key + "': " + v);
    }
}

}  // namespace detail

// Apply one key=value pair; used by both the config file and flag overrides.
inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_double;
    using detail::parse_int;
    if (key == "experiment") {
        c.experiment = value;
    } else if (key == "n") {
        c.n_list.clear();
        for (const auto& t : detail::split(value, ','))
            if (!t.empty()) c.n_list.push_back(int(parse_int(key, t)));
    } else if (key == "gamma1") {
        c.gamma1 = parse_double(key, value);
    } else if (key == "gamma2") {
        c.gamma2 = parse_double(key, value);
    } else if (key == "gamma3") {
        c.gamma3_list.clear();
        for (const auto& t : detail::split(value, ','))
            if (!t.empty()) c.gamma3_list.push_back(parse_double(key, t));
        if (c.gamma3_list.empty()) throw ConfigError("gamma3: empty list");
    } else if (key == "gamma3prime") {
        c.gamma3prime = parse_double(key, value);
    } else if (key == "geometry") {
        if (value != "alltoall" && value != "chain") throw ConfigError("geometry: " + value);
        c.geometry = value;
    } else if (key == "boundary") {
        if (value != "periodic" && value != "open") throw ConfigError("boundary: " + value);
        c.boundary = value;
    } else if (key == "sector") {
        c.sector = int(parse_int(key, value));
    } else if (key == "safety") {
        c.safety = parse_double(key, value);
    } else if (key == "horizon") {
        c.horizon = parse_double(key, value);
    } else if (key == "fit_lo") {
        c.fit_lo = parse_double(key, value);
    } else if (key == "fit_hi") {
        c.fit_hi = parse_double(key, value);
    } else if (key == "arnoldi_subspace") {
        c.arnoldi_subspace = int(parse_int(key, value));
    } else if (key == "arnoldi_restarts") {
        c.arnoldi_restarts = int(parse_int(key, value));
    } else if (key == "arnoldi_tol") {
        c.arnoldi_tol = parse_double(key, value);
    } else if (key == "seed") {
        c.seed = std::uint64_t(parse_int(key, value));
    } else if (key == "workers") {
        c.workers = int(parse_int(key, value));
        if (c.workers < 1) throw ConfigError("workers >= 1");
    } else if (key == "n_states") {
        c.n_states = int(parse_int(key, value));
    } else if (key == "out") {
        c.out_dir = value;
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

// Flat key=value file; [section] headers are organizational only (the key
// space is flat). '#' and ';' start comments.
inline RunConfig parse_config_file(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("malformed section at line " + std::to_string(lineno));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key=value at line " + std::to_string(lineno));
        apply_config_value(base, detail::trim(line.substr(0, eq)),
                           detail::trim(line.substr(eq + 1)));
    }
    return base;
}

// --- output formatting ---

// 17 significant digits: the shortest form that round-trips any double.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);  // fixed \n line ends on every platform
    if (!out) throw std::runtime_error("cannot write " + path);
    auto put_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << csv_quote(row[i]);
        }
        out << '\n';
    };
    put_row(header);
    for (const auto& r : rows) put_row(r);
}

inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

inline std::string file_checksum_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot checksum " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a(buf, std::size_t(in.gcount()), h);
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

// Ordered key=value manifest, written to a temp file and renamed into place
// after all outputs exist: an interrupted run leaves no manifest.
struct RunManifest {
    std::vector<std::pair<std::string, std::string>> entries;
    void add(const std::string& k, const std::string& v) { entries.emplace_back(k, v); }
    void add(const std::string& k, double v) { entries.emplace_back(k, format_number(v)); }
};

inline void echo_config(RunManifest& m, const RunConfig& c) {
    m.add("version", WDICKE_VERSION);
    m.add("experiment", c.experiment);
    std::string ns;
    for (std::size_t i = 0; i < c.n_list.size(); ++i)
        ns += (i ? "," : "") + std::to_string(c.n_list[i]);
    m.add("n", ns);
    m.add("gamma1", c.gamma1);
    m.add("gamma2", c.gamma2);
    std::string g3;
    for (std::size_t i = 0; i < c.gamma3_list.size(); ++i)
        g3 += (i ? "," : "") + format_number(c.gamma3_list[i]);
    m.add("gamma3", g3);
    m.add("gamma3prime", c.gamma3prime ? format_number(*c.gamma3prime) : "follows_gamma3");
    m.add("geometry", c.geometry);
    m.add("boundary", c.boundary);
    m.add("sector", std::to_string(c.sector));
    m.add("safety", c.safety);
    m.add("horizon", c.horizon);
    m.add("fit_lo", c.fit_lo);
    m.add("fit_hi", c.fit_hi);
    m.add("arnoldi_subspace", std::to_string(c.arnoldi_subspace));
    m.add("arnoldi_restarts", std::to_string(c.arnoldi_restarts));
    m.add("arnoldi_tol", c.arnoldi_tol);
    m.add("seed", std::to_string(c.seed));
    m.add("workers", std::to_string(c.workers));
    m.add("n_states", std::to_string(c.n_states));
    m.add("out", c.out_dir);
}

inline void write_manifest_atomic(const std::string& dir, const RunManifest& m) {
    namespace fs = std::filesystem;
    const fs::path final_path = fs::path(dir) / "manifest.txt";
    const fs::path tmp_path = fs::path(dir) / "manifest.txt.tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp_path.string());
        for (const auto& [k, v] : m.entries) out << k << '=' << v << '\n';
    }
    fs::rename(tmp_path, final_path);
}

// --- random states ---

// Haar-random pure state with a fixed, documented sampling algorithm so a
// seed identifies the same state everywhere: each amplitude is
// (z1 + i z2)/..., z from one Box-Muller pair per amplitude built on
// u = (rng() >> 11) * 2^-53 in [0,1) from std::mt19937_64, i.e.
// r = sqrt(-2 ln(1-u1)), z1 = r cos(2 pi u2), z2 = r sin(2 pi u2);
// the vector is normalized at the end.
inline Eigen::VectorXcd haar_state(std::int64_t dim, std::mt19937_64& rng) {
    if (dim < 1) throw std::invalid_argument("haar_state: dim >= 1");
    auto uni = [&rng]() { return double(rng() >> 11) * 0x1p-53; };
    Eigen::VectorXcd v(dim);
    for (std::int64_t i = 0; i < dim; ++i) {
        const double u1 = uni(), u2 = uni();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        v[i] = Complex(r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2));
    }
    v.normalize();
    return v;
}

// --- shared driver helpers ---

namespace detail {

template <class F>
void parallel_for(int workers, std::int64_t n, F&& body) {
    workers = std::max(1, workers);
    if (workers == 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<std::int64_t>(workers, n); ++w)
        pool.emplace_back([&] {
            for (std::int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    for (auto& t : pool) t.join();
}

struct RunTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

inline JumpRates rates_of(const RunConfig& c, double gamma3) {
    JumpRates r;
    r.gamma1 = c.gamma1;
    r.gamma2 = c.gamma2;
    r.gamma3 = gamma3;
    r.gamma3prime = c.gamma3prime ? *c.gamma3prime : gamma3;
    r.geometry.lattice = c.geometry == "chain" ? Lattice::Chain : Lattice::AllToAll;
    r.geometry.periodic = c.boundary == "periodic";
    return r;
}

inline ArnoldiOptions arnoldi_of(const RunConfig& c) {
    ArnoldiOptions o;
    o.subspace = c.arnoldi_subspace;
    o.max_restarts = c.arnoldi_restarts;
    o.tol = c.arnoldi_tol;
    o.seed = c.seed;
    return o;
}

inline void finish_run(const RunConfig& c, RunManifest m, const RunTimer& timer,
                       const std::vector<std::string>& outputs,
                       const std::vector<std::string>& warnings) {
    for (std::size_t i = 0; i < warnings.size(); ++i)
        m.add("warning." + std::to_string(i), warnings[i]);
    for (const auto& f : outputs)
        m.add("checksum." + std::filesystem::path(f).filename().string(),
              file_checksum_hex(f));
    m.add("duration_seconds", timer.seconds());
    write_manifest_atomic(c.out_dir, m);
}

}  // namespace detail

// --- experiments ---

// Gap sweep. All-to-all: deflated spectrum of the collective generator in
// the sector, columns (N, Ngamma3, gap, kernel_dim). Chain: the
// translation-invariant zero-magnetization sector gap plus the closed-form
// coherence-block gap in its own column.
inline int run_gap(const RunConfig& cfg) {
    detail::RunTimer timer;
    RunConfig c = cfg;
    if (c.n_list.empty()) c.n_list = c.geometry == "chain" ? std::vector<int>{6, 8}
                                                           : std::vector<int>{20, 40};
    std::filesystem::create_directories(c.out_dir);
    if (c.geometry == "chain" && c.boundary != "periodic")
        throw ConfigError("gap: chain route uses the translation sector; boundary=periodic");
    if (c.geometry == "chain" && c.sector != 0)
        throw ConfigError("gap: only the zero-magnetization sector is wired");

    const std::int64_t npts = std::int64_t(c.n_list.size()) * c.gamma3_list.size();
    std::vector<std::vector<std::string>> rows(npts);
    std::vector<std::string> config_errors(npts);  // must not throw across worker threads
    std::atomic<bool> solver_failed{false};
    std::vector<std::string> warnings;

    detail::parallel_for(c.workers, npts, [&](std::int64_t idx) {
        const int N = c.n_list[idx / c.gamma3_list.size()];
        const double g3 = c.gamma3_list[idx % c.gamma3_list.size()];
        const auto rates = detail::rates_of(c, g3);
        std::string status = "ok";
        double gap = 0.0, offdiag = 0.0;
        std::int64_t kdim = 0;
        try {
            if (c.geometry == "alltoall") {
                const GDickeBasis basis = enumerate_basis(N, c.sector);
                const auto L = build_alltoall_lindbladian(basis, rates);
                Eigen::MatrixXd kern(basis.dim(), 2);
                kern.col(0) = vacuum_vector(basis);
                kern.col(1) = w_state_vector(basis);
                if (basis.dim() <= 4096) {
                    const auto spec = eig_dense_deflated(L.dense(), kern);
                    gap = spec.gap;
                    kdim = spec.kernel_dim;
                } else {
                    const auto spec =
                        eig_gap_arnoldi(L, kern.cast<Complex>(), 6, detail::arnoldi_of(c));
                    gap = spec.gap;
                    kdim = spec.kernel_dim;
                }
            } else {
                const auto ts = build_translation_sector(N, rates);
                Eigen::MatrixXd kern(ts.op.rows, 2);
                kern.col(0) = ts.vacuum;
                kern.col(1) = ts.w_state;
                if (ts.op.rows <= 4096) {
                    const auto spec = eig_dense_deflated(ts.op.dense(), kern);
                    gap = spec.gap;
                    kdim = spec.kernel_dim;
                } else {
                    const auto spec =
                        eig_gap_arnoldi(ts.op, kern.cast<Complex>(), 6, detail::arnoldi_of(c));
                    gap = spec.gap;
                    kdim = spec.kernel_dim;
                }
                offdiag = offdiag_gap(N, rates.gamma1, rates.gamma3);
            }
        } catch (const std::invalid_argument& e) {
            config_errors[idx] = e.what();
            status = "config";
        } catch (const std::exception& e) {
            status = std::string("nonconverged: ") + e.what();
            solver_failed = true;
        }
        rows[idx] = {std::to_string(N), format_number(N * g3), format_number(gap),
                     std::to_string(kdim),
                     c.geometry == "chain" ? format_number(offdiag) : std::string(),
                     status};
    });
    for (const auto& e : config_errors)
        if (!e.empty()) throw ConfigError(e);

    const std::string csv = (std::filesystem::path(c.out_dir) / "gap.csv").string();
    write_csv(csv, {"N", "Ngamma3", "gap", "kernel_dim", "offdiag_gap", "status"}, rows);
    RunManifest m;
    echo_config(m, c);
    for (const auto& w : rate_warnings(detail::rates_of(c, c.gamma3_list.front())))
        warnings.push_back(w);
    for (const auto& r0 : rows)
        if (r0.back() != "ok") warnings.push_back("row " + r0[0] + "," + r0[1] + ": " + r0.back());
    detail::finish_run(c, std::move(m), timer, {csv}, warnings);
    return solver_failed ? kExitSolverError : kExitOk;
}

// Steady-state distribution: evolve the fully polarized state in the
// collective sector to the horizon, emit the magnetization distribution and
// the pair-correlator ratio against the target-state value 2/N.
inline int run_steady(const RunConfig& cfg) {
    detail::RunTimer timer;
    RunConfig c = cfg;
    if (c.n_list.empty()) c.n_list = {80};
    if (c.geometry != "alltoall") throw ConfigError("steady: alltoall geometry only");
    std::filesystem::create_directories(c.out_dir);

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> warnings;
    RunManifest m;
    echo_config(m, c);
    m.add("horizon_rule", "t*(N-1)*max(gamma1,gamma3)=const; const=79000 (gamma1>0) or 100");

    for (int N : c.n_list) {
        for (double g3 : c.gamma3_list) {
            const auto rates = detail::rates_of(c, g3);
            if (rates.gamma1 == 0.0 && rates.gamma3 == 0.0)
                throw ConfigError("steady: need gamma1 > 0 or gamma3 > 0");
            for (const auto& w : rate_warnings(rates)) warnings.push_back(w);
            double t_end = c.horizon;
            if (t_end <= 0.0)
                t_end = rates.gamma1 > 0.0 ? 79000.0 / ((N - 1) * rates.gamma1)
                                           : 100.0 / ((N - 1) * rates.gamma3);
            const GDickeBasis basis = enumerate_basis(N, c.sector);
            const auto L = build_alltoall_lindbladian(basis, rates);
            EvolveOptions eopt;
            eopt.safety = c.safety;
            eopt.seed = c.seed;
            // magnetization populations plus the pair correlator, one pass
            std::vector<std::pair<std::string, Eigen::RowVectorXd>> obs;
            for (const auto& s : basis.states)
                if (s.q2 == basis.N)
                    obs.emplace_back(std::to_string(s.qz2), alpha_functional(basis, s.qz2));
            const std::size_t n_alpha = obs.size();
            obs.emplace_back("xx", xx_functional(basis));
            const auto series = evolve(L, Eigen::VectorXd(fully_up_vector(basis)), {t_end},
                                       obs, trace_functional(basis), eopt);
            if (series.trace_drift_rate > 1e-9)
                warnings.push_back("trace drift " + format_number(series.trace_drift_rate) +
                                   " at N=" + std::to_string(N));
            const double ratio = series.values(0, n_alpha) / (2.0 / N);
            for (std::size_t i = 0; i < n_alpha; ++i)
                rows.push_back({std::to_string(N), format_number(g3), format_number(t_end),
                                obs[i].first, format_number(series.values(0, i)),
                                format_number(ratio)});
        }
    }
    const std::string csv = (std::filesystem::path(c.out_dir) / "steady.csv").string();
    write_csv(csv, {"N", "gamma3", "horizon_t", "qz2", "alpha", "xx_ratio"}, rows);
    detail::finish_run(c, std::move(m), timer, {csv}, warnings);
    return kExitOk;
}

// Magnetization decay toward the target-state density 1/N; power-law fit of
// the excess density over the configured rescaled-time window (exponential
// fit deep in the converging phase).
inline int run_decay(const RunConfig& cfg) {
    detail::RunTimer timer;
    RunConfig c = cfg;
    if (c.n_list.empty()) c.n_list = {200};
    if (c.geometry != "alltoall") throw ConfigError("decay: alltoall geometry only");
    if (c.gamma1 <= 0.0) throw ConfigError("decay: gamma1 > 0 sets the clock");
    std::filesystem::create_directories(c.out_dir);
    const int N = c.n_list.front();
    const double g3 = c.gamma3_list.front();
    const auto rates = detail::rates_of(c, g3);

    const double t_end = c.horizon > 0.0 ? c.horizon : 2.0 / c.gamma1;
    const double fit_lo = c.fit_lo > 0.0 ? c.fit_lo : 0.08;
    const double fit_hi = c.fit_hi > 0.0 ? c.fit_hi : 0.8;
    const GDickeBasis basis = enumerate_basis(N, c.sector);
    const auto L = build_alltoall_lindbladian(basis, rates);
    EvolveOptions eopt;
    eopt.safety = c.safety;
    eopt.seed = c.seed;
    const auto grid = log_time_grid(1e-2 / c.gamma1, t_end, 60);
    std::vector<std::pair<std::string, Eigen::RowVectorXd>> obs{{"m", m_functional(basis)}};
    const auto series = evolve(L, Eigen::VectorXd(fully_up_vector(basis)), grid, obs,
                               trace_functional(basis), eopt);

    const double m_w = 1.0 / N;
    std::vector<std::vector<std::string>> rows;
    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double excess = series.values(i, 0) - m_w;
        rows.push_back({format_number(grid[i] * c.gamma1),
                        format_number(grid[i] * (N - 1) * c.gamma1), format_number(excess)});
        if (grid[i] > 0.0) {
            ts.push_back(grid[i] * c.gamma1);
            ys.push_back(excess);
        }
    }
    const bool power = N * g3 / c.gamma1 >= 1.0;
    const auto fit = fit_decay_exponent(ts, ys, fit_lo, fit_hi,
                                        power ? DecayModel::PowerLaw : DecayModel::Exponential);

    const std::string csv = (std::filesystem::path(c.out_dir) / "decay.csv").string();
    write_csv(csv, {"t_gamma1", "t_n1_gamma1", "m_minus_mw"}, rows);
    RunManifest m;
    echo_config(m, c);
    m.add("fit_model", power ? "power" : "exponential");
    m.add(power ? "fit_delta" : "fit_rate", fit.value);
    m.add("fit_stderr", fit.stderr_);
    m.add("fit_window_lo", fit_lo);
    m.add("fit_window_hi", fit_hi);
    std::vector<std::string> warnings = rate_warnings(rates);
    if (series.trace_drift_rate > 1e-9)
        warnings.push_back("trace drift " + format_number(series.trace_drift_rate));
    detail::finish_run(c, std::move(m), timer, {csv}, warnings);
    return kExitOk;
}

// Sector gaps across sizes in the three canonical rate regimes, with the
// dynamical exponent fitted per regime.
inline int run_exponent(const RunConfig& cfg) {
    detail::RunTimer timer;
    RunConfig c = cfg;
    if (c.n_list.empty()) c.n_list = {6, 7, 8, 9, 10};
    if (c.geometry != "chain") throw ConfigError("exponent: chain geometry only");
    std::filesystem::create_directories(c.out_dir);

    struct Phase {
        const char* name;
        double g1, g2, g3;
        int n_cap;  // near-degenerate clustering stops the Krylov route above this
    };
    const std::vector<Phase> phases{
        {"ordered", 1.0, 1.0, 0.0, 10},
        {"critical", 0.5, 0.5, 1.0, 9},
        {"mixed", 0.0, 0.0, 1.0, 10},
    };

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> warnings;
    bool solver_failed = false;
    RunManifest m;
    echo_config(m, c);

    for (const auto& ph : phases) {
        std::vector<std::pair<double, double>> pts;
        for (int N : c.n_list) {
            if (N > ph.n_cap) continue;
            JumpRates rates;
            rates.gamma1 = ph.g1;
            rates.gamma2 = ph.g2;
            rates.gamma3 = ph.g3;
            rates.gamma3prime = ph.g3;
            rates.geometry.lattice = Lattice::Chain;
            rates.geometry.periodic = true;
            std::string status = "ok";
            double gap = 0.0;
            try {
                const auto ts = build_translation_sector(N, rates);
                Eigen::MatrixXd kern(ts.op.rows, 2);
                kern.col(0) = ts.vacuum;
                kern.col(1) = ts.w_state;
                if (ts.op.rows <= 4096) {
                    gap = eig_dense_deflated(ts.op.dense(), kern).gap;
                } else {
                    gap = eig_gap_arnoldi(ts.op, kern.cast<Complex>(), 6,
                                          detail::arnoldi_of(c))
                              .gap;
                }
                pts.emplace_back(N, gap);
            } catch (const std::exception& e) {
                status = std::string("nonconverged: ") + e.what();
                solver_failed = true;
            }
            rows.push_back({ph.name, std::to_string(N), format_number(gap), status});
        }
        if (pts.size() >= 3) {
            const auto fit = fit_power_law(pts);
            m.add(std::string("z.") + ph.name, -fit.value);
            m.add(std::string("z_stderr.") + ph.name, fit.stderr_);
        }
    }
    const std::string csv = (std::filesystem::path(c.out_dir) / "exponent.csv").string();
    write_csv(csv, {"phase", "N", "gap", "status"}, rows);
    detail::finish_run(c, std::move(m), timer, {csv}, warnings);
    return solver_failed ? kExitSolverError : kExitOk;
}

// Distance-resolved pair correlator of the slow steady manifold on the open
// chain. In the converging phase the steady state reached from generic
// states is the target state itself (correlator 2/N at every distance); with
// conversion active a third steady direction exists and is combined with the
// two dark states into the positive steady density matrix orthogonal to
// both.
inline int run_correlations(const RunConfig& cfg) {
    detail::RunTimer timer;
    RunConfig c = cfg;
    if (c.n_list.empty()) c.n_list = {10};
    if (c.geometry != "chain") throw ConfigError("correlations: chain geometry only");
    if (c.boundary != "open") throw ConfigError("correlations: open boundary per the study");
    std::filesystem::create_directories(c.out_dir);
    const int N = c.n_list.front();
    const double g3 = c.gamma3_list.front();
    const auto rates = detail::rates_of(c, g3);
    const std::int64_t dim = std::int64_t(1) << N;

    Eigen::MatrixXcd rho;
    std::string source;
    if (g3 == 0.0) {
        rho = DensityMatrix::pure(w_state_ket(N)).rho;
        source = "converging-phase steady state (target state)";
    } else {
        const auto labels = delta_sz_block(N, 0).labels;
        const auto S = build_nn_superoperator(N, rates, Boundary::Open, 0);
        Eigen::MatrixXcd kern = Eigen::MatrixXcd::Zero(labels.size(), 2);
        const Eigen::VectorXcd wv = DensityMatrix::pure(w_state_ket(N)).vectorized();
        std::map<std::int64_t, std::int64_t> pos;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            pos[labels[i]] = std::int64_t(i);
            if (labels[i] == 0) kern(i, 0) = 1.0;
            kern(i, 1) = wv[labels[i]];
        }
        auto opt = detail::arnoldi_of(c);
        const auto spec = eig_gap_arnoldi(S, kern, 6, opt);
        // Exact third kernel vector when one exists; otherwise the slowest
        // relaxing direction (at finite size the mixed state is metastable,
        // with lifetime 1/gap, and every nonzero mode is traceless).
        Eigen::VectorXcd x3;
        if (spec.kernel_vectors.cols() > 0) {
            x3 = spec.kernel_vectors.col(0);
            source = "steady direction orthogonal to both dark states";
        } else if (spec.gap_vectors.cols() > 0) {
            x3 = spec.gap_vectors.col(0);
            source = "slowest relaxing direction (metastable mixed state)";
        } else {
            throw std::runtime_error("correlations: no direction beyond the dark states");
        }
        // combine with the dark states into a unit-trace state with no
        // weight on either dark state
        Eigen::VectorXcd vac_v = kern.col(0), w_v = kern.col(1);
        auto tr = [&](const Eigen::VectorXcd& v) {
            Complex s = 0.0;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if ((labels[i] >> N) == (labels[i] & (dim - 1))) s += v[i];
            return s;
        };
        auto w_weight = [&](const Eigen::VectorXcd& v) {
            return Complex(w_v.dot(v));  // <W|rho|W> since w_v holds conj pattern
        };
        auto vac_weight = [&](const Eigen::VectorXcd& v) { return v[pos.at(0)]; };
        Eigen::Matrix3cd A;
        Eigen::Vector3cd b;
        A << tr(x3), tr(vac_v), tr(w_v), vac_weight(x3), vac_weight(vac_v), vac_weight(w_v),
            w_weight(x3), w_weight(vac_v), w_weight(w_v);
        b << 1.0, 0.0, 0.0;
        const Eigen::Vector3cd sol = A.colPivHouseholderQr().solve(b);
        Eigen::VectorXcd combo = sol[0] * x3 + sol[1] * vac_v + sol[2] * w_v;
        rho = Eigen::MatrixXcd::Zero(dim, dim);
        for (std::size_t i = 0; i < labels.size(); ++i)
            rho(labels[i] >> N, labels[i] & (dim - 1)) = combo[i];
        rho = 0.5 * (rho + rho.adjoint()).eval();
    }

    std::vector<std::string> warnings;
    DensityMatrix dm;
    dm.n_sites = N;
    dm.rho = rho;
    if (dm.min_eigenvalue() < -1e-8)
        warnings.push_back("steady combination has negative weight " +
                           format_number(dm.min_eigenvalue()));

    std::vector<std::vector<std::string>> rows;
    for (int mdist = 1; mdist < N; ++mdist) {
        double acc = 0.0;
        int cnt = 0;
        for (int a = 0; a + mdist < N; ++a, ++cnt) {
            const std::int64_t mask = (std::int64_t(1) << a) | (std::int64_t(1) << (a + mdist));
            Complex s = 0.0;
            for (std::int64_t x = 0; x < dim; ++x) s += rho(x ^ mask, x);
            acc += s.real();
        }
        rows.push_back({std::to_string(mdist), format_number(acc / cnt)});
    }
    const std::string csv = (std::filesystem::path(c.out_dir) / "correlations.csv").string();
    write_csv(csv, {"m", "xx"}, rows);
    RunManifest m;
    echo_config(m, c);
    m.add("state_source", source);
    detail::finish_run(c, std::move(m), timer, {csv}, warnings);
    return kExitOk;
}

// Desk-scale invariant suite: structural checks across every module, a
// cross-solver agreement check, and integrator drift. Prints one row per
// check; exit 0 only if all pass.
inline int run_verify(const RunConfig& cfg) {
    detail::RunTimer timer;
    RunConfig c = cfg;
    std::filesystem::create_directories(c.out_dir);
    std::vector<std::vector<std::string>> rows;
    bool all_ok = true;
    auto report = [&](const std::string& name, double tol, double observed) {
        const bool ok = observed <= tol;
        all_ok = all_ok && ok;
        rows.push_back({name, format_number(tol), format_number(observed),
                        ok ? "pass" : "FAIL"});
    };

    {  // collective generator: trace and dark states, N = 20
        const GDickeBasis basis = enumerate_basis(20, 0);
        JumpRates r;
        r.gamma1 = 0.8;
        r.gamma2 = 1.1;
        r.gamma3 = 0.6;
        r.gamma3prime = 0.6;
        r.geometry.lattice = Lattice::AllToAll;
        const auto L = build_alltoall_lindbladian(basis, r);
        const double scale = std::max(1.0, L.max_abs());
        Eigen::RowVectorXd tf = trace_functional(basis), out(L.cols);
        L.apply_transpose(tf.data(), out.data());
        report("collective trace annihilation", 1e-10, out.cwiseAbs().maxCoeff() / scale);
        report("collective vacuum dark", 1e-12,
               L.apply(Eigen::VectorXd(vacuum_vector(basis))).cwiseAbs().maxCoeff() / scale);
        report("collective target-state dark", 1e-12,
               L.apply(Eigen::VectorXd(w_state_vector(basis))).cwiseAbs().maxCoeff() / scale);
    }
    {  // chain generator: trace and dark states, N = 6, split conversion rates
        JumpRates r;
        r.gamma1 = 1.0;
        r.gamma2 = 0.7;
        r.gamma3 = 0.4;
        r.gamma3prime = 0.9;
        r.geometry.lattice = Lattice::Chain;
        const auto S = build_nn_superoperator(6, r, Boundary::Periodic);
        const double scale = std::max(1.0, S.max_abs());
        auto tf = composite_trace_functional<double>(6);
        Eigen::RowVectorXd out(S.cols);
        S.apply_transpose(tf.data(), out.data());
        report("chain trace annihilation", 1e-10, out.cwiseAbs().maxCoeff() / scale);
        const auto wv = DensityMatrix::pure(w_state_ket(6)).vectorized();
        report("chain target-state dark", 1e-12,
               S.apply(Eigen::VectorXcd(wv)).cwiseAbs().maxCoeff() / scale);
    }
    {  // kernel dimension in the converging phase
        const GDickeBasis basis = enumerate_basis(12, 0);
        JumpRates r;
        r.gamma1 = 1.0;
        r.gamma2 = 1.0;
        r.geometry.lattice = Lattice::AllToAll;
        const auto L = build_alltoall_lindbladian(basis, r);
        Eigen::MatrixXd kern(basis.dim(), 2);
        kern.col(0) = vacuum_vector(basis);
        kern.col(1) = w_state_vector(basis);
        const auto spec = eig_dense_deflated(L.dense(), kern);
        report("collective kernel dimension (= 2)", 0.0, std::abs(double(spec.kernel_dim - 2)));
    }
    {  // Krylov route agrees with dense on the N = 8 sector
        JumpRates r;
        r.gamma1 = 0.5;
        r.gamma2 = 0.5;
        r.gamma3 = 1.0;
        r.gamma3prime = 1.0;
        r.geometry.lattice = Lattice::Chain;
        r.geometry.periodic = true;
        const auto ts = build_translation_sector(8, r);
        Eigen::MatrixXd kern(ts.op.rows, 2);
        kern.col(0) = ts.vacuum;
        kern.col(1) = ts.w_state;
        const double dense_gap = eig_dense_deflated(ts.op.dense(), kern).gap;
        const double krylov_gap =
            eig_gap_arnoldi(ts.op, kern.cast<Complex>(), 6, detail::arnoldi_of(c)).gap;
        report("deflated Krylov = dense sector gap (rel)", 1e-8,
               std::abs(krylov_gap - dense_gap) / dense_gap);
    }
    {  // integrator trace drift per unit time
        const GDickeBasis basis = enumerate_basis(40, 0);
        JumpRates r;
        r.gamma1 = 1.0;
        r.gamma2 = 1.0;
        r.gamma3 = 0.05;
        r.gamma3prime = 0.05;
        r.geometry.lattice = Lattice::AllToAll;
        const auto L = build_alltoall_lindbladian(basis, r);
        EvolveOptions eopt;
        eopt.safety = c.safety;
        const auto series =
            evolve(L, Eigen::VectorXd(fully_up_vector(basis)), {0.0, 0.5, 2.0},
                   {{"m", m_functional(basis)}}, trace_functional(basis), eopt);
        report("integrator trace drift per unit time", 1e-9, series.trace_drift_rate);
    }

    const std::string csv = (std::filesystem::path(c.out_dir) / "verify.csv").string();
    write_csv(csv, {"check", "tolerance", "observed", "status"}, rows);
    std::printf("%-44s %-12s %-24s %s\n", "check", "tolerance", "observed", "status");
    for (const auto& r0 : rows)
        std::printf("%-44s %-12s %-24s %s\n", r0[0].c_str(), r0[1].c_str(), r0[2].c_str(),
                    r0[3].c_str());
    RunManifest m;
    echo_config(m, c);
    m.add("all_pass", all_ok ? "true" : "false");
    detail::finish_run(c, std::move(m), timer, {csv}, {});
    return all_ok ? kExitOk : kExitCheckFailed;
}

inline int run_experiment(const RunConfig& c) {
    if (c.experiment == "gap") return run_gap(c);
    if (c.experiment == "steady") return run_steady(c);
    if (c.experiment == "decay") return run_decay(c);
    if (c.experiment == "exponent") return run_exponent(c);
    if (c.experiment == "correlations") return run_correlations(c);
    if (c.experiment == "verify") return run_verify(c);
    throw ConfigError("unknown experiment: " + c.experiment);
}

}  // namespace wdicke
