// SPDX-License-Identifier: Apache-2.0
//
// milac-sim: multiport-network simulator for microwave linear analog computers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Seeded Monte Carlo experiments over Rayleigh MISO channels.
//
// Trial t of point p draws its channel from a generator seeded only by
// (seed, p, t), and trial results are reduced in trial order, so the output
// does not depend on the number of worker threads.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "milac/beamopt.hpp"
#include "milac/coupling.hpp"
#include "milac/error.hpp"
#include "milac/matrixkit.hpp"

namespace milac {

enum class ExperimentKind { VsAntennas, AwareVsUnaware, VsDigital, ExpectationCheck };

inline std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::VsAntennas: return "vs_antennas";
        case ExperimentKind::AwareVsUnaware: return "aware_vs_unaware";
        case ExperimentKind::VsDigital: return "vs_digital";
        case ExperimentKind::ExpectationCheck: return "expectation_check";
    }
    return "unknown";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
    for (ExperimentKind k : {ExperimentKind::VsAntennas, ExperimentKind::AwareVsUnaware, ExperimentKind::VsDigital,
                             ExperimentKind::ExpectationCheck})
        if (s == to_string(k)) return k;
    throw Error(ErrorCode::Config, "unknown experiment kind '" + std::string(s) +
                                       "' (expected vs_antennas, aware_vs_unaware, vs_digital or expectation_check)");
}

/// Strategy labels per experiment, in output order.
inline std::vector<std::string> experiment_strategies(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::VsAntennas: return {"optim", "upper_bound", "no_coupling"};
        case ExperimentKind::AwareVsUnaware: return {"aware", "unaware"};
        case ExperimentKind::VsDigital: return {"milac", "digital_matching", "digital"};
        case ExperimentKind::ExpectationCheck: return {"milac_mc", "digital"};
    }
    return {};
}

/// 64-bit FNV-1a of a string, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::VsAntennas;
    std::vector<std::size_t> n_t_list{16, 32, 64};
    std::vector<double> spacing_list{0.25};
    std::size_t n_trials = 10000;
    std::uint64_t seed = 1;
    double p_t = 1.0;
    double rho = 1.0;
    double frequency_hz = 28e9;
    std::size_t quad_order = kDefaultQuadOrder;
    std::size_t n_x = 8;
    double z0 = 50.0;
    double eta0 = 377.0;
    double dipole_length_wl = 0.25;
    unsigned threads = 1;

    void validate() const {
        if (n_trials < 1) throw Error(ErrorCode::Config, "n_trials must be at least 1");
        if (n_t_list.empty() || spacing_list.empty())
            throw Error(ErrorCode::Config, "n_t_list and spacing_list must be nonempty");
        if (!(p_t > 0.0) || !(rho > 0.0) || !(frequency_hz > 0.0) || !(z0 > 0.0) || !(eta0 > 0.0))
            throw Error(ErrorCode::Config, "p_t, rho, frequency_hz, z0 and eta0 must be positive");
        if (quad_order < 8 || quad_order % 2 != 0)
            throw Error(ErrorCode::Config, "quad_order must be even and at least 8");
        if (threads < 1) throw Error(ErrorCode::Config, "threads must be at least 1");
        for (std::size_t n : n_t_list)
            for (double s : spacing_list) (void)build_geometry(n, grid_columns(n_x, n), s, frequency_hz, dipole_length_wl);
    }

    /// Canonical text of every field that affects results (threads excluded).
    std::string canonical() const {
        std::ostringstream os;
        char buf[40];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        os << "kind=" << to_string(kind) << ";n_t=";
        for (std::size_t i = 0; i < n_t_list.size(); ++i) os << (i ? "," : "") << n_t_list[i];
        os << ";spacing=";
        for (std::size_t i = 0; i < spacing_list.size(); ++i) os << (i ? "," : "") << num(spacing_list[i]);
        os << ";n_trials=" << n_trials << ";seed=" << seed << ";p_t=" << num(p_t) << ";rho=" << num(rho)
           << ";frequency_hz=" << num(frequency_hz) << ";quad_order=" << quad_order << ";n_x=" << n_x
           << ";z0=" << num(z0) << ";eta0=" << num(eta0) << ";dipole_length_wl=" << num(dipole_length_wl);
        return os.str();
    }

    /// fnv1a_hex(canonical()).
    std::string hash() const;
};

inline std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

struct TrialRow {
    std::string experiment;
    std::size_t n_t = 0;
    double spacing_over_lambda = 0.0;
    std::string strategy;
    double mean_w = 0.0;
    double stderr_w = 0.0;
    std::optional<double> theory_w;
    std::size_t n_trials = 0;
    std::uint64_t seed = 0;
    std::string status = "ok"; ///< "ok" or the error code of a failed point
    std::string message;

    bool ok() const { return status == "ok"; }
};

struct TrialStats {
    std::vector<TrialRow> rows;

    const TrialRow &find(std::size_t n_t, double spacing, std::string_view strategy) const {
        for (const TrialRow &r : rows)
            if (r.n_t == n_t && r.spacing_over_lambda == spacing && r.strategy == strategy) return r;
        throw Error(ErrorCode::OutOfRange, "no row for strategy " + std::string(strategy));
    }

    bool all_ok() const {
        for (const TrialRow &r : rows)
            if (!r.ok()) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Random streams

/// Generator for trial `trial` of point `point`; independent of scheduling.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t point, std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(point), static_cast<std::uint32_t>(point >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    return std::mt19937_64(seq);
}

/// 1 x n_t row of i.i.d. CN(0, rho) entries.
inline CMatrix sample_channel(std::size_t n_t, double rho, std::mt19937_64 &stream) {
    if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be positive");
    if (n_t < 1) throw Error(ErrorCode::InvalidArgument, "n_t must be positive");
    std::normal_distribution<double> normal(0.0, std::sqrt(rho / 2.0));
    CMatrix z(1, static_cast<Eigen::Index>(n_t));
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
        const double re = normal(stream);
        const double im = normal(stream);
        z(0, i) = cd{re, im};
    }
    return z;
}

// ---------------------------------------------------------------------------
// Coupling cache

/// Coupling matrices keyed by (n_t, spacing, quad_order), built on first use.
class CouplingCache {
public:
    std::shared_ptr<const PreparedCoupling> get(const ExperimentConfig &cfg, std::size_t n_t, double spacing) {
        const Key key{n_t, spacing, cfg.quad_order};
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const ArrayGeometry geom = build_geometry(n_t, grid_columns(cfg.n_x, n_t), spacing, cfg.frequency_hz, cfg.dipole_length_wl);
        const PhysicalConstants consts = PhysicalConstants::for_wavelength(geom.wavelength, cfg.z0, cfg.eta0);
        auto prepared = std::make_shared<const PreparedCoupling>(build_coupling_matrix(geom, consts, cfg.quad_order));
        cache_.emplace(key, prepared);
        return prepared;
    }

    std::size_t size() const { return cache_.size(); }

private:
    using Key = std::tuple<std::size_t, double, std::size_t>;
    std::map<Key, std::shared_ptr<const PreparedCoupling>> cache_;
};

// ---------------------------------------------------------------------------
// Experiments

namespace detail {

/// Per-strategy powers for one channel draw, in experiment_strategies() order.
inline std::vector<double> trial_powers(ExperimentKind kind, const MisoChannel &ch) {
    switch (kind) {
        case ExperimentKind::VsAntennas:
            return {optimize_milac_mc(ch).achieved_power, power_milac_mc(ch), power_milac_nomc(ch)};
        case ExperimentKind::AwareVsUnaware:
            return {optimize_milac_mc(ch).achieved_power, pipeline_power(optimize_milac_nomc(ch), ch)};
        case ExperimentKind::VsDigital:
            return {power_milac_mc(ch), power_digital_matching(ch), power_digital_nomatching(ch)};
        case ExperimentKind::ExpectationCheck:
            return {power_milac_mc(ch), power_digital_nomatching(ch)};
    }
    return {};
}

inline std::vector<std::optional<double>> theory_powers(ExperimentKind kind, const PreparedCoupling &c,
                                                        const ExperimentConfig &cfg) {
    const double mc = expected_power_milac_mc(c, cfg.p_t, cfg.rho);
    const double nomc = expected_power_milac_nomc(c.size(), c.z0(), cfg.p_t, cfg.rho);
    switch (kind) {
        case ExperimentKind::VsAntennas: return {mc, mc, nomc};
        case ExperimentKind::AwareVsUnaware: return {mc, std::nullopt};
        case ExperimentKind::VsDigital:
            return {mc, mc, expected_power_digital_nomatching(c, cfg.p_t, cfg.rho)};
        case ExperimentKind::ExpectationCheck: return {mc, expected_power_digital_nomatching(c, cfg.p_t, cfg.rho)};
    }
    return {};
}

struct TrialOutcome {
    std::vector<double> powers;
    std::optional<Error> error;
};

} // namespace detail

/// Runs every (n_t, spacing) point of the experiment.
///
/// Points are numbered n_t-major in list order; that index seeds the draws.
/// A point whose coupling matrix or any trial fails yields rows with status
/// set to the error code and NaN statistics.
inline TrialStats run_experiment(const ExperimentConfig &cfg, CouplingCache *cache = nullptr) {
    cfg.validate();
    CouplingCache local;
    CouplingCache &cc = cache ? *cache : local;
    const std::vector<std::string> strategies = experiment_strategies(cfg.kind);
    const std::size_t n_strat = strategies.size();
    const std::string experiment(to_string(cfg.kind));

    TrialStats stats;
    std::uint64_t point = 0;
    for (std::size_t n_t : cfg.n_t_list) {
        for (double spacing : cfg.spacing_list) {
            auto make_row = [&](std::size_t s) {
                TrialRow r;
                r.experiment = experiment;
                r.n_t = n_t;
                r.spacing_over_lambda = spacing;
                r.strategy = strategies[s];
                r.n_trials = cfg.n_trials;
                r.seed = cfg.seed;
                return r;
            };
            auto fail_point = [&](const Error &e) {
                for (std::size_t s = 0; s < n_strat; ++s) {
                    TrialRow r = make_row(s);
                    r.mean_w = std::numeric_limits<double>::quiet_NaN();
                    r.stderr_w = std::numeric_limits<double>::quiet_NaN();
                    r.status = std::string(to_string(e.code()));
                    r.message = e.what();
                    stats.rows.push_back(std::move(r));
                }
            };

            std::shared_ptr<const PreparedCoupling> coupling;
            try {
                coupling = cc.get(cfg, n_t, spacing);
            } catch (const Error &e) {
                fail_point(e);
                ++point;
                continue;
            }

            std::vector<detail::TrialOutcome> outcomes(cfg.n_trials);
            auto work = [&](std::size_t begin, std::size_t end) {
                for (std::size_t t = begin; t < end; ++t) {
                    try {
                        std::mt19937_64 stream = make_stream(cfg.seed, point, t);
                        MisoChannel ch;
                        ch.z_rt = sample_channel(n_t, cfg.rho, stream);
                        ch.coupling = coupling;
                        ch.p_t = cfg.p_t;
                        ch.rho = cfg.rho;
                        ch.z0 = cfg.z0;
                        outcomes[t].powers = detail::trial_powers(cfg.kind, ch);
                    } catch (const Error &e) {
                        outcomes[t].error = e;
                    }
                }
            };
            const std::size_t workers = std::min<std::size_t>(cfg.threads, cfg.n_trials);
            if (workers <= 1) {
                work(0, cfg.n_trials);
            } else {
                std::vector<std::thread> pool;
                const std::size_t chunk = (cfg.n_trials + workers - 1) / workers;
                for (std::size_t w = 0; w < workers; ++w) {
                    const std::size_t b = w * chunk;
                    const std::size_t e = std::min(cfg.n_trials, b + chunk);
                    if (b < e) pool.emplace_back(work, b, e);
                }
                for (std::thread &th : pool) th.join();
            }

            const detail::TrialOutcome *failed = nullptr;
            for (const detail::TrialOutcome &o : outcomes)
                if (o.error) {
                    failed = &o;
                    break;
                }
            if (failed) {
                fail_point(*failed->error);
                ++point;
                continue;
            }

            const auto theory = detail::theory_powers(cfg.kind, *coupling, cfg);
            const double n = static_cast<double>(cfg.n_trials);
            for (std::size_t s = 0; s < n_strat; ++s) {
                double sum = 0.0;
                for (const detail::TrialOutcome &o : outcomes) sum += o.powers[s];
                const double mean = sum / n;
                double ss = 0.0;
                for (const detail::TrialOutcome &o : outcomes) ss += (o.powers[s] - mean) * (o.powers[s] - mean);
                TrialRow r = make_row(s);
                r.mean_w = mean;
                r.stderr_w = cfg.n_trials > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
                r.theory_w = theory[s];
                stats.rows.push_back(std::move(r));
            }
            ++point;
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kTrialCsvHeader =
    "experiment,n_t,spacing_over_lambda,strategy,mean_W,stderr_W,theory_W,n_trials,seed,status";

/// Writes the stats; the leading comment line carries the config hash and seed.
inline void write_trial_csv(std::ostream &os, const TrialStats &stats, const ExperimentConfig &cfg) {
    os << "# config_hash=" << cfg.hash() << " seed=" << cfg.seed << '\n';
    os << kTrialCsvHeader << '\n';
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const TrialRow &r : stats.rows) {
        os << r.experiment << ',' << r.n_t << ',' << num(r.spacing_over_lambda) << ',' << r.strategy << ','
           << num(r.mean_w) << ',' << num(r.stderr_w) << ',' << (r.theory_w ? num(*r.theory_w) : std::string())
           << ',' << r.n_trials << ',' << r.seed << ',' << r.status << '\n';
    }
}

} // namespace milac
