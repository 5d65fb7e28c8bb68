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

// milac: command-line driver.
//
//   milac coupling   --config array.ini --out dir
//   milac optimize   --config array.ini --out dir --seed 7
//   milac experiment --config tools/configs/fig-unaware.ini --out dir
//   milac verify     [--set verify.fixtures=dipole,identity,asymmetric]
//
// Exit status: 0 all checks passed, 1 a check failed, 2 bad usage or
// configuration, 3 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "milac/beamopt.hpp"
#include "milac/coupling.hpp"
#include "milac/montecarlo.hpp"
#include "milac/verify.hpp"

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using namespace milac;

constexpr const char *kVersion = "0.1.0";

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kRuntime = 3 };

/// Every recognized key and its default, in schema order.
const std::vector<std::pair<std::string, std::string>> &schema() {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"run.seed", "1"},
        {"array.n_t", "64"},
        {"array.n_x", "8"},
        {"array.spacing", "0.5"},
        {"array.frequency_hz", "28e9"},
        {"array.dipole_length", "0.25"},
        {"array.quad_order", "64"},
        {"array.z0", "50"},
        {"array.eta0", "377"},
        {"channel.p_t", "1"},
        {"channel.rho", "1"},
        {"channel.mode", "aware"},
        {"experiment.kind", "vs_antennas"},
        {"experiment.n_t_list", "16,32,64"},
        {"experiment.spacing_list", "0.25"},
        {"experiment.n_trials", "10000"},
        {"experiment.threads", "1"},
        {"verify.fixtures", "dipole,identity"},
        {"verify.n_t", "16"},
        {"verify.spacing", "0.25"},
        {"verify.n_instances", "100"},
    };
    return keys;
}

struct Options {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::optional<std::size_t> quad_order;
    std::optional<std::size_t> trials;
};

/// Effective configuration: file values, then --set, then dedicated flags,
/// with every remaining key filled from the schema defaults.
class Settings {
public:
    explicit Settings(const Options &opt) {
        if (!opt.config_path.empty()) {
            try {
                pt::read_ini(opt.config_path, tree_);
            } catch (const pt::ini_parser_error &e) {
                throw Error(ErrorCode::Config, "cannot parse config: " + std::string(e.what()));
            }
        }
        for (const auto &[section, body] : tree_) {
            if (body.empty() && !body.data().empty())
                throw Error(ErrorCode::Config, "key '" + section + "' must be inside a [section]");
            for (const auto &kv : body) check_key(section + "." + kv.first);
        }
        for (const std::string &s : opt.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw Error(ErrorCode::Config, "--set expects key=value, got '" + s + "'");
            const std::string key = s.substr(0, eq);
            check_key(key);
            tree_.put(pt::ptree::path_type(key, '.'), s.substr(eq + 1));
        }
        if (opt.seed) tree_.put("run.seed", std::to_string(*opt.seed));
        if (opt.quad_order) tree_.put("array.quad_order", std::to_string(*opt.quad_order));
        if (opt.trials) tree_.put("experiment.n_trials", std::to_string(*opt.trials));
        for (const auto &[key, def] : schema())
            if (!tree_.get_optional<std::string>(key)) tree_.put(key, def);
    }

    std::string str(const std::string &key) const { return tree_.get<std::string>(key); }

    double real(const std::string &key) const { return parse_real(key, str(key)); }

    std::uint64_t count(const std::string &key) const {
        const std::string v = str(key);
        try {
            std::size_t pos = 0;
            if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
            const unsigned long long n = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing characters");
            return n;
        } catch (const std::exception &) {
            throw Error(ErrorCode::Config, key + " = '" + v + "' is not a nonnegative integer");
        }
    }

    std::vector<std::string> list(const std::string &key) const {
        std::vector<std::string> out;
        std::stringstream ss(str(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item.erase(0, item.find_first_not_of(" \t"));
            item.erase(item.find_last_not_of(" \t") + 1);
            if (!item.empty()) out.push_back(item);
        }
        if (out.empty()) throw Error(ErrorCode::Config, key + " must list at least one value");
        return out;
    }

    std::vector<double> real_list(const std::string &key) const {
        std::vector<double> out;
        for (const std::string &s : list(key)) out.push_back(parse_real(key, s));
        return out;
    }

    std::vector<std::size_t> count_list(const std::string &key) const {
        std::vector<std::size_t> out;
        for (const std::string &s : list(key)) {
            const double v = parse_real(key, s);
            if (v < 1.0 || v != std::floor(v)) throw Error(ErrorCode::Config, key + " entry '" + s + "' is not a count");
            out.push_back(static_cast<std::size_t>(v));
        }
        return out;
    }

    /// INI text of the effective configuration, keys in schema order.
    std::string ini() const {
        std::ostringstream os;
        std::string section;
        for (const auto &[key, def] : schema()) {
            const std::string sec = key.substr(0, key.find('.'));
            if (sec != section) {
                if (!section.empty()) os << '\n';
                os << '[' << sec << "]\n";
                section = sec;
            }
            os << key.substr(key.find('.') + 1) << " = " << str(key) << '\n';
        }
        return os.str();
    }

    nlohmann::json json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto &[key, def] : schema()) j[key] = str(key);
        return j;
    }

private:
    static void check_key(const std::string &key) {
        for (const auto &[k, def] : schema())
            if (k == key) return;
        throw Error(ErrorCode::Config, "unknown config key '" + key + "' (see README for the schema)");
    }

    /// Decimal number or a fraction "a/b" (e.g. spacing = 1/3).
    static double parse_real(const std::string &key, const std::string &v) {
        try {
            const auto slash = v.find('/');
            std::size_t pos = 0;
            if (slash == std::string::npos) {
                const double x = std::stod(v, &pos);
                if (pos != v.size()) throw std::invalid_argument("trailing");
                return x;
            }
            const std::string a = v.substr(0, slash), b = v.substr(slash + 1);
            const double num = std::stod(a, &pos);
            if (pos != a.size()) throw std::invalid_argument("trailing");
            const double den = std::stod(b, &pos);
            if (pos != b.size() || den == 0.0) throw std::invalid_argument("bad denominator");
            return num / den;
        } catch (const std::exception &) {
            throw Error(ErrorCode::Config, key + " = '" + v + "' is not a number");
        }
    }

    pt::ptree tree_;
};

// ---------------------------------------------------------------------------
// Output helpers

fs::path prepare_out(const std::string &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error(ErrorCode::Io, "cannot create output directory '" + dir + "': " + ec.message());
    return fs::path(dir);
}

std::ofstream open_out(const fs::path &p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot open '" + p.string() + "' for writing");
    return os;
}

std::string fmt(double v, const char *spec = "%.6g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

/// Writes the effective config next to the outputs and the run record.
void write_manifest(const fs::path &out, const std::string &command, const Settings &s, const std::string &hash,
                    const std::vector<std::string> &files, const nlohmann::json &extra = nlohmann::json::object()) {
    {
        std::ofstream ini = open_out(out / "effective.ini");
        ini << s.ini();
    }
    nlohmann::json m;
    m["schema"] = "milac-manifest/1";
    m["command"] = command;
    m["config"] = s.json();
    m["config_hash"] = hash;
    m["seed"] = s.count("run.seed");
    m["effective_config"] = "effective.ini";
    m["outputs"] = files;
    m["versions"] = {{"milac", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    m["results"] = extra;
    std::ofstream os = open_out(out / "manifest.json");
    os << m.dump(2) << '\n';
}

struct ArraySetup {
    ArrayGeometry geom;
    PhysicalConstants consts;
    std::size_t quad_order;
};

ArraySetup array_from(const Settings &s) {
    const std::size_t n_t = s.count("array.n_t");
    const ArrayGeometry geom = build_geometry(n_t, grid_columns(s.count("array.n_x"), n_t), s.real("array.spacing"),
                                              s.real("array.frequency_hz"), s.real("array.dipole_length"));
    return {geom, PhysicalConstants::for_wavelength(geom.wavelength, s.real("array.z0"), s.real("array.eta0")),
            s.count("array.quad_order")};
}

std::string settings_hash(const Settings &s) { return fnv1a_hex(s.ini()); }

std::string csv_comment(const std::string &hash, std::uint64_t seed) {
    return "config_hash=" + hash + " seed=" + std::to_string(seed);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_coupling(const Settings &s, const Options &opt) {
    const ArraySetup a = array_from(s);
    const CouplingMatrix cm = build_coupling_matrix(a.geom, a.consts, a.quad_order);
    const fs::path out = prepare_out(opt.out_dir);
    const std::string hash = settings_hash(s);
    export_coupling_csv((out / "coupling_z.csv").string(), cm, csv_comment(hash, s.count("run.seed")));
    const double ratio = cm.trace_ratio();
    std::cout << "coupling: N_T=" << cm.size() << " d=" << fmt(a.geom.spacing_over_lambda()) << " lambda"
              << " Tr(Re{Z}^-1)/(Y0 N_T)=" << fmt(ratio, "%.6f")
              << " min eig Re{Z}=" << fmt(cm.min_real_eigenvalue(), "%.4f") << " Ohm\n";
    write_manifest(out, "coupling", s, hash, {"coupling_z.csv"},
                   {{"trace_ratio", ratio}, {"min_real_eigenvalue_ohm", cm.min_real_eigenvalue()}});
    return kOk;
}

int cmd_optimize(const Settings &s, const Options &opt) {
    const std::string mode = s.str("channel.mode");
    if (mode != "aware" && mode != "unaware" && mode != "no_coupling")
        throw Error(ErrorCode::Config, "channel.mode must be aware, unaware or no_coupling");
    const ArraySetup a = array_from(s);
    const std::uint64_t seed = s.count("run.seed");

    MisoChannel ch;
    ch.p_t = s.real("channel.p_t");
    ch.rho = s.real("channel.rho");
    ch.z0 = a.consts.z0;
    std::mt19937_64 rng = make_stream(seed, 0, 0);
    ch.z_rt = sample_channel(a.geom.n_antennas, ch.rho, rng);
    if (mode != "no_coupling")
        ch.coupling = std::make_shared<const PreparedCoupling>(build_coupling_matrix(a.geom, a.consts, a.quad_order));

    std::vector<std::pair<std::string, double>> report;
    MilacDesign design;
    bool ok = true;
    if (mode == "unaware") {
        design = optimize_milac_nomc(ch);
        const double achieved = pipeline_power(design, ch);
        const double bound = power_milac_mc(ch);
        report = {{"achieved_power_W", achieved},
                  {"aware_bound_W", bound},
                  {"loss_dB", to_db(bound, achieved)},
                  {"uncoupled_model_power_W", design.achieved_power}};
    } else {
        design = optimize_milac_mc(ch);
        const double bound = power_milac_mc(ch);
        const double gap = relative_difference(design.achieved_power, bound);
        ok = gap < kBoundTolerance;
        report = {{"achieved_power_W", design.achieved_power}, {"bound_W", bound}, {"relative_gap", gap}};
        if (mode == "no_coupling") report.emplace_back("uncoupled_closed_form_W", power_milac_nomc(ch));
    }
    report.emplace_back("dB_vs_no_coupling", to_db(report.front().second, power_milac_nomc(ch)));
    const UnitarySymmetricResiduals r = is_unitary_symmetric(design.theta_bar);
    report.emplace_back("theta_unitary_residual", r.unitary);
    report.emplace_back("theta_symmetric_residual", r.symmetric);
    report.emplace_back("susceptance_imag_residue", design.diagnostics.bbar_imag_residue);
    report.emplace_back("phase_retries", design.diagnostics.phase_retries);

    const fs::path out = prepare_out(opt.out_dir);
    const std::string hash = settings_hash(s);
    export_design_csv((out / "susceptance.csv").string(), design, csv_comment(hash, seed));
    {
        std::ofstream os = open_out(out / "optimize_report.csv");
        os << "# " << csv_comment(hash, seed) << "\nmetric,value\n";
        for (const auto &[k, v] : report) os << k << ',' << fmt(v, "%.17g") << '\n';
    }
    nlohmann::json results = nlohmann::json::object();
    std::cout << "optimize (" << mode << "), N_T=" << a.geom.n_antennas << ", seed " << seed << '\n';
    for (const auto &[k, v] : report) {
        std::cout << "  " << k << " = " << fmt(v, "%.10g") << '\n';
        results[k] = v;
    }
    write_manifest(out, "optimize", s, hash, {"susceptance.csv", "optimize_report.csv"}, results);
    if (!ok) std::cerr << "optimize: design does not attain the closed-form bound\n";
    return ok ? kOk : kCheckFailed;
}

ExperimentConfig experiment_from(const Settings &s) {
    ExperimentConfig cfg;
    cfg.kind = parse_experiment_kind(s.str("experiment.kind"));
    cfg.n_t_list = s.count_list("experiment.n_t_list");
    cfg.spacing_list = s.real_list("experiment.spacing_list");
    cfg.n_trials = s.count("experiment.n_trials");
    cfg.threads = static_cast<unsigned>(s.count("experiment.threads"));
    cfg.seed = s.count("run.seed");
    cfg.p_t = s.real("channel.p_t");
    cfg.rho = s.real("channel.rho");
    cfg.frequency_hz = s.real("array.frequency_hz");
    cfg.quad_order = s.count("array.quad_order");
    cfg.n_x = s.count("array.n_x");
    cfg.z0 = s.real("array.z0");
    cfg.eta0 = s.real("array.eta0");
    cfg.dipole_length_wl = s.real("array.dipole_length");
    return cfg;
}

void print_experiment_summary(const ExperimentConfig &cfg, const TrialStats &st) {
    for (const TrialRow &r : st.rows) {
        std::cout << "  N_T=" << r.n_t << " d=" << fmt(r.spacing_over_lambda, "%.4f") << " " << r.strategy;
        if (!r.ok()) {
            std::cout << " FAILED " << r.status << ": " << r.message << '\n';
            continue;
        }
        std::cout << " mean=" << fmt(r.mean_w) << " W +- " << fmt(r.stderr_w, "%.2g");
        if (r.theory_w) std::cout << " theory=" << fmt(*r.theory_w);
        std::cout << '\n';
    }
    if (cfg.kind == ExperimentKind::AwareVsUnaware || cfg.kind == ExperimentKind::VsDigital) {
        const char *hi = cfg.kind == ExperimentKind::AwareVsUnaware ? "aware" : "milac";
        const char *lo = cfg.kind == ExperimentKind::AwareVsUnaware ? "unaware" : "digital";
        for (std::size_t n : cfg.n_t_list)
            for (double d : cfg.spacing_list) {
                const TrialRow &a = st.find(n, d, hi);
                const TrialRow &b = st.find(n, d, lo);
                if (a.ok() && b.ok())
                    std::cout << "  N_T=" << n << " d=" << fmt(d, "%.4f") << " " << hi << " - " << lo << " = "
                              << fmt(to_db(a.mean_w, b.mean_w), "%.3f") << " dB\n";
            }
    }
}

int cmd_experiment(const Settings &s, const Options &opt) {
    const ExperimentConfig cfg = experiment_from(s);
    const TrialStats st = run_experiment(cfg);
    const fs::path out = prepare_out(opt.out_dir);
    const std::string file = std::string(to_string(cfg.kind)) + ".csv";
    {
        std::ofstream os = open_out(out / file);
        write_trial_csv(os, st, cfg);
    }
    std::cout << "experiment " << to_string(cfg.kind) << ", " << cfg.n_trials << " trials, seed " << cfg.seed << '\n';
    print_experiment_summary(cfg, st);
    write_manifest(out, "experiment", s, cfg.hash(), {file}, {{"all_points_ok", st.all_ok()}});
    return st.all_ok() ? kOk : kCheckFailed;
}

int cmd_verify(const Settings &s, const Options &opt) {
    VerifyOptions vo;
    vo.n_instances = s.count("verify.n_instances");
    vo.seed = s.count("run.seed");
    const std::size_t n_t = s.count("verify.n_t");
    const double spacing = s.real("verify.spacing");
    std::vector<CheckResult> checks;
    for (const std::string &name : s.list("verify.fixtures")) {
        VerifyFixture fx;
        if (name == "dipole") fx = dipole_fixture(n_t, spacing, s.count("array.quad_order"));
        else if (name == "identity") fx = identity_fixture(n_t, s.real("array.z0"));
        else if (name == "asymmetric") fx = asymmetric_fixture(n_t);
        else throw Error(ErrorCode::Config, "unknown fixture '" + name + "' (dipole, identity or asymmetric)");
        for (CheckResult &c : verify_fixture(fx, vo)) checks.push_back(std::move(c));
    }
    print_checks(std::cout, checks);
    std::size_t failed = 0;
    for (const CheckResult &c : checks) failed += c.pass ? 0 : 1;
    std::cout << (failed ? "verify: " + std::to_string(failed) + " check(s) FAILED\n" : "verify: all checks passed\n");
    if (!opt.out_dir.empty() && opt.out_dir != "-") {
        const fs::path out = prepare_out(opt.out_dir);
        const std::string hash = settings_hash(s);
        {
            std::ofstream os = open_out(out / "verify.csv");
            os << "# " << csv_comment(hash, vo.seed) << "\nfixture,check,residual,threshold,pass,note\n";
            for (const CheckResult &c : checks)
                os << c.fixture << ',' << c.name << ',' << fmt(c.residual, "%.17g") << ',' << fmt(c.threshold, "%.17g")
                   << ',' << (c.pass ? 1 : 0) << ',' << c.note << '\n';
        }
        write_manifest(out, "verify", s, hash, {"verify.csv"}, {{"failed", failed}});
    }
    return failed ? kCheckFailed : kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"MiLAC MIMO simulator and optimizer"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Options opt;

    auto add_common = [&opt](CLI::App *cmd) {
        cmd->add_option("--config", opt.config_path, "INI config file")->check(CLI::ExistingFile);
        cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
        cmd->add_option("--seed", opt.seed, "overrides run.seed");
        cmd->add_option("--set", opt.sets, "override a config key, section.key=value (repeatable)");
        cmd->add_option("--quad-order", opt.quad_order, "overrides array.quad_order");
        cmd->add_option("--trials", opt.trials, "overrides experiment.n_trials");
    };
    std::map<CLI::App *, int (*)(const Settings &, const Options &)> handlers;
    handlers[app.add_subcommand("coupling", "build Z_TT and write it as CSV")] = cmd_coupling;
    handlers[app.add_subcommand("optimize", "design the MiLAC for one seeded channel")] = cmd_optimize;
    handlers[app.add_subcommand("experiment", "run a Monte Carlo experiment")] = cmd_experiment;
    handlers[app.add_subcommand("verify", "run the invariant suite")] = cmd_verify;
    for (auto &[cmd, fn] : handlers) add_common(cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    for (auto &[cmd, fn] : handlers) {
        if (!cmd->parsed()) continue;
        try {
            const Settings settings(opt);
            return fn(settings, opt);
        } catch (const Error &e) {
            std::cerr << "milac " << cmd->get_name() << ": " << e.what() << '\n';
            return e.code() == ErrorCode::Config || e.code() == ErrorCode::BadGrid ? kUsage : kRuntime;
        } catch (const std::exception &e) {
            std::cerr << "milac " << cmd->get_name() << ": " << e.what() << '\n';
            return kRuntime;
        }
    }
    return kUsage;
}
