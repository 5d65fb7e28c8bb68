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

#include <catch_amalgamated.hpp>

#include <sstream>

#include "milac/montecarlo.hpp"

using namespace milac;

namespace {

ExperimentConfig small_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    cfg.n_t_list = {16};
    cfg.spacing_list = {0.25, 0.5};
    cfg.n_trials = 50;
    cfg.seed = 99;
    return cfg;
}

std::string csv_of(const ExperimentConfig &cfg, CouplingCache *cache = nullptr) {
    std::ostringstream os;
    write_trial_csv(os, run_experiment(cfg, cache), cfg);
    return os.str();
}

} // namespace

TEST_CASE("sample_channel: moments of CN(0, rho)", "[montecarlo]") {
    for (double rho : {1.0, 0.3}) {
        std::mt19937_64 stream = make_stream(5, 0, 0);
        const std::size_t n = 100000;
        cd sum{0.0, 0.0};
        double power = 0.0, re2 = 0.0, im2 = 0.0, reim = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const cd z = sample_channel(1, rho, stream)(0, 0);
            sum += z;
            power += std::norm(z);
            re2 += z.real() * z.real();
            im2 += z.imag() * z.imag();
            reim += z.real() * z.imag();
        }
        const double nn = static_cast<double>(n);
        const double se = std::sqrt(rho / 2.0 / nn);
        CHECK(std::abs(sum.real() / nn) < 4.0 * se);
        CHECK(std::abs(sum.imag() / nn) < 4.0 * se);
        CHECK(power / nn == Catch::Approx(rho).epsilon(0.02));
        CHECK(re2 / nn == Catch::Approx(rho / 2.0).epsilon(0.03));
        CHECK(im2 / nn == Catch::Approx(rho / 2.0).epsilon(0.03));
        CHECK(std::abs(reim / nn) < 4.0 * rho / 2.0 / std::sqrt(nn));
    }
}

TEST_CASE("sample_channel: preconditions and reproducibility", "[montecarlo]") {
    std::mt19937_64 stream = make_stream(1, 0, 0);
    CHECK_THROWS_AS(sample_channel(4, 0.0, stream), Error);
    CHECK_THROWS_AS(sample_channel(0, 1.0, stream), Error);
    std::mt19937_64 a = make_stream(7, 3, 11), b = make_stream(7, 3, 11);
    CHECK(sample_channel(8, 1.0, a) == sample_channel(8, 1.0, b));
    std::mt19937_64 c = make_stream(7, 3, 12), d = make_stream(7, 4, 11), e = make_stream(8, 3, 11);
    const CMatrix ref = sample_channel(8, 1.0, a);
    CHECK(sample_channel(8, 1.0, c) != ref);
    CHECK(sample_channel(8, 1.0, d) != ref);
    CHECK(sample_channel(8, 1.0, e) != ref);
}

TEST_CASE("run_experiment: identical output for any thread count", "[montecarlo][property]") {
    ExperimentConfig cfg = small_config(ExperimentKind::AwareVsUnaware);
    CouplingCache cache;
    const std::string one = csv_of(cfg, &cache);
    for (unsigned t : {2u, 3u, 7u}) {
        cfg.threads = t;
        CHECK(csv_of(cfg, &cache) == one);
    }
    CHECK(cache.size() == 2);
}

TEST_CASE("run_experiment: optimized equals the upper bound", "[montecarlo]") {
    ExperimentConfig cfg = small_config(ExperimentKind::VsAntennas);
    cfg.n_t_list = {16, 32};
    const TrialStats stats = run_experiment(cfg);
    REQUIRE(stats.all_ok());
    REQUIRE(stats.rows.size() == 12);
    for (std::size_t n : cfg.n_t_list) {
        for (double d : cfg.spacing_list) {
            const TrialRow &opt = stats.find(n, d, "optim");
            const TrialRow &ub = stats.find(n, d, "upper_bound");
            const TrialRow &nomc = stats.find(n, d, "no_coupling");
            CHECK(relative_difference(opt.mean_w, ub.mean_w) < 1e-8);
            CHECK(opt.mean_w > nomc.mean_w * 0.5);
            REQUIRE(nomc.theory_w);
            CHECK(*nomc.theory_w == Catch::Approx(static_cast<double>(n) / (16.0 * 2500.0)));
        }
    }
}

TEST_CASE("run_experiment: expectation check converges", "[montecarlo]") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::ExpectationCheck;
    cfg.n_t_list = {64};
    cfg.spacing_list = {1.0 / 3.0};
    cfg.n_trials = 10000;
    cfg.seed = 2024;
    const TrialStats stats = run_experiment(cfg);
    REQUIRE(stats.all_ok());
    for (const TrialRow &r : stats.rows) {
        REQUIRE(r.theory_w);
        INFO(r.strategy << " mean " << r.mean_w << " theory " << *r.theory_w << " se " << r.stderr_w);
        CHECK(std::abs(r.mean_w - *r.theory_w) / *r.theory_w < 0.02);
        CHECK(std::abs(r.mean_w - *r.theory_w) < 4.0 * r.stderr_w);
    }
}

TEST_CASE("run_experiment: MiLAC and digital coincide for widely spaced antennas", "[montecarlo]") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::VsDigital;
    cfg.n_t_list = {64};
    cfg.spacing_list = {1.0};
    cfg.n_trials = 1000;
    const TrialStats stats = run_experiment(cfg);
    REQUIRE(stats.all_ok());
    const TrialRow &milac = stats.find(64, 1.0, "milac");
    const TrialRow &matched = stats.find(64, 1.0, "digital_matching");
    const TrialRow &digital = stats.find(64, 1.0, "digital");
    CHECK(std::abs(milac.mean_w - digital.mean_w) / milac.mean_w < 0.05);
    CHECK(relative_difference(matched.mean_w, milac.mean_w) < 1e-12);
    CHECK(milac.mean_w >= digital.mean_w);
}

TEST_CASE("run_experiment: a degenerate geometry yields error rows", "[montecarlo]") {
    ExperimentConfig cfg = small_config(ExperimentKind::VsDigital);
    cfg.spacing_list = {0.01, 0.5};
    const TrialStats stats = run_experiment(cfg);
    REQUIRE(stats.rows.size() == 6);
    CHECK_FALSE(stats.all_ok());
    for (const std::string &s : experiment_strategies(cfg.kind)) {
        const TrialRow &bad = stats.find(16, 0.01, s);
        CHECK(bad.status == "SingularKernel");
        CHECK(std::isnan(bad.mean_w));
        CHECK(stats.find(16, 0.5, s).ok());
    }
    std::ostringstream os;
    write_trial_csv(os, stats, cfg);
    CHECK(os.str().find(",SingularKernel\n") != std::string::npos);
}

TEST_CASE("run_experiment: configuration errors", "[montecarlo][errors]") {
    ExperimentConfig cfg = small_config(ExperimentKind::VsAntennas);
    cfg.n_trials = 0;
    CHECK_THROWS_AS(run_experiment(cfg), Error);
    cfg = small_config(ExperimentKind::VsAntennas);
    cfg.n_t_list = {12};
    try {
        run_experiment(cfg);
        FAIL("expected BadGrid");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::BadGrid);
    }
    cfg = small_config(ExperimentKind::VsAntennas);
    cfg.quad_order = 7;
    CHECK_THROWS_AS(run_experiment(cfg), Error);
    CHECK_THROWS_AS(parse_experiment_kind("bogus"), Error);
    CHECK(parse_experiment_kind("aware_vs_unaware") == ExperimentKind::AwareVsUnaware);
}

TEST_CASE("write_trial_csv: header, hash line and row layout", "[montecarlo]") {
    ExperimentConfig cfg = small_config(ExperimentKind::ExpectationCheck);
    cfg.spacing_list = {0.5};
    cfg.n_trials = 5;
    const std::string text = csv_of(cfg);
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    CHECK(line == "# config_hash=" + cfg.hash() + " seed=99");
    std::getline(is, line);
    CHECK(line == kTrialCsvHeader);
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 9);
        CHECK(line.rfind("expectation_check,16,0.5,", 0) == 0);
    }
    CHECK(rows == 2);
}

TEST_CASE("config hash ignores the thread count only", "[montecarlo]") {
    ExperimentConfig a = small_config(ExperimentKind::VsAntennas);
    ExperimentConfig b = a;
    b.threads = 4;
    CHECK(a.hash() == b.hash());
    b.seed = 100;
    CHECK(a.hash() != b.hash());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
