#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mkfk/cli.hpp"
#include "mkfk/config.hpp"
#include "mkfk/io.hpp"

using namespace mkfk;
namespace fs = std::filesystem;

namespace {

RunConfig parse_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
    std::istringstream in(text);
    return parse_config_stream(in, "test.ini", overrides);
}

std::vector<std::string> rejection(const std::string& text, const std::vector<std::string>& overrides = {}) {
    try {
        parse_text(text, overrides);
    } catch (const ConfigError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mkfk_test_" + name);
    fs::remove_all(p);
    return p;
}

/// A configuration small enough for sub-second runs.
RunConfig small_config(const fs::path& out) {
    RunConfig c = parse_text("", {"model.T=0.5", "grid.n_steps=50", "sim.N=120", "sim.diag_stride=10", "kernel.eps=0.2",
                                  "fk.P=8", "pde.L=10", "pde.n_cells=200", "pde.dt=1e-3", "pde.snapshot_stride=100",
                                  "study.compare_Ns=60,120", "output.write_field=true", "output.write_paths=true",
                                  "output.dir=" + out.string()});
    return c;
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

} // namespace

TEST(ParseConfig, EmptyFileGivesDocumentedDefaults) {
    const RunConfig c = parse_text("");
    EXPECT_EQ(dump_config(c), dump_config(RunConfig{}));
    EXPECT_EQ(c.model.lambda, 1.0);
    EXPECT_EQ(c.eps, 0.1);
    EXPECT_EQ(c.study.Ns, (std::vector<std::size_t>{50, 100, 200, 400, 800}));
    // The shipped default file is exactly the --print-config output.
    EXPECT_EQ(dump_config(parse_config(fs::path(MKFK_SOURCE_DIR) / "configs/default.ini")), dump_config(RunConfig{}));
}

TEST(ParseConfig, ZeroBasePorosityNamesTheInvariant) {
    const auto v = rejection("[model]\nphi0 = 0\n");
    ASSERT_FALSE(v.empty());
    EXPECT_TRUE(mentions(v, "model.phi0"));
    EXPECT_TRUE(mentions(v, "porosity invariant"));
}

TEST(ParseConfig, ReferenceSmallerThanStudyRejected) {
    const auto v = rejection("[study]\nN_ref = 100\nNs = 200\n");
    EXPECT_TRUE(mentions(v, "study.N_ref"));
}

TEST(ParseConfig, AllViolationsReportedTogether) {
    const auto v = rejection("[model]\nphi0 = 0\nlambda = fast\n[extra]\nkey = 1\n", {"kernel.eps=-1"});
    EXPECT_TRUE(mentions(v, "model.lambda"));
    EXPECT_TRUE(mentions(v, "extra.key: unknown key"));
    EXPECT_TRUE(mentions(v, "model.phi0"));
    EXPECT_TRUE(mentions(v, "kernel.eps"));
}

TEST(ParseConfig, ParseErrorCarriesLine) {
    try {
        parse_text("[model]\nlambda = 1\n[broken\n");
        FAIL() << "expected a parse error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("test.ini:3"), std::string::npos) << e.what();
    }
}

TEST(ParseConfig, CrossChecksPdeGrid) {
    EXPECT_TRUE(mentions(rejection("[pde]\nL = 5\n"), "pde.L"));
    EXPECT_TRUE(mentions(rejection("[pde]\ndt = 1e-3\n"), "CFL"));
    EXPECT_TRUE(mentions(rejection("[pde]\ndt = 3e-5\n"), "must divide model.T"));
}

TEST(ParseConfig, OverridesWinAndDumpIsAFixedPoint) {
    const RunConfig c = parse_text("[model]\nlambda = 0.25\n", {"model.lambda=0.5", "study.Ns = 10, 20 ,40"});
    EXPECT_EQ(c.model.lambda, 0.5);
    EXPECT_EQ(c.study.Ns, (std::vector<std::size_t>{10, 20, 40}));
    const RunConfig again = parse_text(dump_config(c));
    EXPECT_EQ(dump_config(again), dump_config(c));
    EXPECT_EQ(config_hash(again), config_hash(c));
    EXPECT_NE(config_hash(parse_text("", {"sim.seed=2"})), config_hash(parse_text("")));
    EXPECT_EQ(config_hash(parse_text("", {"sim.workers=4", "output.dir=elsewhere"})), config_hash(parse_text("")));
    EXPECT_TRUE(mentions(rejection("", {"model.lambda"}), "expected section.key=value"));
}

TEST(FormatDouble, RoundTripsExactly) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 10000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
    EXPECT_EQ(fnv1a64_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a64_hex("a"), "af63dc4c8601ec8c");
}

TEST(FieldCsv, RoundTripReproducesEvaluationsBitwise) {
    const fs::path dir = scratch("field");
    fs::create_directories(dir);
    const RunConfig cfg = small_config(dir);
    const SimConfig sc = cfg.sim_config();
    const InteractingRun run = simulate_interacting(sc);
    write_field_csv(dir / "field.csv", run.field);
    const FKField back = read_field_csv(dir / "field.csv", sc.kernel, sc.grid);
    for (std::size_t k = 0; k < sc.grid.n_points(); k += 7)
        for (double y = -3; y <= 3; y += 0.37) {
            EXPECT_EQ(back.at_step(k, y).u, run.field.at_step(k, y).u);
            EXPECT_EQ(back.at_step(k, y).grad, run.field.at_step(k, y).grad);
        }
    // The frozen field drives the same paths as the live one.
    const TrajectoryRecord a = simulate_driven(sc, run.field), b = simulate_driven(sc, back);
    EXPECT_EQ(a.summary.back().mean_x, b.summary.back().mean_x);
}

TEST(FieldCsv, BadLineIsReportedWithItsNumber) {
    const fs::path dir = scratch("badfield");
    fs::create_directories(dir);
    std::ofstream(dir / "f.csv") << "step,center,weight\n0,0.5,1\n0,abc,1\n";
    try {
        read_field_csv(dir / "f.csv", KernelSpec(0.2), TimeGrid(1.0, 2));
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
}

TEST(PathDump, RoundTrip) {
    const fs::path dir = scratch("paths");
    fs::create_directories(dir);
    SimConfig sc = small_config(dir).sim_config();
    sc.store_paths = true;
    const InteractingRun run = simulate_interacting(sc);
    write_path_dump(dir / "p.bin", run.record, "feedbeef");
    const PathDump d = read_path_dump(dir / "p.bin");
    EXPECT_EQ(d.header["config_hash"], "feedbeef");
    EXPECT_EQ(d.header["shape"][0], sc.grid.n_points());
    EXPECT_EQ(d.header["shape"][1], sc.N);
    EXPECT_EQ(d.paths.x, run.record.paths.x);
    EXPECT_EQ(d.paths.A, run.record.paths.A);
    EXPECT_EQ(d.paths.G, run.record.paths.G);
    EXPECT_EQ(d.paths.V, run.record.paths.V);
}

TEST(RunSubcommand, UnknownNameIsUsageErrorWithoutArtifacts) {
    const fs::path dir = scratch("unknown");
    std::ostringstream log;
    const int rc = run_subcommand("simulat", small_config(dir), "test", log);
    EXPECT_EQ(rc, exit_code::usage);
    EXPECT_NE(rc, exit_code::check_failed);
    EXPECT_NE(log.str().find("usage:"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir));
}

TEST(RunSubcommand, ManifestListsEveryFile) {
    for (const std::string cmd : {"fk-solve", "simulate", "pde", "compare"}) {
        const fs::path dir = scratch("manifest_" + cmd);
        RunConfig cfg = small_config(dir);
        cfg.study.compare_tol = 1.0;
        std::ostringstream log;
        ASSERT_EQ(run_subcommand(cmd, cfg, "mkfk_cli " + cmd, log), exit_code::ok) << cmd << ": " << log.str();
        const auto m = manifest(dir);
        EXPECT_EQ(m["status"], "ok");
        EXPECT_EQ(m["config_hash"], config_hash(cfg));
        EXPECT_EQ(m["seed"], cfg.seed);
        EXPECT_EQ(m["command"], "mkfk_cli " + cmd);
        std::set<std::string> listed(m["artifacts"].begin(), m["artifacts"].end());
        listed.insert("manifest.json");
        std::set<std::string> present;
        for (const auto& e : fs::directory_iterator(dir)) present.insert(e.path().filename().string());
        EXPECT_EQ(listed, present) << cmd;
    }
}

TEST(RunSubcommand, FailedCheckKeepsArtifactsAndMarker) {
    const fs::path dir = scratch("failed_check");
    RunConfig cfg = small_config(dir);
    cfg.study.compare_tol = 1e-9;
    std::ostringstream log;
    EXPECT_EQ(run_subcommand("compare", cfg, "t", log), exit_code::check_failed);
    EXPECT_TRUE(fs::exists(dir / "FAILED"));
    EXPECT_TRUE(fs::exists(dir / "compare.csv"));
    const auto m = manifest(dir);
    EXPECT_EQ(m["status"], "failed");
    EXPECT_EQ(m["exit_code"], exit_code::check_failed);
    EXPECT_NE(std::find(m["artifacts"].begin(), m["artifacts"].end(), "FAILED"), m["artifacts"].end());
    // A later successful run clears the marker.
    cfg.study.compare_tol = 1.0;
    EXPECT_EQ(run_subcommand("compare", cfg, "t", log), exit_code::ok);
    EXPECT_FALSE(fs::exists(dir / "FAILED"));
}

TEST(RunSubcommand, ErrorsMapToDistinctExitCodes) {
    std::ostringstream log;
    RunConfig cfg = small_config(scratch("cfl"));
    cfg.pde.dt = 0.05;  // bypasses parse-time validation; the solver must still refuse
    EXPECT_EQ(run_subcommand("pde", cfg, "t", log), exit_code::config);
    EXPECT_TRUE(fs::exists(fs::path(cfg.output.dir) / "FAILED"));

    cfg = small_config(scratch("nan"));
    cfg.init.mean = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(run_subcommand("simulate", cfg, "t", log), exit_code::config);
    EXPECT_TRUE(mentions(rejection("", {"init.mean=nan"}), "init.mean"));

    std::set<int> codes{exit_code::ok, exit_code::failure, exit_code::config, exit_code::numerical,
                        exit_code::check_failed, exit_code::usage};
    EXPECT_EQ(codes.size(), 6u);
}

TEST(RunSubcommand, CsvBodiesIgnoreWorkerCount) {
    for (const std::string cmd : {"simulate", "fk-solve", "pde", "compare"}) {
        std::vector<fs::path> dirs;
        for (std::size_t workers : {1, 2, 3}) {
            const fs::path dir = scratch("det_" + cmd + std::to_string(workers));
            RunConfig cfg = small_config(dir);
            cfg.workers = workers;
            cfg.study.compare_tol = 1.0;
            std::ostringstream log;
            ASSERT_EQ(run_subcommand(cmd, cfg, "t", log), exit_code::ok) << log.str();
            dirs.push_back(dir);
        }
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            const auto name = e.path().filename().string();
            if (e.path().extension() != ".csv" && e.path().extension() != ".bin") continue;
            for (std::size_t j = 1; j < dirs.size(); ++j)
                EXPECT_TRUE(slurp(e.path()) == slurp(dirs[j] / name)) << cmd << " " << name;
        }
    }
}

TEST(RunSubcommand, InvariantsMicroConfigPassesQuickly) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = parse_config(fs::path(MKFK_SOURCE_DIR) / "configs/micro_lambda0.ini",
                                 {"output.dir=" + scratch("invariants").string()});
    std::ostringstream log;
    ASSERT_EQ(run_subcommand("invariants", cfg, "t", log), exit_code::ok) << log.str();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 10.0);
    const auto v = nlohmann::json::parse(slurp(fs::path(cfg.output.dir) / "verdicts.json"));
    EXPECT_GE(v.size(), 15u);
    for (const auto& c : v) {
        EXPECT_EQ(c["verdict"], "pass") << c["check"];
        for (const char* key : {"check", "value", "bound", "tolerance", "verdict"}) EXPECT_TRUE(c.contains(key));
    }
}
