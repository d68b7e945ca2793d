#include "exwave/config.hpp"
#include "exwave/error.hpp"
#include "exwave/harness.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace exwave;
using namespace exwave::testing;
namespace fs = std::filesystem;

namespace {

const char* kSmallDecay = R"(
[experiment]
name = "small_decay"

[grid]
h = 0.05
margin = 0.16

[obstacle]
type = "sphere"
center = [0.0, 0.0, 0.0]
radius = 0.2

[sigma]
lo = [-0.9, -0.9, -0.9]
hi = [0.9, 0.9, 0.9]

[q0]
lo = [0.35, -0.15, -0.15]
hi = [0.65, 0.15, 0.15]

[q1]
lo = [0.25, -0.25, -0.25]
hi = [0.75, 0.25, 0.25]

[patch]
faces = ["+x"]

[sim]
t_max = 5.0
sponge_max = 25.0
sponge_width = 0.6
sponge_power = 1

[data.f]
kind = "radial"
center = [0.5, 0.0, 0.0]
radius = 0.14
power = 6

[decay]
control = true
span = 2.0
)";

const char* kSmallEndToEnd = R"(
[experiment]
name = "small_end_to_end"

[grid]
h = 0.05
margin = 0.16

[sigma]
lo = [-0.8, -0.8, -0.5]
hi = [0.8, 0.8, 0.5]

[q0]
lo = [-0.5, -0.5, -0.2]
hi = [0.5, 0.5, 0.2]

[q1]
lo = [-0.6, -0.6, -0.3]
hi = [0.6, 0.6, 0.3]

[patch]
faces = ["+z"]

[sim]
t_max = 1.5
sponge = false
sponge_width = 0.4

[data.g]
kind = "separated"
transverse = "gaussian"
sigma = 0.15

[recon]
rho_list = [4.0, 8.0, 12.0]
noise_eps = [0.0, 1e-3]
seed = 5
half_width = 0.6
)";

fs::path scratch_dir(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("exwave_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_text(const fs::path& path, const std::string& text)
{
    std::ofstream(path) << text;
    return path;
}

std::string read_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct CliResult {
    int code = 0;
    nlohmann::json record;
};

CliResult cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "exwave");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    ::testing::internal::CaptureStdout();
    const int code = run_cli(static_cast<int>(argv.size()), argv.data());
    const std::string out = ::testing::internal::GetCapturedStdout();
    CliResult r;
    r.code = code;
    // The last line of stdout is the status record for every subcommand but check-domain.
    const auto start = out.rfind('\n', out.size() >= 2 ? out.size() - 2 : 0);
    try {
        r.record = nlohmann::json::parse(start == std::string::npos ? out : out.substr(start + 1));
    } catch (const nlohmann::json::exception&) {
        r.record = nlohmann::json::parse(out, nullptr, false);
    }
    return r;
}

TraceSeries scalar_series(const std::function<double(double)>& u, double dt, double t_end)
{
    TraceSeries s;
    s.dt = dt;
    s.s_weights = {1.0};
    const int n = static_cast<int>(std::lround(t_end / dt));
    for (int m = 0; m <= n; ++m) {
        TraceFrame f;
        f.t = m * dt;
        f.s_value = {u(f.t)};
        f.s_grad = {Vec3{0.0, 0.0, 0.0}};
        f.s_dnu = {0.0};
        s.frames.push_back(f);
    }
    return s;
}

ErrorKind parse_kind(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "configuration was accepted";
    return ErrorKind::NestingViolation;
}

}  // namespace

TEST(DataNorms, ExponentialTraceOnUnitArea)
{
    const auto s = scalar_series([](double t) { return std::exp(-t); }, 1e-3, 40.0);
    const auto n = data_norms(s);
    EXPECT_NEAR(n.n, 2.0, 1e-6);
    EXPECT_NEAR(n.value_part[0], 1.0, 1e-6);
    EXPECT_NEAR(n.value_part[1], 1.0, 1e-6);
    EXPECT_EQ(n.grad_part[0], 0.0);
    EXPECT_EQ(n.n_tilde, 0.0);
}

TEST(DataNorms, ZeroTraces)
{
    const auto n = data_norms(scalar_series([](double) { return 0.0; }, 0.01, 2.0));
    EXPECT_EQ(n.n, 0.0);
    EXPECT_EQ(n.n0, 0.0);
    EXPECT_EQ(n.n_tilde, 0.0);
}

TEST(DataNorms, Homogeneity)
{
    const auto a = data_norms(scalar_series([](double t) { return std::sin(3.0 * t) * std::exp(-t); }, 0.01, 10.0));
    const auto b =
        data_norms(scalar_series([](double t) { return 3.0 * std::sin(3.0 * t) * std::exp(-t); }, 0.01, 10.0));
    EXPECT_NEAR(b.n, 3.0 * a.n, 1e-12 * b.n);
}

TEST(DataNorms, SubtractRejectsMismatch)
{
    const auto a = scalar_series([](double) { return 1.0; }, 0.01, 1.0);
    const auto b = scalar_series([](double) { return 1.0; }, 0.02, 1.0);
    try {
        subtract(a, b);
        FAIL() << "expected ConfigMismatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigMismatch);
    }
}

TEST(DataNorms, DirectDifferenceMatchesTwoRunSubtraction)
{
    auto c = cube_config(0.05, 0.5, 0.25, 0.1, 0.3, 0.0);
    c.obstacle = NoObstacle{};
    const auto d = build_domain(c);
    const auto sp = SpeedField::uniform(d.grid);
    SimOptions o;
    o.sponge = false;
    const Simulator sim(d, sp, o);
    auto a = InitialData::zero(d.grid);
    auto b = InitialData::zero(d.grid);
    a.g = sample(d.grid, pulse({0.05, 0.0, 0.0}, 0.2, 4));
    b.g = sample(d.grid, pulse({-0.05, 0.02, 0.0}, 0.18, 4));
    b.f = sample(d.grid, pulse({0.0, 0.0, 0.05}, 0.15, 4));
    TraceSeriesRecorder ra(d);
    TraceSeriesRecorder rb(d);
    TraceSeriesRecorder rd(d);
    NormRecorder nd(d);
    Recorder* pa[] = {&ra};
    Recorder* pb[] = {&rb};
    Recorder* pd[] = {&rd, &nd};
    sim.run(a, 1.5, pa);
    sim.run(b, 1.5, pb);
    run_difference(sim, a, sim, b, 1.5, pd);
    const auto two_run = data_norms(subtract(ra.series(), rb.series()));
    const auto direct = data_norms(rd.series());
    const auto streamed = nd.norms();
    ASSERT_GT(direct.n, 0.0);
    EXPECT_NEAR(two_run.n, direct.n, 1e-12 * direct.n);
    EXPECT_NEAR(two_run.n0, direct.n0, 1e-12 * direct.n0);
    EXPECT_NEAR(two_run.n_tilde, direct.n_tilde, 1e-12 * direct.n_tilde);
    EXPECT_NEAR(streamed.n, direct.n, 1e-12 * direct.n);
}

TEST(Tradeoff, SummaryFlags)
{
    const std::vector<double> rho{2, 4, 6, 8, 10};
    const std::vector<double> u{0.9, 0.5, 0.2, 0.3, 0.6};
    const auto s = summarize_tradeoff(rho, u);
    EXPECT_EQ(s.rho_star, 6.0);
    EXPECT_EQ(s.min_error, 0.2);
    EXPECT_TRUE(s.interior_minimum);
    EXPECT_TRUE(s.decreasing_then_increasing);
    const std::vector<double> bumpy{0.9, 0.5, 0.6, 0.2, 0.3};
    EXPECT_FALSE(summarize_tradeoff(rho, bumpy).decreasing_then_increasing);
    const std::vector<double> mono{0.9, 0.5, 0.4, 0.3, 0.2};
    EXPECT_FALSE(summarize_tradeoff(rho, mono).interior_minimum);
}

TEST(Config, ParsesTheSmallDecayConfig)
{
    const auto c = parse_config(kSmallDecay);
    EXPECT_EQ(c.name, "small_decay");
    EXPECT_DOUBLE_EQ(c.domain.h, 0.05);
    EXPECT_DOUBLE_EQ(c.sim.t_max, 5.0);
    EXPECT_TRUE(c.decay.control);
    EXPECT_EQ(c.data.f.kind, DataSpec::Kind::Radial);
}

TEST(Config, RejectsUnknownKeys)
{
    EXPECT_EQ(parse_kind(std::string(kSmallDecay) + "\n[bogus]\nx = 1\n"), ErrorKind::ConfigError);
    std::string typo = kSmallDecay;
    typo.replace(typo.find("t_max"), 5, "tmax_");
    EXPECT_EQ(parse_kind(typo), ErrorKind::ConfigError);
}

TEST(Config, RejectsBadValues)
{
    std::string bad_type = kSmallDecay;
    bad_type.replace(bad_type.find("h = 0.05"), 8, "h = \"x\"");
    EXPECT_EQ(parse_kind(bad_type), ErrorKind::ConfigError);
    std::string bad_obstacle = kSmallDecay;
    bad_obstacle.replace(bad_obstacle.find("\"sphere\""), 8, "\"torus\"");
    EXPECT_EQ(parse_kind(bad_obstacle), ErrorKind::ConfigError);
    EXPECT_EQ(parse_kind("this is [not toml"), ErrorKind::ConfigError);
}

TEST(Config, HashIsStableAndRecomputable)
{
    const auto a = parse_config(kSmallDecay);
    auto b = parse_config(kSmallDecay);
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a), fnv1a_hex(canonical_json(a).dump()));
    const auto reparsed = nlohmann::json::parse(canonical_json(a).dump());
    EXPECT_EQ(fnv1a_hex(reparsed.dump()), config_hash(a));
    b.sim.workers = 7;
    b.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.sim.t_max = 6.0;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, FnvReferenceVectors)
{
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Cli, MissingConfigExitsTwo)
{
    const auto r = cli({"decay", "/nonexistent/config.toml"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.record.value("status", ""), "error");
}

TEST(Cli, UsageErrorExitsTwo)
{
    EXPECT_EQ(cli({"no-such-command"}).code, 2);
}

TEST(Cli, GeometryErrorExitsTwo)
{
    const auto dir = scratch_dir("nesting");
    std::string text = kSmallDecay;
    text.replace(text.find("lo = [0.25, -0.25, -0.25]"), 25, "lo = [0.34, -0.25, -0.25]");
    const auto cfg = write_text(dir / "bad.toml", text);
    const auto r = cli({"check-domain", cfg.string(), "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.record.value("kind", ""), "NestingViolation");
}

TEST(Cli, BlowupExitsThree)
{
    const auto dir = scratch_dir("blowup");
    const auto r = cli({"simulate", EXWAVE_CONFIG_DIR "/blowup.toml", "--out", dir.string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.record.value("kind", ""), "NumericalBlowup");
}

TEST(Cli, DecayWritesReport)
{
    const auto dir = scratch_dir("decay");
    const auto cfg = write_text(dir / "decay.toml", kSmallDecay);
    const auto r = cli({"decay", cfg.string(), "--out", (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.record.dump();
    const auto report = nlohmann::json::parse(read_bytes(dir / "out" / "report.json"));
    EXPECT_TRUE(report.contains("config_hash"));
    for (const char* k : {"tau", "gamma", "sigma", "alpha"}) EXPECT_TRUE(report["constants"].contains(k)) << k;
    EXPECT_EQ(fnv1a_hex(report["config"].dump()), report["config_hash"].get<std::string>());
    EXPECT_GT(report["fit"]["delta"].get<double>(), 0.0);
    EXPECT_TRUE(report["control"].contains("cleared"));
    EXPECT_TRUE(fs::exists(dir / "out" / "energy.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "energy_control.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "timing.json"));
}

TEST(Cli, OutputDirectoryPrecedence)
{
    const auto dir = scratch_dir("precedence");
    const auto cfg = write_text(dir / "c.toml", kSmallDecay);
    ::setenv("EXWAVE_OUTPUT_DIR", (dir / "env").string().c_str(), 1);
    EXPECT_EQ(cli({"check-domain", cfg.string()}).code, 0);
    EXPECT_TRUE(fs::exists(dir / "env" / "report.json"));
    EXPECT_EQ(cli({"check-domain", cfg.string(), "--out", (dir / "flag").string()}).code, 0);
    EXPECT_TRUE(fs::exists(dir / "flag" / "report.json"));
    ::unsetenv("EXWAVE_OUTPUT_DIR");
}

TEST(Cli, RepeatedRunsAreByteIdentical)
{
    const auto dir = scratch_dir("repro");
    const auto cfg = write_text(dir / "e2e.toml", kSmallEndToEnd);
    ASSERT_EQ(cli({"end-to-end", cfg.string(), "--out", (dir / "a").string(), "--workers", "1"}).code, 0);
    ASSERT_EQ(cli({"end-to-end", cfg.string(), "--out", (dir / "b").string(), "--workers", "3"}).code, 0);
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto name = entry.path().filename();
        if (name == "timing.json") continue;
        ASSERT_TRUE(fs::exists(dir / "b" / name)) << name;
        EXPECT_EQ(read_bytes(entry.path()), read_bytes(dir / "b" / name)) << name;
        ++compared;
    }
    EXPECT_GE(compared, 5);
}

TEST(Cli, SeedChangesNoisyOutputsOnly)
{
    const auto dir = scratch_dir("seed");
    const auto cfg = write_text(dir / "e2e.toml", kSmallEndToEnd);
    ASSERT_EQ(cli({"sweep-noise", cfg.string(), "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(cli({"sweep-noise", cfg.string(), "--out", (dir / "b").string(), "--seed", "6"}).code, 0);
    EXPECT_NE(read_bytes(dir / "a" / "errors.csv"), read_bytes(dir / "b" / "errors.csv"));
}
