#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "nldiff/experiment.hpp"

using namespace nldiff;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nldiff_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int config_error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

const char* kTiny = R"(grid:
  half_width: 16
  n: 256
evolution:
  dt: 0.1
  t_end: 8
observations:
  extra: [8]
tolerances:
  trend_t_lo: 3
  trend_t_hi: 8
output:
  checkpoints: [4]
)";

}  // namespace

TEST_CASE("config defaults", "[config]") {
    const ExperimentConfig c = parse_config("");
    CHECK(c == ExperimentConfig{});
    CHECK(c.kernel.radius == 1.0);
    CHECK(c.kernel.exponent == 3);
    CHECK(c.grid.half_width == 64.0);
    CHECK(c.grid.n == 1024);
    CHECK(c.evolution.scheme == Scheme::exponential);
    CHECK(c.evolution.dt == 0.05);
    CHECK(c.evolution.t_end == 640.0);
    CHECK(c.stationary.tol == 1e-8);
    CHECK(c.tolerances.drift_cap == 1e-3);
    CHECK(c.output.checkpoints == std::vector<double>{160.0, 640.0});
    CHECK(std::get<Disk>(c.hole.shape()).radius == 2.5);

    const std::vector<double> t = c.observation_times();
    CHECK(t.front() >= 3.0);
    CHECK(t.back() == 640.0);
    for (double x : {64.0, 160.0, 640.0}) CHECK(std::count(t.begin(), t.end(), x) == 1);
    CHECK(std::is_sorted(t.begin(), t.end()));
}

TEST_CASE("config round trip", "[config]") {
    for (const char* name : {"reference.yaml", "small.yaml", "two_disks.yaml"}) {
        const std::string text = slurp(fs::path(NLDIFF_CONFIG_DIR) / name);
        REQUIRE_FALSE(text.empty());
        const ExperimentConfig c = parse_config(text);
        CHECK(parse_config(serialize_config(c)) == c);
    }
    ExperimentConfig c;
    c.evolution.scheme = Scheme::forward_euler;
    c.evolution.dt = 0.5;
    c.initial.kind = InitialData::Kind::annulus;
    c.hole = HoleShape::rectangle(-2.5, -2.25, 3.0, 2.5);
    c.stationary.ladder = {10.0, 20.0};
    c.output.cache_dir = "/tmp/x";
    CHECK(parse_config(serialize_config(c)) == c);
}

TEST_CASE("config errors carry a line number", "[config]") {
    CHECK(config_error_line("kernel:\n  radius: 1\n  bogus: 2\n") == 3);
    CHECK_THROWS_WITH(parse_config("kernel:\n  radius: 1\n  bogus: 2\n"), ContainsSubstring("bogus"));
    CHECK(config_error_line("grid:\n  n: 256\nextras: 1\n") == 3);
    CHECK(config_error_line("grid:\n  n: many\n") == 2);
    CHECK(config_error_line("evolution:\n  scheme: implicit\n") == 2);
    CHECK(config_error_line("grid: [1, 2\n") > 0);

    const std::string small_hole = "hole:\n  type: disk\n  radius: 1.5\n";
    CHECK_THROWS_AS(parse_config(small_hole), ConfigError);
    CHECK_THROWS_WITH(parse_config(small_hole), ContainsSubstring("H_H"));
    CHECK(config_error_line(small_hole) == 2);

    CHECK_THROWS_AS(parse_config("stationary:\n  r0: 0.3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("observations:\n  t0: 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("grid:\n  half_width: 16\n  n: 64\n"), ConfigError);
}

TEST_CASE("snapshots", "[snapshot]") {
    const fs::path dir = scratch("snap");
    const Grid2D g = Grid2D::make(4.0, 16);
    Field2D f(g);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::sin(0.37 * k) * 1e-3 + (k % 7 == 0 ? 1e-310 : 0.0);
    const std::string path = (dir / "f.snap").string();
    snapshot_save(f, path, {12.5, Scheme::forward_euler});
    CHECK(fs::file_size(path) == kSnapshotHeaderSize + f.size() * sizeof(double));

    SnapshotMeta meta;
    const Field2D back = snapshot_load(path, &meta);
    CHECK(back == f);
    CHECK(back.grid() == g);
    CHECK(meta.time == 12.5);
    CHECK(meta.scheme == Scheme::forward_euler);

    const std::string bytes = slurp(path);
    auto write = [&](const std::string& name, const std::string& content) {
        const std::string p = (dir / name).string();
        std::ofstream(p, std::ios::binary) << content;
        return p;
    };
    CHECK_THROWS_AS(snapshot_load(write("trunc.snap", bytes.substr(0, bytes.size() - 8))), SnapshotCorrupt);
    CHECK_THROWS_AS(snapshot_load(write("head.snap", bytes.substr(0, 20))), SnapshotCorrupt);

    std::string flipped = bytes;
    flipped[kSnapshotHeaderSize + 17] ^= 0x01;
    CHECK_THROWS_WITH(snapshot_load(write("flip.snap", flipped)), ContainsSubstring("checksum"));

    std::string v2 = bytes;
    v2[8] = 2;
    CHECK_THROWS_AS(snapshot_load(write("v2.snap", v2)), SnapshotIncompatible);

    std::string magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(snapshot_load(write("magic.snap", magic)), SnapshotCorrupt);
    CHECK_THROWS_AS(snapshot_load((dir / "missing.snap").string()), SnapshotError);
}

TEST_CASE("experiment runs are cached, reproducible and resumable", "[experiment]") {
    const fs::path root = scratch("run");
    ExperimentConfig cfg = parse_config(kTiny);
    cfg.output.cache_dir = (root / "cache").string();

    cfg.output.dir = (root / "a").string();
    const ExperimentResult a = run_experiment(cfg);
    CHECK_FALSE(a.cache_hit);
    CHECK(a.complete);
    CHECK_THAT(slurp(root / "a" / "run.log"), ContainsSubstring("stationary cache miss"));

    cfg.output.dir = (root / "b").string();
    const ExperimentResult b = run_experiment(cfg);
    CHECK(b.cache_hit);
    CHECK_THAT(slurp(root / "b" / "run.log"), ContainsSubstring("stationary cache hit"));
    CHECK(b.stationary.phi == a.stationary.phi);
    CHECK(b.M_star == a.M_star);

    for (const char* f : {"diagnostics.csv", "pointwise.csv", "final.snap", "phi.snap", "stationary.json"})
        CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));

    const std::string csv = slurp(root / "a" / "diagnostics.csv");
    CHECK(csv.rfind(kCsvHeader, 0) == 0);
    CHECK(slurp(root / "a" / "pointwise.csv").rfind("t,probe0,probe1\n", 0) == 0);
    CHECK(parse_config(slurp(root / "b" / "config.yaml")) == cfg);

    const std::string summary = slurp(root / "a" / "summary.txt");
    CHECK_THAT(summary, ContainsSubstring("M*_phi"));
    REQUIRE_FALSE(a.assertions.empty());
    for (const auto& as : a.assertions) CHECK_THAT(summary, ContainsSubstring(as.name));
    CHECK(fs::exists(root / "a" / "checkpoint_t4.snap"));
    CHECK(fs::exists(root / "a" / "checkpoint_t4.json"));

    SECTION("stopping early marks the outputs incomplete") {
        cfg.output.dir = (root / "c").string();
        RunRequest req;
        req.until = 4.0;
        const ExperimentResult c = run_experiment(cfg, req);
        CHECK_FALSE(c.complete);
        CHECK(c.t_final == 4.0);
        CHECK(slurp(root / "c" / "summary.txt").rfind("INCOMPLETE", 0) == 0);

        SECTION("resuming from the checkpoint reproduces the full run") {
            RunRequest more;
            more.resume = (root / "c" / "checkpoint_t4.snap").string();
            const ExperimentResult d = run_experiment(cfg, more);
            CHECK(d.complete);
            CHECK(d.u_final == a.u_final);
            CHECK(slurp(root / "c" / "diagnostics.csv") == csv);
            CHECK(slurp(root / "c" / "pointwise.csv") == slurp(root / "a" / "pointwise.csv"));
        }
    }
}
