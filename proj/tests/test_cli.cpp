#include "doctest.h"
#include "support.hpp"

#include "hhsplit/cli.hpp"
#include "hhsplit/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace testing;
namespace fs = std::filesystem;
using hhsplit::cli::parse_config;
using hhsplit::cli::parse_number;

namespace {

struct Invocation {
    hhsplit::cli::ParseResult parsed;
    std::string out, err;
};

Invocation parse(std::vector<std::string> args) {
    args.insert(args.begin(), "hhsplit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Invocation inv{parse_config(static_cast<int>(argv.size()), argv.data(), out, err)};
    inv.out = out.str();
    inv.err = err.str();
    return inv;
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "hhsplit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return hhsplit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hhsplit_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

const std::string kSpiking = std::string(HHSPLIT_SOURCE_DIR) + "/configs/spiking.ini";

}  // namespace

TEST_CASE("numbers") {
    CHECK(parse_number("0.125") == 0.125);
    CHECK(parse_number("2^-3") == 0.125);
    CHECK(parse_number("1/8") == 0.125);
    CHECK(parse_number("1e-3") == 1e-3);
    CHECK(parse_number("-65") == -65.0);
    CHECK_THROWS(parse_number("abc"));
    CHECK_THROWS(parse_number("1/0"));
    CHECK_THROWS(parse_number("0.1x"));
    CHECK_THROWS(parse_number("nan"));
}

TEST_CASE("minimal flags") {
    const auto inv = parse({"simulate", "--model", "hh-bm", "--scheme", "strang", "--dt", "1e-3", "--t-end", "1", "--seed", "42"});
    REQUIRE_FALSE(inv.parsed.exit_code);
    const auto& c = inv.parsed.config;
    CHECK(c.command == "simulate");
    CHECK(c.seed == 42);
    CHECK(c.dt_list == std::vector<double>{1e-3});
    CHECK(c.t_end == 1.0);
    CHECK(c.preset == "unit");
    CHECK(c.params.C == 1.0);
    CHECK(c.threads == 1);
    CHECK(c.sigma == 1.0);
    const auto spec = hhsplit::cli::build_model(c);
    CHECK(spec.dim() == 3);
    const auto x0 = hhsplit::cli::start_state(c, spec);
    CHECK(x0.v == 1.0);
}

TEST_CASE("validation errors") {
    auto inv = parse({"simulate", "--dt", "0"});
    REQUIRE(inv.parsed.exit_code);
    CHECK(*inv.parsed.exit_code == 1);
    CHECK(inv.err.find("dt") != std::string::npos);
    CHECK(*parse({"simulate", "--scheme", "rk4"}).parsed.exit_code == 1);
    CHECK(*parse({"simulate", "--model", "hh-ou", "--ou-theta", "-1"}).parsed.exit_code == 1);
    CHECK(*parse({"simulate", "--u0", "0.5,1.5,0.5"}).parsed.exit_code == 1);
    CHECK(*parse({"simulate", "--bogus", "1"}).parsed.exit_code == 1);
    CHECK(*parse({"convergence", "--dt", "1e-3,3e-3", "--ref-dt", "2e-3"}).parsed.exit_code == 1);
    CHECK(*parse({}).parsed.exit_code == 1);
}

TEST_CASE("help lists defaults") {
    const auto inv = parse({"density", "--help"});
    REQUIRE(inv.parsed.exit_code);
    CHECK(*inv.parsed.exit_code == 0);
    CHECK(inv.out.find("--burn-in") != std::string::npos);
    CHECK(inv.out.find("[ms]") != std::string::npos);
    CHECK(inv.out.find("200") != std::string::npos);
}

TEST_CASE("spiking parameter file") {
    auto inv = parse({"--config", kSpiking, "simulate"});
    REQUIRE_FALSE(inv.parsed.exit_code);
    const auto& c = inv.parsed.config;
    CHECK(c.params.C == 0.02);
    CHECK(c.params.g_Na == 120.0);
    CHECK(c.params.E_L == -61.0);
    CHECK(c.params.I == 10.0);
    CHECK(c.t_end == 50.0);
    inv = parse({"--config", kSpiking, "simulate", "--C", "0.2", "--t-end", "2"});
    REQUIRE_FALSE(inv.parsed.exit_code);
    CHECK(inv.parsed.config.params.C == 0.2);
    CHECK(inv.parsed.config.t_end == 2.0);
    CHECK(inv.parsed.config.params.g_K == 36.0);
    inv = parse({"--config", kSpiking, "compare"});
    REQUIRE_FALSE(inv.parsed.exit_code);
    CHECK(inv.parsed.config.params.C == 0.002);
}

TEST_CASE("unknown configuration keys") {
    const auto dir = scratch_dir("keys");
    std::ofstream(dir / "bad.ini") << "[simulate]\nbogus = 1\n";
    CHECK(*parse({"--config", (dir / "bad.ini").string(), "simulate"}).parsed.exit_code == 1);
    std::ofstream(dir / "section.ini") << "[nonsense]\ndt = 1\n";
    CHECK(*parse({"--config", (dir / "section.ini").string(), "simulate"}).parsed.exit_code == 1);
    CHECK(*parse({"--config", (dir / "missing.ini").string(), "simulate"}).parsed.exit_code == 1);
}

TEST_CASE("csv contracts") {
    const auto dir = scratch_dir("csv");
    REQUIRE(run({"convergence", "--schemes", "lt2,em", "--dt", "2^-6,2^-5,2^-4,2^-3", "--paths", "4", "--ref-dt", "2^-8",
                 "--out", dir.string()}) == 0);
    CHECK(first_line(dir / "convergence.csv") == "scheme,dt,rmse,n_paths,n_exploded,seed");
    REQUIRE(run({"density", "--preset", "unit", "--dt", "1e-2", "--t-end", "5", "--burn-in", "1", "--ref-dt", "1e-3",
                 "--sample-dt", "1e-2", "--bins", "20", "--out", dir.string()}) == 0);
    CHECK(first_line(dir / "density_reference.csv") == "bin_left,bin_right,frequency");
    CHECK(first_line(dir / "density_strang_dt0.01.csv") == "bin_left,bin_right,frequency");
    const auto meta = nlohmann::json::parse(slurp(dir / "convergence.csv.json"));
    CHECK(meta["format_version"] == hhsplit::kFormatVersion);
    CHECK(meta["seed"] == 0);
    CHECK(meta["config"]["command"] == "convergence");
    CHECK(meta["rows"] == 8);
}

TEST_CASE("outputs do not depend on the thread count") {
    const std::vector<std::vector<std::string>> studies{
        {"convergence", "--schemes", "lt1,strang,dtem", "--dt", "2^-7,2^-6,2^-5,2^-4", "--paths", "16", "--ref-dt", "2^-9"},
        {"consistency", "--dt", "2^-9,2^-8,2^-7,2^-6", "--paths", "300", "--ref-dt", "2^-11"},
        {"escape", "--steps", "20", "--paths", "40"},
        {"moments", "--dt", "1e-2", "--paths", "12"},
        {"compare", "--preset", "unit", "--schemes", "strang,em", "--dt", "1e-2,2e-2", "--t-end", "2", "--ref-dt", "1e-3",
         "--v0-list", "0,50"},
    };
    for (const auto& study : studies) {
        CAPTURE(study[0]);
        std::vector<fs::path> dirs;
        for (const char* threads : {"1", "4", "1"}) {
            dirs.push_back(scratch_dir(study[0] + "_" + std::to_string(dirs.size())));
            auto args = study;
            args.insert(args.end(), {"--seed", "9", "--threads", threads, "--out", dirs.back().string()});
            REQUIRE(run(args) == 0);
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            if (entry.path().extension() != ".csv") continue;
            const auto name = entry.path().filename();
            CAPTURE(name.string());
            const auto bytes = slurp(entry.path());
            CHECK(bytes == slurp(dirs[1] / name));
            CHECK(bytes == slurp(dirs[2] / name));
        }
    }
}

TEST_CASE("exit codes of dispatch") {
    const auto dir = scratch_dir("exit");
    CHECK(run({"compare", "--preset", "spiking", "--C", "0.002", "--schemes", "strang", "--dt", "1e-3", "--t-end", "20",
               "--ref-scheme", "em", "--ref-dt", "1e-3", "--out", dir.string()}) == 2);
    CHECK(run({"simulate", "--dt", "0", "--out", dir.string()}) == 1);
    CHECK(run({"simulate", "--dt", "1e-2", "--t-end", "1", "--out", dir.string()}) == 0);
    CHECK(fs::exists(dir / "simulate_strang_dt0.01.csv"));
}

TEST_CASE("csv tables") {
    hhsplit::CsvTable t({"a", "b"});
    t.cell(0.1).cell("x");
    t.end_row();
    CHECK(t.text() == "a,b\n0.10000000000000001,x\n");
    CHECK_THROWS(t.cell("needs,quote"));
    hhsplit::CsvTable u({"a", "b"});
    u.cell(1.0);
    CHECK_THROWS(u.end_row());
    CHECK(hhsplit::format_double(std::nan("")) == "nan");
    CHECK(hhsplit::format_double(-1.0 / 0.0) == "-inf");
    CHECK(std::stod(hhsplit::format_double(0.1)) == 0.1);
}
