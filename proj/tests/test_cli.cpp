#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "parasq/experiments.hpp"

using namespace parasq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("parasq_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

TEST_CASE("config round-trip is byte-identical") {
    ExperimentConfig cfg;
    cfg.experiment = "bilinear";
    cfg.set("R", "64,256,1024");
    cfg.set("p", "2,2.5,4");
    cfg.set("K", "2,4");
    cfg.set("kappa", "0.3333333333333333");
    cfg.set("seed", "42");
    cfg.set("deterministic", "false");
    auto text = cfg.to_text();
    auto again = ExperimentConfig::parse(text).to_text();
    CHECK(again == text);
    CHECK(ExperimentConfig::parse(again).to_text() == again);
    CHECK(ExperimentConfig::parse(text).hash() == cfg.hash());

    auto other = cfg;
    other.out = "elsewhere";
    CHECK(other.hash() == cfg.hash());
    other.seed = 43;
    CHECK(other.hash() != cfg.hash());
}

TEST_CASE("config rejects bad input") {
    ExperimentConfig cfg;
    CHECK_THROWS(cfg.set("R", "32"));
    CHECK_THROWS(cfg.set("K", "1"));
    CHECK_THROWS(cfg.set("colour", "blue"));
    CHECK_THROWS(cfg.set("p", "two"));
    CHECK_THROWS(ExperimentConfig::parse("R 64\n"));
    auto parsed = ExperimentConfig::parse("# comment\n\nexperiment = kappa-scan\nR=64\n");
    CHECK(parsed.experiment == "kappa-scan");
    CHECK(parsed.R == std::vector<int64_t>{64});
}

TEST_CASE("run rejects unknown experiments and oversized grids before any work") {
    ExperimentConfig cfg;
    cfg.experiment = "nope";
    CHECK_THROWS_WITH_AS(run(cfg), doctest::Contains("unknown experiment"), Error);
    cfg.experiment = "envelope-verify";
    cfg.set("R", "64,4096");
    cfg.mem_cap_mb = 64.0;
    CHECK_THROWS_WITH_AS(run(cfg), doctest::Contains("pre-flight"), Error);
    CHECK(estimate_memory_mb(cfg) > 64.0);
}

TEST_CASE("kappa-scan with H = 1 at R = 64 passes with every kappa equal to 1") {
    ExperimentConfig cfg;
    cfg.experiment = "kappa-scan";
    cfg.weight = "constant";
    cfg.R = {64};
    auto rep = run(cfg);
    CHECK(rep.pass());
    REQUIRE(!rep.criteria.empty());
    CHECK(rep.criteria[0].id == "kappa_identity");
    const auto& tab = rep.tables.front();
    auto col = std::find(tab.columns.begin(), tab.columns.end(), "kappa_max") - tab.columns.begin();
    for (const auto& row : tab.rows) CHECK(std::get<double>(row[static_cast<size_t>(col)]) == doctest::Approx(1.0));
}

TEST_CASE("empty report emits valid empty tables") {
    Report r;
    auto dir = scratch("empty");
    for (const char* f : {"json", "md", "csv"}) emit(r, f, dir.string());
    auto j = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(j["schema_version"] == kReportSchemaVersion);
    CHECK(j["criteria"].empty());
    CHECK(j["fits"].empty());
    CHECK(j["tables"].empty());
    CHECK(slurp(dir / "fits.csv") == "name,p,relation,slope,predicted,tolerance,residual,sufficiency,pass\n");
    CHECK(slurp(dir / "criteria.csv") == "id,pass,description,detail\n");
    CHECK(slurp(dir / "report.md").find("## Criteria") != std::string::npos);
    CHECK_THROWS(emit(r, "xml", dir.string()));
    fs::remove_all(dir);
}

TEST_CASE("two identical runs emit byte-identical files") {
    ExperimentConfig cfg;
    cfg.experiment = "broad-narrow";
    cfg.R = {64};
    cfg.p = {3.0};
    cfg.trials = 2;
    cfg.points = 500;
    auto a = scratch("det_a"), b = scratch("det_b");
    for (const char* f : {"json", "md", "csv"}) {
        emit(run(cfg), f, a.string());
        emit(run(cfg), f, b.string());
    }
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    CHECK(files >= 5);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("ex_ball exponent table matches the golden file") {
    std::vector<std::vector<std::string>> got;
    for (auto [exp, fam] : {std::pair<std::string, std::string>{"kappa-scan", "all"}, {"square-verify", "ball_packet"}}) {
        ExperimentConfig cfg;
        cfg.experiment = exp;
        cfg.family = fam;
        cfg.weight = "ball";
        cfg.R = {64, 256};
        auto dir = scratch("golden");
        emit(run(cfg), "csv", dir.string());
        std::ifstream in(dir / "fits.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) got.push_back(split_csv_line(line));
        fs::remove_all(dir);
    }
    std::ifstream gin(fs::path(PARASQ_GOLDEN_DIR) / "ex_ball_fits.csv");
    REQUIRE(gin.good());
    std::string line;
    std::getline(gin, line);
    size_t n = 0;
    while (std::getline(gin, line)) {
        auto want = split_csv_line(line);
        REQUIRE(n < got.size());
        const auto& row = got[n++];
        CHECK(row[0] == want[0]);
        CHECK(row[1] == want[1]);
        CHECK(row[2] == want[2]);
        CHECK(std::stod(row[3]) == doctest::Approx(std::stod(want[3])).epsilon(1e-9));
        CHECK(std::stod(row[4]) == doctest::Approx(std::stod(want[4])).epsilon(1e-12));
        CHECK(row[8] == want[5]);
    }
    CHECK(n == got.size());
}

TEST_CASE("memory estimate stays within a factor 2 of the observed peak") {
    ExperimentConfig cfg;
    cfg.experiment = "kappa-scan";
    cfg.weight = "ball";
    cfg.R = {1024};
    double est = estimate_memory_mb(cfg);
    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        try {
            run(cfg);
        } catch (...) {
            _exit(1);
        }
        _exit(0);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    REQUIRE(WIFEXITED(status));
    REQUIRE(WEXITSTATUS(status) == 0);
    rusage ru{};
    getrusage(RUSAGE_CHILDREN, &ru);
    double peak = static_cast<double>(ru.ru_maxrss) / 1024.0;
    CHECK(est >= peak / 2.0);
    CHECK(est <= peak * 2.0);
}
