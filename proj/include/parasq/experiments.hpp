#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <variant>
#include <vector>

#include "parasq/schrodinger.hpp"

namespace parasq {

constexpr int kReportSchemaVersion = 1;

// Plain key=value configuration; every field has a textual key.
struct ExperimentConfig {
    std::string experiment = "examples-suite";
    std::vector<int64_t> R{64, 256};
    std::vector<double> p{2.0, 3.0, 4.0};
    std::vector<int64_t> K{4};
    std::string family = "all";  // field family, or a Schrodinger / measure family
    std::string weight = "all";  // weight family for kappa-scan, square-verify, envelope-verify
    double kappa = 1.0 / 3.0;
    double alpha = 1.5;
    double beta = 2.0;
    double c = 0.125;
    double lambda = 1.0;
    double cutoff = 1.0;
    uint64_t seed = 1;
    int64_t trials = 0;   // 0: experiment default
    int64_t points = 10000;
    double tolerance = 0.1;
    std::string out = "parasq_out";
    bool deterministic = true;
    bool brute = true;    // brute-force confirmations where affordable
    double mem_cap_mb = 4096.0;

    // Sorted key=value lines; parse(to_text()) reproduces the config and to_text is idempotent.
    // Without the output directory, the text describes what is computed, not where it is written.
    std::string to_text(bool with_out = true) const;
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    // Applies one key=value override.
    void set(const std::string& key, const std::string& value);
    std::string hash() const;  // SHA-256 of to_text(false), hex
};

std::vector<std::string> experiment_names();

using Cell = std::variant<int64_t, double, std::string, bool>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct Criterion {
    std::string id;
    std::string description;
    bool pass = false;
    std::string detail;
};

struct Report {
    ExperimentConfig config;
    std::vector<Criterion> criteria;
    std::vector<ExponentFit> fits;
    std::vector<double> fit_p;  // p attached to each fit, or NaN
    std::deque<Table> tables;   // deque: references from table() stay valid
    double memory_estimate_mb = 0.0;
    double peak_rss_mb = 0.0;  // reported only outside deterministic mode
    double elapsed_s = 0.0;    // same

    bool pass() const;
    void add_fit(const ExponentFit& fit, double p);
    Table& table(const std::string& name, const std::vector<std::string>& columns);
};

// Estimated peak memory of a run; run() rejects configs above mem_cap_mb before any work.
double estimate_memory_mb(const ExperimentConfig& cfg);

Report run(const ExperimentConfig& cfg);

// json -> report.json, md -> report.md, csv -> <table>.csv per table plus fits.csv and criteria.csv.
// Returns the written paths.
std::vector<std::string> emit(const Report& r, const std::string& format, const std::string& dir);
std::string report_json(const Report& r);
std::string report_markdown(const Report& r);

// One "PASS id: description (detail)" or "FAIL ..." line per criterion.
std::string acceptance_lines(const Report& r);

}  // namespace parasq
