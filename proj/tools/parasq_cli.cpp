// parasq <experiment> [--config file] [--R 64,256] [--p 2,3,4] [--K 4] [--family name] [--seed n]
//        [--deterministic | --no-deterministic] [--out dir] [--set key=value ...]
// Writes report.json, report.md and CSV sidecars to the output directory, prints one acceptance line
// per criterion and exits 0 when every criterion passes, 1 when one fails, 2 on errors.

#include <iostream>

#include "CLI11.hpp"
#include "parasq/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"parasq: weighted square function and wave envelope experiments"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path, R, p, K, family, weight, out;
    int64_t seed = -1;
    std::vector<std::string> sets;
    bool det = false, nondet = false, print_config = false;

    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--R", R, "comma-separated scales (powers of 4)");
    app.add_option("--p", p, "comma-separated exponents");
    app.add_option("--K", K, "comma-separated branching factors");
    app.add_option("--family", family, "field / Schrodinger / measure family, or all");
    app.add_option("--weight", weight, "weight family, or all");
    app.add_option("--seed", seed, "base seed");
    app.add_option("--out", out, "output directory");
    app.add_option("--set", sets, "extra key=value overrides");
    app.add_flag("--deterministic", det, "single-threaded reductions, no timing in reports");
    app.add_flag("--no-deterministic", nondet, "allow PARASQ_THREADS workers and report timing");
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

    for (const auto& name : parasq::experiment_names()) app.add_subcommand(name, "run the " + name + " experiment");

    CLI11_PARSE(app, argc, argv);

    try {
        parasq::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = parasq::ExperimentConfig::load(config_path);
        auto subs = app.get_subcommands();
        if (!subs.empty()) cfg.experiment = subs.front()->get_name();
        if (!R.empty()) cfg.set("R", R);
        if (!p.empty()) cfg.set("p", p);
        if (!K.empty()) cfg.set("K", K);
        if (!family.empty()) cfg.set("family", family);
        if (!weight.empty()) cfg.set("weight", weight);
        if (seed >= 0) cfg.set("seed", std::to_string(seed));
        if (!out.empty()) cfg.set("out", out);
        if (det) cfg.deterministic = true;
        if (nondet) cfg.deterministic = false;
        for (const auto& kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw parasq::Error("--set expects key=value, got " + kv);
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (print_config) {
            std::cout << cfg.to_text();
            return 0;
        }
        auto report = parasq::run(cfg);
        for (const char* fmt : {"json", "md", "csv"}) parasq::emit(report, fmt, cfg.out);
        std::cout << parasq::acceptance_lines(report);
        std::cout << (report.pass() ? "PASS" : "FAIL") << " " << cfg.experiment << " -> " << cfg.out << "\n";
        return report.pass() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
