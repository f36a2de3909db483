#include "parasq/experiments.hpp"

#include <openssl/evp.h>
#include <sys/resource.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "parasq/decomp.hpp"
#include "parasq/envelope.hpp"
#include "parasq/measures.hpp"

namespace parasq {

namespace {

using ojson = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ------------------------------------------------------------ text helpers

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw Error("config: " + key + " expects a number, got '" + v + "'");
    return x;
}

int64_t parse_int(const std::string& key, const std::string& v) {
    int64_t x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw Error("config: " + key + " expects an integer, got '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config: " + key + " expects true or false, got '" + v + "'");
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F&& conv) {
    std::vector<T> out;
    for (const auto& item : split(v, ','))
        if (!item.empty()) out.push_back(conv(key, item));
    if (out.empty()) throw Error("config: " + key + " must not be empty");
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& conv) {
    std::string s;
    for (size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + conv(v[k]);
    return s;
}

std::string int_str(int64_t v) { return std::to_string(v); }

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[md[k] >> 4];
        out += hex[md[k] & 15];
    }
    return out;
}

}  // namespace

// ------------------------------------------------------------ config

std::string ExperimentConfig::to_text(bool with_out) const {
    std::map<std::string, std::string> kv = {
        {"experiment", experiment},
        {"R", join(R, int_str)},
        {"p", join(p, fmt_double)},
        {"K", join(K, int_str)},
        {"family", family},
        {"weight", weight},
        {"kappa", fmt_double(kappa)},
        {"alpha", fmt_double(alpha)},
        {"beta", fmt_double(beta)},
        {"c", fmt_double(c)},
        {"lambda", fmt_double(lambda)},
        {"cutoff", fmt_double(cutoff)},
        {"seed", std::to_string(seed)},
        {"trials", std::to_string(trials)},
        {"points", std::to_string(points)},
        {"tolerance", fmt_double(tolerance)},
        {"out", out},
        {"deterministic", deterministic ? "true" : "false"},
        {"brute", brute ? "true" : "false"},
        {"mem_cap_mb", fmt_double(mem_cap_mb)},
    };
    if (!with_out) kv.erase("out");
    std::string s;
    for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
    return s;
}

void ExperimentConfig::set(const std::string& key, const std::string& v) {
    if (key == "experiment") {
        experiment = v;
    } else if (key == "R") {
        R = parse_list<int64_t>(key, v, parse_int);
        for (int64_t r : R)
            if (!is_pow4(r)) throw Error("config: R must be a power of 4, got " + std::to_string(r));
    } else if (key == "p") {
        p = parse_list<double>(key, v, parse_double);
    } else if (key == "K") {
        K = parse_list<int64_t>(key, v, parse_int);
        for (int64_t k : K)
            if (k < 2) throw Error("config: K must be >= 2");
    } else if (key == "family") {
        family = v;
    } else if (key == "weight") {
        weight = v;
    } else if (key == "kappa") {
        kappa = parse_double(key, v);
    } else if (key == "alpha") {
        alpha = parse_double(key, v);
    } else if (key == "beta") {
        beta = parse_double(key, v);
    } else if (key == "c") {
        c = parse_double(key, v);
    } else if (key == "lambda") {
        lambda = parse_double(key, v);
    } else if (key == "cutoff") {
        cutoff = parse_double(key, v);
    } else if (key == "seed") {
        seed = static_cast<uint64_t>(parse_int(key, v));
    } else if (key == "trials") {
        trials = parse_int(key, v);
    } else if (key == "points") {
        points = parse_int(key, v);
    } else if (key == "tolerance") {
        tolerance = parse_double(key, v);
    } else if (key == "out") {
        out = v;
    } else if (key == "deterministic") {
        deterministic = parse_bool(key, v);
    } else if (key == "brute") {
        brute = parse_bool(key, v);
    } else if (key == "mem_cap_mb") {
        mem_cap_mb = parse_double(key, v);
    } else {
        throw Error("config: unknown key '" + key + "'");
    }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("config line " + std::to_string(n) + ": expected key=value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_text(false)); }

std::vector<std::string> experiment_names() {
    return {"kappa-scan", "square-verify", "envelope-verify", "broad-narrow",
            "bilinear",   "schrodinger-fls", "certificates", "examples-suite"};
}

// ------------------------------------------------------------ report

bool Report::pass() const {
    return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass; });
}

void Report::add_fit(const ExponentFit& fit, double p) {
    fits.push_back(fit);
    fit_p.push_back(p);
}

Table& Report::table(const std::string& name, const std::vector<std::string>& columns) {
    for (auto& t : tables)
        if (t.name == name) return t;
    tables.push_back({name, columns, {}});
    return tables.back();
}

namespace {

// ------------------------------------------------------------ families

TorusField make_field(const std::string& name, const GridSpec& g, uint64_t seed) {
    double s = 1.0 / std::sqrt(static_cast<double>(g.R));
    if (name == "ball_packet") return packet_field(g, caps_at_scale(s));
    if (name == "single_theta") return packet_field(g, {caps_at_scale(s)[static_cast<size_t>(cap_index_of(0.0, s))]});
    if (name == "random") return random_field(g, Band::Parabola, seed, false);
    throw Error("unknown field family: " + name);
}

// truncated_lattice is parametrised by alpha through kappa = (2 - alpha) / 6.
WeightParams weight_params(const std::string& name, const ExperimentConfig& cfg) {
    WeightParams w;
    w.family = name;
    w.lambda = cfg.lambda;
    w.alpha = cfg.alpha;
    w.kappa = name == "truncated_lattice" ? (2.0 - cfg.alpha) / 6.0 : cfg.kappa;
    w.c = cfg.c;
    w.cutoff = cfg.cutoff;
    return w;
}

double weight_alpha(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "lattice") return 2.0 - 3.0 * cfg.kappa;
    if (name == "ball") return 0.0;
    if (name == "constant") return 2.0;
    return cfg.alpha;
}

struct Prediction {
    bool has = false;
    double exponent = 0.0;
    std::string relation = "eq";
};

// kappa_max exponents: ball, alpha-dimensional bound, the two regimes of the truncated lattice.
Prediction kappa_prediction(const std::string& weight, const ExperimentConfig& cfg, double p) {
    double a = weight_alpha(weight, cfg);
    if (weight == "constant") return {true, 0.0, "eq"};
    if (weight == "ball") return {true, -2.0 * (1.0 / p - 0.25), "eq"};
    if (weight == "lattice" || weight == "dual_tube") return {true, -(2.0 - a) * (1.0 / p - 0.25), "le"};
    if (weight == "truncated_lattice") {
        double pa = 4.0 / (3.0 - a);
        double e = p <= pa ? -(2.0 - a) / (2.0 * p) : -((3.0 - a) / 2.0) * (1.0 / p - 0.25);
        return {true, e, "eq"};
    }
    return {};
}

// Exponent of ||f||_{L^p(H)} / ||S f||_p realised by the sharpness families.
Prediction sq_prediction(const std::string& field, const std::string& weight, const ExperimentConfig& cfg, double p) {
    if (field == "ball_packet" && weight == "ball") return {true, -2.0 * (1.0 / p - 0.25), "eq"};
    if (field == "single_theta" && weight == "dual_tube") return {true, -(2.0 - cfg.alpha) / (2.0 * p), "ge"};
    return {};
}

std::vector<std::pair<std::string, std::string>> field_weight_pairs(const ExperimentConfig& cfg) {
    if (cfg.family == "all" && cfg.weight == "all")
        return {{"ball_packet", "ball"},
                {"single_theta", "constant"},
                {"single_theta", "dual_tube"},
                {"random", "lattice"},
                {"random", "truncated_lattice"}};
    if (cfg.family == "all" || cfg.weight == "all")
        throw Error("family and weight must both be given, or both be 'all'");
    return {{cfg.family, cfg.weight}};
}

std::vector<std::string> kappa_weights(const ExperimentConfig& cfg) {
    if (cfg.weight == "all") return {"constant", "ball", "lattice", "dual_tube", "truncated_lattice"};
    return {cfg.weight};
}

std::vector<double> as_doubles(const std::vector<int64_t>& v) {
    std::vector<double> out;
    for (auto x : v) out.push_back(static_cast<double>(x));
    return out;
}

void add_fit_if(Report& rep, const std::string& name, const std::vector<int64_t>& Rs, const std::vector<double>& ys,
                const Prediction& pr, double p, double tol) {
    if (!pr.has || Rs.size() < 2) return;
    for (double y : ys)
        if (!(y > 0.0)) return;
    rep.add_fit(fit_exponent(name, as_doubles(Rs), ys, pr.exponent, tol, pr.relation), p);
}

Criterion criterion(const std::string& id, const std::string& desc, bool pass, const std::string& detail) {
    return {id, desc, pass, detail};
}

// Criterion over every fit whose name starts with the prefix.
Criterion fits_criterion(const Report& rep, const std::string& id, const std::string& desc, const std::string& prefix) {
    int total = 0, ok = 0;
    std::string worst;
    double worst_gap = -1e300;
    for (size_t k = 0; k < rep.fits.size(); ++k) {
        const auto& f = rep.fits[k];
        if (f.name.rfind(prefix, 0) != 0) continue;
        ++total;
        ok += f.pass ? 1 : 0;
        double gap = f.relation == "le" ? f.slope - f.predicted : f.relation == "ge" ? f.predicted - f.slope
                                                                                    : std::abs(f.slope - f.predicted);
        if (gap > worst_gap) {
            worst_gap = gap;
            worst = f.name + (std::isfinite(rep.fit_p[k]) ? " p=" + fmt_short(rep.fit_p[k]) : std::string()) +
                    " slope " + fmt_short(f.slope) + " vs " + fmt_short(f.predicted);
        }
    }
    std::string detail = std::to_string(ok) + "/" + std::to_string(total) + " fits within tolerance";
    if (total) detail += "; worst " + worst;
    return criterion(id, desc, total > 0 && ok == total, detail);
}

int64_t default_trials(const ExperimentConfig& cfg, int64_t d) { return cfg.trials > 0 ? cfg.trials : d; }

// ------------------------------------------------------------ experiments

void kappa_scan(const ExperimentConfig& cfg, Report& rep) {
    auto& tab = rep.table("kappa", {"weight", "R", "p", "kappa_max", "witness_s", "witness_cap", "witness_u1",
                                    "witness_u2", "path", "envelopes"});
    bool identity_checked = false, identity_ok = true;
    double worst_dev = 0.0;
    for (const auto& w : kappa_weights(cfg)) {
        std::map<double, std::vector<double>> by_p;
        for (int64_t R : cfg.R) {
            GridSpec g = GridSpec::make(R);
            GridMeasure H = make_weight(g, weight_params(w, cfg));
            KappaTable t = build_kappa_table(H);
            int64_t nenv = 0;
            for (const auto& sc : t.caps)
                for (const auto& ck : sc) nenv += static_cast<int64_t>(ck.envelopes.size());
            for (double p : cfg.p) {
                KappaMax km = kappa_max(t, p);
                by_p[p].push_back(km.value);
                tab.rows.push_back({w, R, p, km.value, km.witness.s, km.witness.cap.id(), km.witness.u.z1,
                                    km.witness.u.z2, t.path, nenv});
                if (w == "constant") {
                    identity_checked = true;
                    double target = std::pow(cfg.lambda, 1.0 / p);
                    for (size_t si = 0; si < t.caps.size(); ++si)
                        for (const auto& ck : t.caps[si])
                            for (const auto& e : ck.envelopes) {
                                double k = kappa_value(e.HU, e.maxHT, t.scales[si], R, p);
                                worst_dev = std::max(worst_dev, std::abs(k - target));
                            }
                    if (worst_dev > 1e-12) identity_ok = false;
                }
            }
        }
        for (double p : cfg.p) add_fit_if(rep, "kappa_" + w, cfg.R, by_p[p], kappa_prediction(w, cfg, p), p, cfg.tolerance);
    }
    if (identity_checked)
        rep.criteria.push_back(criterion("kappa_identity", "kappa_{p,lambda}(U) = lambda^{1/p} for every envelope",
                                         identity_ok, "max deviation " + fmt_short(worst_dev)));
    if (cfg.R.size() >= 2) rep.criteria.push_back(fits_criterion(rep, "kappa_slopes", "kappa_max slopes match", "kappa_"));
}

void theorem_verify(const ExperimentConfig& cfg, Report& rep, bool envelope) {
    auto& tab = rep.table(envelope ? "envelope" : "square",
                          {"field", "weight", "R", "p", "lhs", "sq_norm", "kappa_max", "sq_rhs", "env_rhs", "ratio_sq",
                           "ratio_env", "top_term_s"});
    Table* terms = nullptr;
    if (envelope) terms = &rep.table("terms", {"field", "weight", "R", "p", "s", "cap_id", "c", "u1", "u2", "kappa",
                                               "area", "g_wu", "term"});
    bool quad_ok = true;
    double quad_err2 = 0.0, quad_err4 = 0.0;
    for (const auto& [fname, wname] : field_weight_pairs(cfg)) {
        std::map<double, std::vector<double>> ratios, growth;
        for (int64_t R : cfg.R) {
            GridSpec g = GridSpec::make(R);
            TorusField f = make_field(fname, g, cfg.seed);
            GridMeasure H = make_weight(g, weight_params(wname, cfg));
            EnvelopeData env = compute_envelope_data(f);
            KappaTable kt = build_kappa_table(H);
            auto lhs = weighted_lp_pows(f, H, cfg.p);
            for (size_t k = 0; k < cfg.p.size(); ++k) {
                double p = cfg.p[k];
                RatioReport r = assemble_ratio(env, kt, lhs[k], p);
                double top_s = 0.0, top = -1.0;
                for (const auto& t : r.terms)
                    if (t.term > top) top = t.term, top_s = t.s;
                tab.rows.push_back({fname, wname, R, p, r.lhs, r.sq_norm, r.kmax.value, r.sq_rhs, r.env_rhs,
                                    r.ratio_sq, r.ratio_env, top_s});
                ratios[p].push_back(envelope ? r.ratio_env : r.lhs / r.sq_norm);
                growth[p].push_back(envelope ? r.ratio_env : r.ratio_sq);
                if (terms && R <= 256)
                    for (const auto& t : r.terms)
                        terms->rows.push_back({fname, wname, R, p, t.s, t.cap.id(), t.cap.c, t.u.z1, t.u.z2, t.kappa,
                                               t.area, t.g_wu, t.term});
            }
            if (!envelope && fname == "random" && R <= 256) {
                TorusField fs = with_samples(f);
                double e2 = std::abs(lp_norm_pow(fs, 2.0) - parseval_norm2(fs)) / parseval_norm2(fs);
                double e4 = std::abs(lp_norm_pow(fs, 4.0) - quartic_norm4(fs)) / quartic_norm4(fs);
                quad_err2 = std::max(quad_err2, e2);
                quad_err4 = std::max(quad_err4, e4);
                quad_ok = quad_ok && e2 <= 1e-9 && e4 <= 1e-8;
            }
        }
        std::string tag = fname + "+" + wname;
        for (double p : cfg.p) {
            add_fit_if(rep, std::string(envelope ? "env_growth_" : "sq_growth_") + tag, cfg.R, growth[p],
                       {true, 0.0, "le"}, p, cfg.tolerance);
            if (!envelope)
                add_fit_if(rep, "sq_sharp_" + tag, cfg.R, ratios[p], sq_prediction(fname, wname, cfg, p), p,
                           cfg.tolerance);
        }
    }
    if (cfg.R.size() >= 2) {
        if (envelope) {
            rep.criteria.push_back(fits_criterion(rep, "envelope_growth",
                                                  "||f||^p_{L^p(H)} / env_rhs grows slower than R^tol", "env_growth_"));
        } else {
            rep.criteria.push_back(fits_criterion(rep, "square_growth",
                                                  "||f||_{L^p(H)} / sq_rhs grows slower than R^tol", "sq_growth_"));
            bool any = std::any_of(rep.fits.begin(), rep.fits.end(),
                                   [](const ExponentFit& f) { return f.name.rfind("sq_sharp_", 0) == 0; });
            if (any)
                rep.criteria.push_back(fits_criterion(rep, "square_sharpness", "sharpness families reproduce exponents",
                                                      "sq_sharp_"));
        }
    }
    if (!envelope && quad_err2 + quad_err4 > 0.0)
        rep.criteria.push_back(criterion("quadrature", "Parseval and quartic quadrature match coefficient oracles",
                                         quad_ok,
                                         "p=2 rel err " + fmt_short(quad_err2) + ", p=4 rel err " + fmt_short(quad_err4)));
}

void broad_narrow_exp(const ExperimentConfig& cfg, Report& rep) {
    auto& tab = rep.table("broad_narrow", {"R", "K", "p", "trial", "m", "C", "prefactor", "mismatch", "violations",
                                           "max_ratio", "empirical_C"});
    int64_t trials = default_trials(cfg, 20);
    int64_t violations = 0;
    double worst = 0.0, worst_emp = 0.0;
    for (int64_t R : cfg.R) {
        GridSpec g = GridSpec::make(R);
        for (int64_t K : cfg.K)
            for (int64_t t = 0; t < trials; ++t) {
                uint64_t seed = cfg.seed + static_cast<uint64_t>(t);
                TorusField f = random_field(g, Band::Parabola, seed, false);
                auto pts = random_points(g, cfg.points, seed ^ 0x9e3779b97f4a7c15ULL);
                for (double p : cfg.p) {
                    auto r = broad_narrow(f, pts, p, K);
                    violations += r.violations;
                    worst = std::max(worst, r.max_ratio);
                    worst_emp = std::max(worst_emp, r.empirical_C);
                    tab.rows.push_back({R, K, p, t, static_cast<int64_t>(r.m), r.C, r.prefactor, r.mismatch,
                                        r.violations, r.max_ratio, r.empirical_C});
                }
            }
    }
    rep.criteria.push_back(criterion("broad_narrow", "pointwise broad-narrow bound holds with the derived constant",
                                     violations == 0,
                                     std::to_string(violations) + " violations; max lhs/bound " + fmt_short(worst) +
                                         "; max empirical C " + fmt_short(worst_emp)));
}

void bilinear_exp(const ExperimentConfig& cfg, Report& rep) {
    auto& tab = rep.table("bilinear", {"Rs", "K", "trial", "tau1", "tau2", "separation", "C_bil", "C_J", "C_Y", "Lambda",
                                       "rho_Y", "I_BY", "chain", "l4_holds", "orth1", "orth2"});
    auto& consts = rep.table("constants", {"R", "K", "s", "pair_id", "constant", "witness_x", "witness_y"});
    int64_t trials = default_trials(cfg, 100);
    bool finite = true, l4 = true, spread_ok = true;
    std::string spread_detail;
    for (int64_t K : cfg.K) {
        std::vector<double> max_per_R;
        for (int64_t Rs : cfg.R) {
            GridSpec g = GridSpec::make(Rs);
            GridMeasure Y = make_weight(g, weight_params("lattice", cfg));
            double mx = 0.0;
            for (int64_t t = 0; t < trials; ++t) {
                auto pair = random_pair(Rs, K, cfg.seed + static_cast<uint64_t>(t));
                auto b = bilinear_check(pair, Y, t == 0);
                finite = finite && std::isfinite(b.C_bil) && std::isfinite(b.C_J) && b.C_bil > 0.0;
                l4 = l4 && b.l4_holds;
                mx = std::max(mx, b.C_bil);
                std::string id = pair.tau1.id() + "-" + pair.tau2.id() + "-t" + std::to_string(t);
                tab.rows.push_back({Rs, K, t, pair.tau1.id(), pair.tau2.id(), pair.separation, b.C_bil, b.C_J, b.C_Y,
                                    b.Lambda, b.rho_Y, b.I_BY, b.chain, b.l4_holds, b.orth1, b.orth2});
                consts.rows.push_back({Rs, K, pair.tau1.s, id, b.C_bil, b.witness.x, b.witness.y});
            }
            max_per_R.push_back(mx);
        }
        auto [lo, hi] = std::minmax_element(max_per_R.begin(), max_per_R.end());
        double spread = *hi / *lo;
        spread_ok = spread_ok && spread <= 4.0;
        spread_detail += (spread_detail.empty() ? "" : "; ") + std::string("K=") + std::to_string(K) +
                         " max C_bil spread x" + fmt_short(spread);
    }
    rep.criteria.push_back(criterion("bilinear_finite", "bilinear constants finite", finite, ""));
    rep.criteria.push_back(criterion("bilinear_l4", "locally constant chain I_BY <= rho_Y Lambda C_J N1 N2 / |B|", l4,
                                     std::to_string(trials) + " trials per (Rs, K)"));
    if (cfg.R.size() >= 2)
        rep.criteria.push_back(criterion("bilinear_spread", "constants vary by at most x4 across Rs", spread_ok,
                                         spread_detail));
}

std::vector<std::pair<std::string, double>> fls_families(const ExperimentConfig& cfg) {
    if (cfg.family == "all") return {{"chirp", 0.0}, {"slab", 0.5}, {"slab", 1.5}, {"lattice", 0.25}};
    if (cfg.family == "chirp") return {{"chirp", 0.0}};
    if (cfg.family == "slab") return {{"slab", cfg.alpha}};
    if (cfg.family == "lattice") return {{"lattice", cfg.kappa}};
    throw Error("unknown Schrodinger family: " + cfg.family);
}

void schrodinger_exp(const ExperimentConfig& cfg, Report& rep, bool nikodym) {
    if (cfg.R.size() < 3) throw Error("schrodinger-fls needs at least three scales");
    auto& tab = rep.table("fls", {"family", "param", "R", "p", "numerator", "denominator", "ratio", "band_lo", "band_hi"});
    for (const auto& [fam, prm] : fls_families(cfg))
        for (double p : cfg.p) {
            std::vector<double> ys;
            for (int64_t R : cfg.R) {
                FlsPoint pt = fls_point(fam, prm, p, R);
                ys.push_back(pt.ratio);
                tab.rows.push_back({fam, prm, R, p, pt.numerator, pt.denominator, pt.ratio, pt.band_lo, pt.band_hi});
            }
            auto pred = fls_prediction(fam, prm, p);
            if (cfg.R.size() >= 2) {
                auto fit = fit_exponent("fls_" + fam + "_" + fmt_short(prm), as_doubles(cfg.R), ys, pred.exponent,
                                        cfg.tolerance, "eq");
                fit.sufficiency = pred.sufficiency;
                rep.add_fit(fit, p);
            }
        }
    if (cfg.R.size() >= 2)
        rep.criteria.push_back(fits_criterion(rep, "fls_lower_bounds", "lower-bound families reproduce exponents", "fls_"));
    if (!nikodym) return;
    auto& nt = rep.table("nikodym", {"R", "q", "ratio"});
    std::map<double, std::vector<double>> by_q;
    for (int64_t R : cfg.R) {
        SpaceTimeGrid g;
        g.nx = 4 * R;
        g.nt = 64;
        Rng rng(cfg.seed);
        g.vals.resize(static_cast<size_t>(g.nx * g.nt));
        for (auto& v : g.vals) v = rng.uniform();
        auto res = nikodym_max(g, R);
        for (double q : {2.0, 4.0}) {
            double ratio = line_lq_norm(res.N, g.hx(), q) / grid_lq_norm(g, q);
            by_q[q].push_back(ratio);
            nt.rows.push_back({R, q, ratio});
        }
    }
    if (cfg.R.size() >= 2) {
        for (auto& [q, ys] : by_q)
            rep.add_fit(fit_exponent("nikodym_q" + fmt_short(q), as_doubles(cfg.R), ys, 0.0, cfg.tolerance, "le"), q);
        rep.criteria.push_back(fits_criterion(rep, "nikodym", "Nikodym maximal ratio grows slower than R^tol",
                                              "nikodym_"));
    }
}

void certificates_exp(const ExperimentConfig& cfg, Report& rep) {
    auto& lt = rep.table("measure_lemma", {"family", "R", "bound", "param", "target", "exponent", "mu_cert", "muR_cert",
                                           "ratio", "pass", "mu_brute", "muR_brute", "brute_consistent", "brute_pass"});
    bool all_pass = true, brute_ok = true, brute_done = false;
    double worst = 0.0;
    std::vector<std::string> fams = cfg.family == "all" ? lemma_family_names() : std::vector<std::string>{cfg.family};
    int64_t rmin = *std::min_element(cfg.R.begin(), cfg.R.end());
    for (const auto& fam : fams)
        for (int64_t R : cfg.R) {
            bool brute = cfg.brute && R == rmin && R <= 64;
            for (const auto& l : measure_lemma(fam, R, brute)) {
                all_pass = all_pass && l.pass;
                worst = std::max(worst, l.ratio);
                if (l.brute) {
                    brute_done = true;
                    brute_ok = brute_ok && l.brute_consistent && l.brute_pass;
                }
                lt.rows.push_back({fam, R, l.bound, l.param, l.target, l.exponent, l.mu_cert, l.muR_cert, l.ratio,
                                   l.pass, l.mu_brute, l.muR_brute, l.brute_consistent, l.brute_pass});
            }
        }
    rep.criteria.push_back(criterion("measure_lemma", "rescaled-measure certificate bounds within factor 8", all_pass,
                                     "max ratio " + fmt_short(worst)));
    if (brute_done)
        rep.criteria.push_back(criterion("measure_lemma_brute", "brute-force confirmation of the certificates", brute_ok,
                                         "at R=" + std::to_string(rmin)));

    // Dimension certificates of the weight families at their stated alpha.
    auto& wt = rep.table("weight_certificates", {"weight", "R", "alpha", "certificate", "radius", "guarantee"});
    std::map<std::string, std::vector<double>> vals;
    for (const std::string w : {"lattice", "dual_tube", "truncated_lattice"})
        for (int64_t R : cfg.R) {
            GridSpec g = GridSpec::make(R);
            GridMeasure H = make_weight(g, weight_params(w, cfg));
            double a = weight_alpha(w, cfg);
            Certificate c = dimension_certificate(H, CertMode::Alpha, a);
            vals[w].push_back(c.value);
            wt.rows.push_back({w, R, a, c.value, c.radius, c.guarantee});
        }
    if (cfg.R.size() >= 2) {
        for (auto& [w, ys] : vals)
            rep.add_fit(fit_exponent("cert_" + w, as_doubles(cfg.R), ys, 0.0, cfg.tolerance, "le"), kNaN);
        rep.criteria.push_back(fits_criterion(rep, "weight_certificates",
                                              "alpha-dimensional certificates bounded independently of R", "cert_"));
    }
}

void examples_suite(const ExperimentConfig& cfg, Report& rep) {
    // Ball and lattice kappa scans, the sharpness families of the square function, the envelope theorem
    // families and the Schrodinger lower bounds, all at the configured R list.
    ExperimentConfig k = cfg;
    k.weight = "all";
    kappa_scan(k, rep);
    ExperimentConfig s = cfg;
    s.family = "all";
    s.weight = "all";
    theorem_verify(s, rep, false);
    theorem_verify(s, rep, true);
    // The lower-bound fits need three scales; the one-dimensional families are cheap, so the scale
    // list is extended by factors of 4.
    ExperimentConfig f = cfg;
    f.family = "all";
    std::sort(f.R.begin(), f.R.end());
    while (f.R.size() < 3) f.R.push_back(4 * f.R.back());
    schrodinger_exp(f, rep, false);
}

}  // namespace

namespace {

constexpr double kMiB = 1024.0 * 1024.0;
constexpr double kBaseMb = 10.0;

// Largest allocations of one theorem run at scale R: the fine-grid samples (non-sparse weights only)
// and the dense tube-mass buffer of the kappa stream path.
double theorem_mb(int64_t R, const std::string& weight, bool with_field) {
    auto M = static_cast<double>(8 * R);
    double tubes = std::min(16.0 * static_cast<double>(R) * static_cast<double>(R), static_cast<double>(int64_t{1} << 25));
    double mb = 8.0 * tubes / kMiB;
    if (weight == "constant") mb += (with_field ? 16.0 : 8.0) * M * M / kMiB;
    return mb;
}

}  // namespace

double estimate_memory_mb(const ExperimentConfig& cfg) {
    int64_t R = *std::max_element(cfg.R.begin(), cfg.R.end());
    auto r = static_cast<double>(R);
    auto M = 8.0 * r;
    const std::string& e = cfg.experiment;
    double mb = 0.0;
    if (e == "kappa-scan" || e == "square-verify" || e == "envelope-verify" || e == "examples-suite") {
        bool field = e != "kappa-scan";
        std::vector<std::string> weights;
        if (e == "kappa-scan")
            weights = kappa_weights(cfg);
        else if (e == "examples-suite")
            weights = {"constant"};
        else
            for (const auto& pr : field_weight_pairs(cfg)) weights.push_back(pr.second);
        for (const auto& w : weights) mb = std::max(mb, theorem_mb(R, w, field));
    } else if (e == "broad-narrow") {
        mb = 16.0 * static_cast<double>(cfg.points) * 64.0 / kMiB;
    } else if (e == "bilinear") {
        mb = 7.0 * 16.0 * M * M / kMiB;
    } else if (e == "schrodinger-fls") {
        mb = (16.0 * 16.0 * r * 64.0 + 8.0 * 4.0 * r * 64.0) / kMiB;
    } else if (e == "certificates") {
        mb = 480.0 * r * r * r / 64.0 / kMiB;
    }
    return kBaseMb + mb;
}

Report run(const ExperimentConfig& cfg) {
    const auto names = experiment_names();
    if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
        throw Error("unknown experiment: " + cfg.experiment);
    Report rep;
    rep.config = cfg;
    rep.memory_estimate_mb = estimate_memory_mb(cfg);
    if (rep.memory_estimate_mb > cfg.mem_cap_mb)
        throw Error("pre-flight: estimated memory " + fmt_short(rep.memory_estimate_mb) + " MB exceeds the cap of " +
                    fmt_short(cfg.mem_cap_mb) + " MB");
    if (cfg.deterministic) set_thread_override(1);
    auto t0 = std::chrono::steady_clock::now();
    const std::string& e = cfg.experiment;
    if (e == "kappa-scan")
        kappa_scan(cfg, rep);
    else if (e == "square-verify")
        theorem_verify(cfg, rep, false);
    else if (e == "envelope-verify")
        theorem_verify(cfg, rep, true);
    else if (e == "broad-narrow")
        broad_narrow_exp(cfg, rep);
    else if (e == "bilinear")
        bilinear_exp(cfg, rep);
    else if (e == "schrodinger-fls")
        schrodinger_exp(cfg, rep, true);
    else if (e == "certificates")
        certificates_exp(cfg, rep);
    else
        examples_suite(cfg, rep);
    if (cfg.deterministic) set_thread_override(0);
    if (!cfg.deterministic) {
        rep.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rusage ru{};
        getrusage(RUSAGE_SELF, &ru);
        rep.peak_rss_mb = static_cast<double>(ru.ru_maxrss) / 1024.0;
    }
    return rep;
}

// ------------------------------------------------------------ emit

namespace {

ojson cell_json(const Cell& c) {
    return std::visit([](const auto& v) -> ojson {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
            if (!std::isfinite(v)) return ojson(fmt_double(v));
            return ojson(v);
        } else {
            return ojson(v);
        }
    }, c);
}

std::string cell_text(const Cell& c, bool full) {
    return std::visit([full](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>)
            return full ? fmt_double(v) : fmt_short(v);
        else if constexpr (std::is_same_v<T, bool>)
            return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, int64_t>)
            return std::to_string(v);
        else
            return v;
    }, c);
}

ojson fit_json(const ExponentFit& f, double p) {
    ojson j;
    j["name"] = f.name;
    j["p"] = std::isfinite(p) ? ojson(p) : ojson(nullptr);
    j["relation"] = f.relation;
    j["R"] = f.R;
    j["values"] = f.values;
    j["slope"] = f.slope;
    j["intercept"] = f.intercept;
    j["residual"] = f.residual;
    j["predicted"] = f.predicted;
    j["tolerance"] = f.tolerance;
    j["sufficiency"] = f.sufficiency;
    j["pass"] = f.pass;
    return j;
}

// Markdown rows per fit: measured value against the predicted power law anchored at the first scale.
Table fit_rows(const Report& r) {
    Table t{"fit_rows", {"name", "R", "p", "measured", "predicted", "ratio"}, {}};
    for (size_t k = 0; k < r.fits.size(); ++k) {
        const auto& f = r.fits[k];
        for (size_t i = 0; i < f.R.size(); ++i) {
            double pred = f.values[0] * std::pow(f.R[i] / f.R[0], f.predicted);
            t.rows.push_back({f.name, static_cast<int64_t>(f.R[i]), r.fit_p[k], f.values[i], pred,
                              f.values[i] / pred});
        }
    }
    return t;
}

Table fit_summary(const Report& r) {
    Table t{"fits", {"name", "p", "relation", "slope", "predicted", "tolerance", "residual", "sufficiency", "pass"}, {}};
    for (size_t k = 0; k < r.fits.size(); ++k) {
        const auto& f = r.fits[k];
        t.rows.push_back({f.name, r.fit_p[k], f.relation, f.slope, f.predicted, f.tolerance, f.residual,
                          f.sufficiency, f.pass});
    }
    return t;
}

Table criteria_table(const Report& r) {
    Table t{"criteria", {"id", "pass", "description", "detail"}, {}};
    for (const auto& c : r.criteria) t.rows.push_back({c.id, c.pass, c.description, c.detail});
    return t;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

std::string table_csv(const Table& t) {
    std::string s;
    for (size_t k = 0; k < t.columns.size(); ++k) s += (k ? "," : "") + t.columns[k];
    s += "\n";
    for (const auto& row : t.rows) {
        for (size_t k = 0; k < row.size(); ++k) s += (k ? "," : "") + csv_escape(cell_text(row[k], true));
        s += "\n";
    }
    return s;
}

std::string table_md(const Table& t, size_t max_rows) {
    std::string s;
    s += "|";
    for (const auto& c : t.columns) s += " " + c + " |";
    s += "\n|";
    for (size_t k = 0; k < t.columns.size(); ++k) s += "---|";
    s += "\n";
    for (size_t i = 0; i < t.rows.size() && i < max_rows; ++i) {
        s += "|";
        for (const auto& c : t.rows[i]) s += " " + cell_text(c, false) + " |";
        s += "\n";
    }
    if (t.rows.size() > max_rows)
        s += "\n" + std::to_string(t.rows.size() - max_rows) + " more rows in " + t.name + ".csv\n";
    return s;
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << data;
    if (!out) throw Error("write failed: " + path);
}

}  // namespace

std::string report_json(const Report& r) {
    ojson j;
    j["schema_version"] = kReportSchemaVersion;
    j["experiment"] = r.config.experiment;
    j["config_hash"] = r.config.hash();
    j["config_text"] = r.config.to_text(false);
    j["pass"] = r.pass();
    j["memory_estimate_mb"] = r.memory_estimate_mb;
    if (!r.config.deterministic) {
        j["elapsed_s"] = r.elapsed_s;
        j["peak_rss_mb"] = r.peak_rss_mb;
    }
    ojson crit = ojson::array();
    for (const auto& c : r.criteria)
        crit.push_back({{"id", c.id}, {"description", c.description}, {"pass", c.pass}, {"detail", c.detail}});
    j["criteria"] = crit;
    ojson fits = ojson::array();
    for (size_t k = 0; k < r.fits.size(); ++k) fits.push_back(fit_json(r.fits[k], r.fit_p[k]));
    j["fits"] = fits;
    ojson tables = ojson::object();
    for (const auto& t : r.tables) {
        ojson rows = ojson::array();
        for (const auto& row : t.rows) {
            ojson jr = ojson::array();
            for (const auto& c : row) jr.push_back(cell_json(c));
            rows.push_back(jr);
        }
        tables[t.name] = {{"columns", t.columns}, {"rows", rows}};
    }
    j["tables"] = tables;
    return j.dump(1) + "\n";
}

std::string report_markdown(const Report& r) {
    std::string s = "# " + r.config.experiment + "\n\n";
    s += "config hash `" + r.config.hash() + "`, schema " + std::to_string(kReportSchemaVersion) + ", overall " +
         (r.pass() ? "PASS" : "FAIL") + "\n\n";
    s += "## Criteria\n\n" + table_md(criteria_table(r), 1000) + "\n";
    s += "## Exponent fits\n\n" + table_md(fit_summary(r), 1000) + "\n";
    s += "## Measured against predicted\n\n" + table_md(fit_rows(r), 1000) + "\n";
    for (const auto& t : r.tables) s += "## " + t.name + "\n\n" + table_md(t, 64) + "\n";
    return s;
}

std::vector<std::string> emit(const Report& r, const std::string& format, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir + ": " + ec.message());
    std::vector<std::string> paths;
    auto put = [&](const std::string& name, const std::string& data) {
        std::string path = (std::filesystem::path(dir) / name).string();
        write_file(path, data);
        paths.push_back(path);
    };
    if (format == "json") {
        put("report.json", report_json(r));
    } else if (format == "md") {
        put("report.md", report_markdown(r));
    } else if (format == "csv") {
        put("criteria.csv", table_csv(criteria_table(r)));
        put("fits.csv", table_csv(fit_summary(r)));
        for (const auto& t : r.tables) put(t.name + ".csv", table_csv(t));
    } else {
        throw Error("unknown output format: " + format);
    }
    return paths;
}

std::string acceptance_lines(const Report& r) {
    std::string s;
    for (const auto& c : r.criteria) {
        s += std::string(c.pass ? "PASS " : "FAIL ") + c.id + ": " + c.description;
        if (!c.detail.empty()) s += " (" + c.detail + ")";
        s += "\n";
    }
    return s;
}

}  // namespace parasq
