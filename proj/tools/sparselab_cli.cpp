#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "sparselab/experiments.hpp"
#include "sparselab/io.hpp"
#include "sparselab/random.hpp"

using namespace sparselab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kExpect = 1, kConfig = 2, kAbort = 3 };

const char* kColumnsHelp = R"(Output files (floats use 12 significant digits):
  verify-basis      axioms.json
  weights           weights.csv        weight,quantity,param,value,extremal_ball
  sparse-dominate   run_<k>.json, summary.json
                    summary.csv        run,pointwise_constant,normalized,cT,s1_size,s2_size,s1_ok,s2_ok,fkfk_ok,tree_size,gamma_raises
  experiment        <name>.csv per block, <name>.svg when "svg": true
    decay           t,P,trials                     + "# fit gamma= beta= r2= points= excluded_atoms="
    mixed-weak      trial,lhs,rhs,ratio            + "# w_a1= v_ainf= certified= ratio_max="
    cf-ratio        p,weight,trial,ratio           + "# p= ratio_max=" per p and overall
    sharpness       param,characteristic,classical,norm_lower_bound,normalized,n1
                                                   + "# slope= classical_slope= target_exponent= buckley_exponent= normalized_max="
    n-factors       param,n1,w_factor,sigma_part,tau,n2
    fk-probe        curve,x,value (curve = tail | osc) + "# bound_sup= p0="
  every command     manifest.json (config digest, seed, outputs with digests, wall time, version)
Exit codes: 0 success, 1 expectation failure, 2 config error, 3 construction abort.
Output directory: --out, else $SPARSELAB_OUT_DIR, else "output_dir" in the config, else ./sparselab_out.)";

const std::vector<std::string> kTopKeys = {"description", "seed", "threads", "output_dir", "basis", "operator", "commutator",
                                           "expect", "weights", "sparse", "experiments"};

struct Ctx {
    json cfg;
    fs::path out;
    std::uint64_t seed = 1;
    int threads = 1;
    std::vector<std::string> outputs;
    std::map<std::string, std::string> digests;
    int code = kOk;

    void emit(const std::string& name, const std::string& content) {
        write_atomic(out / name, content);
        if (std::find(outputs.begin(), outputs.end(), name) == outputs.end()) outputs.push_back(name);
        digests[name] = digest_bytes(content);
    }
    void fail(int c) { code = std::max(code, c); }
};

double jnum(const json& j, const char* key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) throw ConfigError(std::string(key) + ": expected a number");
    return j[key].get<double>();
}

template <class T>
T jget(const json& j, const char* key, const T& dflt) {
    if (!j.contains(key)) return dflt;
    try {
        return j[key].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

const json& need(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
    return j[key];
}

BallBasis basis_of(const Ctx& c) { return basis_from_config(need(c.cfg, "basis", "config")); }

OperatorSpec op_spec_of(const json& j) {
    try {
        return operator_from_json(j);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("operator: ") + e.what());
    }
}

std::optional<CommutatorData> commutator_of(const json& j, const DiscreteSpace& sp, int m) {
    if (j.is_null()) return std::nullopt;
    check_keys(j, {"symbols", "alpha"}, "commutator");
    CommutatorData d;
    for (const auto& s : need(j, "symbols", "commutator")) d.symbols.push_back(symbol_from_json(s, sp));
    d.alpha = jget<std::vector<int>>(j, "alpha", {});
    if (static_cast<int>(d.symbols.size()) != m || static_cast<int>(d.alpha.size()) != m)
        throw ConfigError("commutator: need one symbol and one alpha entry per operator slot");
    return d;
}

std::vector<GridFunction> inputs(const DiscreteSpace& sp, Recipe rec, std::uint64_t seed, int run, int m) {
    std::vector<GridFunction> fs;
    for (int i = 0; i < m; ++i) fs.push_back(corpus_function(rec, sp, seed, static_cast<std::uint64_t>(run) * 16 + static_cast<std::uint64_t>(i)));
    return fs;
}

std::string b01(bool b) { return b ? "1" : "0"; }

// ---- verify-basis

int cmd_verify_basis(Ctx& c) {
    BallBasis basis = basis_of(c);
    const json expect = c.cfg.value("expect", json::object());
    check_keys(expect, {"b1", "b2", "b3", "b4", "all_pass", "effective_c0_max"}, "expect");
    AxiomReport rep = verify_axioms(basis);
    json j;
    j["b1_pass"] = rep.b1_pass;
    j["b2_pass"] = rep.b2_pass;
    j["b3_pass"] = rep.b3_pass;
    j["b4_pass"] = rep.b4_pass;
    j["all_pass"] = rep.all_pass();
    j["effective_c0"] = rep.effective_c0;
    j["claimed_c0"] = basis.c0;
    j["balls"] = basis.size();
    json wb = json::array();
    for (int id : rep.witness_balls) {
        const Ball& b = basis.ball(id);
        wb.push_back({{"id", id}, {"lo", b.lo}, {"hi", b.hi}, {"measure", b.measure}});
    }
    j["witness"] = {{"balls", wb}, {"atoms", rep.witness_atoms}, {"note", rep.witness_note}};
    std::vector<std::string> mismatches;
    auto want = [&](const char* key, bool got) {
        if (expect.contains(key) && expect[key].get<bool>() != got) mismatches.push_back(key);
    };
    want("b1", rep.b1_pass);
    want("b2", rep.b2_pass);
    want("b3", rep.b3_pass);
    want("b4", rep.b4_pass);
    want("all_pass", rep.all_pass());
    if (expect.contains("effective_c0_max") && rep.effective_c0 > expect["effective_c0_max"].get<double>() * (1 + 1e-12))
        mismatches.push_back("effective_c0_max");
    j["expectation_mismatches"] = mismatches;
    c.emit("axioms.json", j.dump(2) + "\n");
    for (const auto& m : mismatches) std::cerr << "expectation mismatch: " << m << '\n';
    if (!mismatches.empty()) c.fail(kExpect);
    return c.code;
}

// ---- weights

int cmd_weights(Ctx& c) {
    BallBasis basis = basis_of(c);
    const json& wj = need(c.cfg, "weights", "config");
    check_keys(wj, {"items", "p", "rh_s", "expect"}, "weights");
    const json expect = wj.value("expect", json::object());
    check_keys(expect, {"ap_max", "rh_max"}, "weights.expect");
    auto ps = jget<std::vector<double>>(wj, "p", {1.0, 2.0});
    auto ss = jget<std::vector<double>>(wj, "rh_s", {});
    std::ostringstream os;
    os << "weight,quantity,param,value,extremal_ball\n";
    bool ok = true;
    int k = 0;
    for (const auto& item : need(wj, "items", "weights")) {
        const std::string name = item.value("name", "w" + std::to_string(k));
        WeightRecord w(weight_from_json(item, basis));
        for (double p : ps) {
            auto r = ap_constant(w, p, basis);
            os << name << ",ap," << fmt12(p) << ',' << fmt12(r.constant) << ',' << r.extremal_ball << '\n';
            if (expect.contains("ap_max") && !(r.constant <= expect["ap_max"].get<double>())) ok = false;
        }
        for (double s : ss) {
            double v = rh_constant(w, s, basis);
            os << name << ",rh," << fmt12(s) << ',' << fmt12(v) << ",-1\n";
            if (expect.contains("rh_max") && !(v <= expect["rh_max"].get<double>())) ok = false;
        }
        auto a = ainf_constants(w, basis);
        os << name << ",ainf_exp_log,," << fmt12(a.exp_log) << ",-1\n";
        os << name << ",ainf_fujii,," << fmt12(a.fujii) << ",-1\n";
        ++k;
    }
    c.emit("weights.csv", os.str());
    if (!ok) c.fail(kExpect);
    return c.code;
}

// ---- sparse-dominate

int cmd_sparse_dominate(Ctx& c) {
    BallBasis basis = basis_of(c);
    Operator op(op_spec_of(need(c.cfg, "operator", "config")), basis);
    const json& sj = need(c.cfg, "sparse", "config");
    check_keys(sj, {"count", "recipe", "ball", "lambda", "ceiling", "constant_max", "samples", "max_gamma_raises", "write_runs"}, "sparse");
    const int count = jget<int>(sj, "count", 1);
    Recipe rec;
    try {
        rec = recipe_from_string(jget<std::string>(sj, "recipe", "mixed"));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("sparse.recipe: ") + e.what());
    }
    const int b0 = jget<int>(sj, "ball", -1) < 0 ? basis.root : jget<int>(sj, "ball", -1);
    if (b0 < 0 || b0 >= basis.size()) throw ConfigError("sparse.ball: no such ball (the basis may lack a root)");
    auto comm = commutator_of(c.cfg.value("commutator", json()), basis.space, op.arity());
    const bool write_runs = jget<bool>(sj, "write_runs", true);

    SamplingOptions so;
    so.seed = c.seed;
    so.threads = c.threads;
    so.n_samples = jget<int>(sj, "samples", 16);
    OperatorConstants k = estimate_constants(op, so);
    DominationOptions o;
    o.lambda = jnum(sj, "lambda", 0.0);
    o.cT = std::max(k.total(), 1e-12);
    o.sampling = so;
    o.max_gamma_raises = jget<int>(sj, "max_gamma_raises", 20);
    o.gamma_norm = estimate_gamma_norm(op, o.cT, so);

    std::ostringstream csv;
    csv << "run,pointwise_constant,normalized,cT,s1_size,s2_size,s1_ok,s2_ok,fkfk_ok,tree_size,gamma_raises\n";
    double worst = 0.0;
    bool all_sparse = true, all_fkfk = true;
    int aborted = 0;
    json runs = json::array();
    for (int run = 0; run < count; ++run) {
        auto fs = inputs(basis.space, rec, c.seed, run, op.arity());
        DominationResult r = construct_domination(op, fs, b0, o);
        if (r.aborted) {
            ++aborted;
            std::cerr << "run " << run << " aborted: " << r.abort_reason << '\n';
            runs.push_back({{"run", run}, {"aborted", true}, {"abort_reason", r.abort_reason}});
            if (write_runs) c.emit("run_" + std::to_string(run) + ".json", to_json(basis, r).dump(1) + "\n");
            continue;
        }
        if (comm) verify_pointwise_domination(op, fs, b0, r, &*comm);
        worst = std::max(worst, r.pointwise_constant);
        all_sparse = all_sparse && r.s1_ok && r.s2_ok;
        all_fkfk = all_fkfk && r.fkfk_ok;
        csv << run << ',' << fmt12(r.pointwise_constant) << ',' << fmt12(r.pointwise_constant / r.cT) << ',' << fmt12(r.cT) << ',' << r.s1.size()
            << ',' << r.s2.size() << ',' << b01(r.s1_ok) << ',' << b01(r.s2_ok) << ',' << b01(r.fkfk_ok) << ',' << r.tree_size << ','
            << r.gamma_raises << '\n';
        if (write_runs) c.emit("run_" + std::to_string(run) + ".json", to_json(basis, r).dump(1) + "\n");
    }
    json summary = {{"operator", op.spec().name()},
                    {"runs", count},
                    {"aborted", aborted},
                    {"c1", k.c1},
                    {"c2", k.c2},
                    {"weak_norm", k.weak_norm},
                    {"cT", o.cT},
                    {"gamma_norm", o.gamma_norm},
                    {"max_constant", std::isfinite(worst) ? json(worst) : json("inf")},
                    {"max_normalized", std::isfinite(worst) ? json(worst / o.cT) : json("inf")},
                    {"sparse_verified", all_sparse},
                    {"fkfk_verified", all_fkfk}};
    bool ok = all_sparse && all_fkfk && std::isfinite(worst);
    if (sj.contains("ceiling") && !(worst / o.cT <= sj["ceiling"].get<double>())) ok = false;
    if (sj.contains("constant_max") && !(worst <= sj["constant_max"].get<double>())) ok = false;
    summary["expectations_met"] = ok && aborted == 0;
    c.emit("summary.csv", csv.str());
    c.emit("summary.json", summary.dump(2) + "\n");
    if (aborted > 0) c.fail(kAbort);
    else if (!ok) c.fail(kExpect);
    return c.code;
}

// ---- experiment blocks

const std::map<std::string, std::vector<std::string>> kBlockKeys = {
    {"decay", {"trials", "t_min", "t_max", "t_step", "ball", "commutator"}},
    {"mixed-weak", {"w", "v", "trials", "cert_cap"}},
    {"cf-ratio", {"p", "weights", "trials", "ball", "commutator"}},
    {"sharpness", {"family", "params", "p", "r", "form", "atom", "trials", "n_factors"}},
    {"n-factors", {"family", "params", "p", "r", "trials"}},
    {"fk-probe", {"family", "p", "p0", "weight", "x0", "a_grid", "r_grid"}},
};
const std::map<std::string, std::vector<std::string>> kExpectKeys = {
    {"decay", {"beta_min", "beta_max", "r2_min", "gamma_min"}},
    {"mixed-weak", {"ratio_max", "certified"}},
    {"cf-ratio", {"ratio_max"}},
    {"sharpness", {"slope_min", "slope_max", "classical_slope_min", "classical_slope_max", "normalized_max"}},
    {"n-factors", {"n1_max"}},
    {"fk-probe", {"osc_last_max", "tail_last_max", "osc_decrease_min", "osc_decrease_max"}},
};

void validate_block(const json& b, size_t idx) {
    const std::string where = "experiments[" + std::to_string(idx) + "]";
    if (!b.is_object() || !b.contains("type") || !b["type"].is_string()) throw ConfigError(where + ": needs a string 'type'");
    auto it = kBlockKeys.find(b["type"].get<std::string>());
    if (it == kBlockKeys.end()) throw ConfigError(where + ": unknown type '" + b["type"].get<std::string>() + "'");
    auto keys = it->second;
    for (const char* k : {"type", "name", "svg", "expect", "operator"}) keys.push_back(k);
    check_keys(b, keys, where);
    if (b.contains("expect")) check_keys(b["expect"], kExpectKeys.at(it->first), where + ".expect");
}

struct Block {
    Ctx& c;
    const json& j;
    const BallBasis& basis;
    std::string name;
    std::uint64_t seed;
    bool svg;
    json expect;
    std::vector<std::string> failures;

    void check_max(const char* key, double v) {
        if (expect.contains(key) && !(v <= expect[key].get<double>())) failures.push_back(std::string(key) + " (got " + fmt12(v) + ")");
    }
    void check_min(const char* key, double v) {
        if (expect.contains(key) && !(v >= expect[key].get<double>())) failures.push_back(std::string(key) + " (got " + fmt12(v) + ")");
    }
    OperatorSpec spec() const {
        if (j.contains("operator")) return op_spec_of(j["operator"]);
        return op_spec_of(need(c.cfg, "operator", "config"));
    }
    std::string csv_name() const { return name + ".csv"; }
    void plot(const PlotSpec& p) {
        if (svg) c.emit(name + ".svg", svg_plot(p));
    }
};

std::vector<double> grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("grid: need t_min <= t_max and t_step > 0");
    std::vector<double> g;
    for (int k = 0;; ++k) {
        double t = lo + k * step;
        if (t > hi + 1e-9 * step) break;
        g.push_back(t);
    }
    return g;
}

void run_decay(Block& b) {
    Operator op(b.spec(), b.basis);
    auto comm = commutator_of(b.j.value("commutator", json()), b.basis.space, op.arity());
    int ball = jget<int>(b.j, "ball", -1);
    if (ball < 0) ball = b.basis.root;
    if (ball < 0 || ball >= b.basis.size()) throw ConfigError("decay: no such ball");
    auto tg = grid(jnum(b.j, "t_min", 1.0), jnum(b.j, "t_max", 15.0), jnum(b.j, "t_step", 0.5));
    DecayCurve cv = decay_experiment(op, ball, jget<int>(b.j, "trials", 200), tg, b.seed, comm ? &*comm : nullptr, b.c.threads);
    b.c.emit(b.csv_name(), to_csv(cv));
    b.plot({"exceedance fraction", "t", "P", false, true, {{"P(t)", cv.t_grid, cv.p_of_t, false}}});
    b.check_min("beta_min", cv.fit.beta);
    b.check_max("beta_max", cv.fit.beta);
    b.check_min("r2_min", cv.fit.r2);
    b.check_min("gamma_min", cv.fit.gamma);
}

void run_mixed_weak(Block& b) {
    Operator op(b.spec(), b.basis);
    WeightRecord w(weight_from_json(need(b.j, "w", "mixed-weak"), b.basis));
    WeightRecord v(weight_from_json(need(b.j, "v", "mixed-weak"), b.basis));
    const int trials = jget<int>(b.j, "trials", 50);
    std::ostringstream os;
    os << "trial,lhs,rhs,ratio\n";
    double mx = 0.0;
    MixedWeakReport last;
    std::vector<double> xs, ys;
    for (int t = 0; t < trials; ++t) {
        last = mixed_weak_experiment(op, w, v, inputs(b.basis.space, Recipe::mixed, b.seed, t, op.arity()), jnum(b.j, "cert_cap", 1e6));
        mx = std::max(mx, last.ratio);
        os << t << ',' << fmt12(last.lhs) << ',' << fmt12(last.rhs) << ',' << fmt12(last.ratio) << '\n';
        xs.push_back(t);
        ys.push_back(last.ratio);
    }
    os << "# w_a1=" << fmt12(last.w_a1) << " v_ainf=" << fmt12(last.v_ainf) << " certified=" << b01(last.certified) << " ratio_max=" << fmt12(mx)
       << '\n';
    b.c.emit(b.csv_name(), os.str());
    b.plot({"mixed weak ratio", "trial", "lhs / rhs", false, false, {{"ratio", xs, ys, true}}});
    b.check_max("ratio_max", mx);
    if (b.expect.contains("certified") && b.expect["certified"].get<bool>() != last.certified) b.failures.push_back("certified");
}

void run_cf(Block& b) {
    Operator op(b.spec(), b.basis);
    auto comm = commutator_of(b.j.value("commutator", json()), b.basis.space, op.arity());
    auto ps = jget<std::vector<double>>(b.j, "p", {0.5, 1.0, 2.0});
    const int trials = jget<int>(b.j, "trials", 50);
    const int ball = jget<int>(b.j, "ball", -1);
    if (ball >= b.basis.size()) throw ConfigError("cf-ratio: no such ball");
    std::vector<std::pair<std::string, WeightRecord>> ws;
    int k = 0;
    for (const auto& wj : need(b.j, "weights", "cf-ratio")) {
        ws.emplace_back(wj.value("name", "w" + std::to_string(k)), WeightRecord(weight_from_json(wj, b.basis)));
        ++k;
    }
    std::ostringstream os, tail;
    os << "p,weight,trial,ratio\n";
    double overall = 0.0;
    PlotSpec plot{"Coifman-Fefferman ratio", "sample", "ratio", false, true, {}};
    for (double p : ps) {
        double mx = 0.0;
        Series s{"p=" + fmt12(p), {}, {}, true};
        for (int t = 0; t < trials; ++t) {
            auto fs = inputs(b.basis.space, Recipe::mixed, b.seed, t, op.arity());
            for (const auto& [wn, w] : ws) {
                double r = coifman_fefferman(op, fs, w, p, ball, comm ? &*comm : nullptr);
                mx = std::max(mx, r);
                os << fmt12(p) << ',' << wn << ',' << t << ',' << fmt12(r) << '\n';
                s.x.push_back(static_cast<double>(s.x.size()));
                s.y.push_back(r);
            }
        }
        tail << "# p=" << fmt12(p) << " ratio_max=" << fmt12(mx) << '\n';
        overall = std::max(overall, mx);
        plot.series.push_back(std::move(s));
    }
    tail << "# ratio_max=" << fmt12(overall) << '\n';
    b.c.emit(b.csv_name(), os.str() + tail.str());
    b.plot(plot);
    b.check_max("ratio_max", overall);
}

WeightFamily family_of(const json& fj, const BallBasis& basis, const std::vector<double>& ps, double r) {
    check_keys(fj, {"kind", "x0"}, "family");
    const std::string kind = jget<std::string>(fj, "kind", "shell_power");
    const double x0 = jnum(fj, "x0", 0.5);
    if (kind != "shell_power" && kind != "power") throw ConfigError("family: unknown kind '" + kind + "'");
    if (kind == "shell_power" && basis.space.size() != basis.depth + 1) throw ConfigError("family shell_power needs a refined_dyadic basis");
    const BallBasis* bp = &basis;
    return [=](double a) {
        WeightRecord w(kind == "power" ? power_weight(bp->space, a, x0) : shell_power_weight(*bp, a));
        return MultiWeight(std::vector<WeightRecord>(ps.size(), w), ps, std::vector<double>(ps.size(), r));
    };
}

void run_sharpness(Block& b) {
    auto ps = jget<std::vector<double>>(b.j, "p", {2.0});
    const double r = jnum(b.j, "r", 1.0);
    const int m = static_cast<int>(ps.size());
    auto params = jget<std::vector<double>>(b.j, "params", {});
    WeightFamily fam = family_of(need(b.j, "family", "sharpness"), b.basis, ps, r);
    const std::string form = jget<std::string>(b.j, "form", "operator");
    ScanOptions so;
    so.trials = jget<int>(b.j, "trials", 16);
    so.seed = b.seed;
    so.threads = b.c.threads;
    so.with_n_factors = jget<bool>(b.j, "n_factors", false);
    MultiOperator mop;
    std::optional<Operator> op;
    SparseFamily chain;
    if (form == "operator") {
        op.emplace(b.spec(), b.basis);
        if (op->arity() != m) throw ConfigError("sharpness: operator arity differs from the length of p");
        mop = [&](const std::vector<GridFunction>& fs) { return op->apply(fs); };
    } else if (form == "sparse_chain") {
        int atom = jget<int>(b.j, "atom", 0);
        if (atom < 0 || atom >= b.basis.space.size()) throw ConfigError("sharpness: atom out of range");
        chain = carve_cores(b.basis, b.basis.containing(atom));
        std::vector<double> rs(static_cast<size_t>(m), r);
        mop = [&, rs](const std::vector<GridFunction>& fs) { return eval_sparse(b.basis, fs, chain, rs); };
    } else {
        throw ConfigError("sharpness: unknown form '" + form + "'");
    }
    SharpnessScan sc;
    try {
        sc = sharpness_scan(mop, m, r, fam, params, b.basis, so);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("sharpness: ") + e.what());
    }
    b.c.emit(b.csv_name(), to_csv(sc));
    b.plot({"norm vs characteristic", "characteristic", "norm lower bound", true, true, {{"estimates", sc.characteristic, sc.norm_estimates, true}}});
    b.check_min("slope_min", sc.slope);
    b.check_max("slope_max", sc.slope);
    b.check_min("classical_slope_min", sc.classical_slope);
    b.check_max("classical_slope_max", sc.classical_slope);
    b.check_max("normalized_max", sc.normalized_max);
}

void run_n_factors(Block& b) {
    auto ps = jget<std::vector<double>>(b.j, "p", {2.0, 2.0});
    const double r = jnum(b.j, "r", 1.0);
    auto params = jget<std::vector<double>>(b.j, "params", {});
    if (params.empty()) throw ConfigError("n-factors: params must be nonempty");
    WeightFamily fam = family_of(need(b.j, "family", "n-factors"), b.basis, ps, r);
    const int trials = jget<int>(b.j, "trials", 16);
    std::ostringstream os;
    os << "param,n1,w_factor,sigma_part,tau,n2\n";
    double mx = 0.0;
    std::vector<double> n1s;
    for (double a : params) {
        NFactors nf;
        try {
            nf = n_factors(fam(a), b.basis, trials, b.seed);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("n-factors: ") + e.what());
        }
        mx = std::max(mx, nf.n1);
        n1s.push_back(nf.n1);
        for (const auto& [tau, v] : nf.n2) {
            std::string t;
            for (int i : tau) t += (t.empty() ? "" : "+") + std::to_string(i);
            os << fmt12(a) << ',' << fmt12(nf.n1) << ',' << fmt12(nf.w_factor) << ',' << fmt12(nf.sigma_part) << ',' << (t.empty() ? "none" : t) << ','
               << fmt12(v) << '\n';
        }
    }
    b.c.emit(b.csv_name(), os.str());
    b.plot({"N1 along the family", "param", "N1", false, true, {{"N1", params, n1s, false}}});
    b.check_max("n1_max", mx);
}

void run_fk(Block& b) {
    const auto& sp = b.basis.space;
    const int n = sp.size();
    const int nx = sp.shape[0];
    const json& fj = need(b.j, "family", "fk-probe");
    const std::string kind = jget<std::string>(fj, "kind", "bump");
    std::vector<GridFunction> fam;
    if (kind == "bump") {
        check_keys(fj, {"kind", "center", "radius"}, "family");
        const double c = jnum(fj, "center", 0.5), rad = jnum(fj, "radius", 0.2);
        GridFunction f(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            double x = (i % nx + 0.5) / nx - c;
            if (std::abs(x) < rad) f[static_cast<size_t>(i)] = std::exp(-1.0 / (1.0 - x * x / (rad * rad)));
        }
        fam.push_back(std::move(f));
    } else if (kind == "commutator") {
        check_keys(fj, {"kind", "symbol", "count", "p1"}, "family");
        Operator op(b.spec(), b.basis);
        if (op.arity() != 1) throw ConfigError("fk-probe: commutator family needs a linear operator");
        CommutatorSpec cs{op.spec(), {symbol_from_json(need(fj, "symbol", "family"), sp)}, {1}};
        const double p1 = jnum(fj, "p1", 2.0);
        const int count = jget<int>(fj, "count", 20);
        for (int s = 0; s < count; ++s) {
            auto f = corpus_function(Recipe::mixed, sp, b.seed, static_cast<std::uint64_t>(s));
            double nn = lp_norm(sp, f, p1);
            if (nn > 0.0)
                for (auto& v : f) v /= nn;
            fam.push_back(op.apply_commutator(cs, {f}));
        }
    } else {
        throw ConfigError("fk-probe: unknown family kind '" + kind + "'");
    }
    WeightRecord w(b.j.contains("weight") ? weight_from_json(b.j["weight"], b.basis) : GridFunction(static_cast<size_t>(n), 1.0));
    const double x0 = jnum(b.j, "x0", 0.5);
    const int x0_atom = std::clamp(static_cast<int>(std::floor(x0 * nx)), 0, nx - 1);
    auto ag = jget<std::vector<double>>(b.j, "a_grid", {0.05, 0.1, 0.2, 0.3, 0.4});
    auto rg = jget<std::vector<double>>(b.j, "r_grid", {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1});
    FKReport rep;
    try {
        rep = fk_probe(sp, fam, jnum(b.j, "p", 2.0), w, x0_atom, ag, rg, jnum(b.j, "p0", 2.0));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("fk-probe: ") + e.what());
    }
    b.c.emit(b.csv_name(), to_csv(rep));
    b.plot({"compactness probe", "A or r", "sup norm", true, true,
            {{"tail vs A", rep.a_grid, rep.tail_curve, false}, {"osc vs r", rep.r_grid, rep.osc_curve, false}}});
    if (!rep.osc_curve.empty()) {
        // r_grid ascending: first entry is the finest radius
        double fine = rep.osc_curve.front(), coarse = rep.osc_curve.back();
        b.check_max("osc_last_max", fine);
        double dec = fine > 0.0 ? coarse / fine : INFINITY;
        b.check_min("osc_decrease_min", dec);
        b.check_max("osc_decrease_max", dec);
    }
    if (!rep.tail_curve.empty()) b.check_max("tail_last_max", rep.tail_curve.back());
}

int cmd_experiment(Ctx& c) {
    const json ex = c.cfg.value("experiments", json::array());
    if (!ex.is_array()) throw ConfigError("experiments: expected a list");
    for (size_t i = 0; i < ex.size(); ++i) validate_block(ex[i], i);
    std::optional<BallBasis> basis;
    if (!ex.empty()) basis.emplace(basis_of(c));
    std::set<std::string> names;
    for (size_t i = 0; i < ex.size(); ++i) {
        const json& bj = ex[i];
        const std::string type = bj["type"].get<std::string>();
        std::string name = bj.value("name", type + "_" + std::to_string(i));
        if (!names.insert(name).second) throw ConfigError("experiments: duplicate block name '" + name + "'");
        Block b{c, bj, *basis, name, derive_seed(c.seed, i), bj.value("svg", false), bj.value("expect", json::object()), {}};
        try {
            if (type == "decay") run_decay(b);
            else if (type == "mixed-weak") run_mixed_weak(b);
            else if (type == "cf-ratio") run_cf(b);
            else if (type == "sharpness") run_sharpness(b);
            else if (type == "n-factors") run_n_factors(b);
            else run_fk(b);
        } catch (const ConfigError& e) {
            std::cerr << name << ": config error: " << e.what() << '\n';
            c.fail(kConfig);
            continue;
        } catch (const std::exception& e) {
            std::cerr << name << ": aborted: " << e.what() << '\n';
            c.fail(kAbort);
            continue;
        }
        for (const auto& f : b.failures) std::cerr << name << ": expectation failed: " << f << '\n';
        if (!b.failures.empty()) c.fail(kExpect);
    }
    return c.code;
}

int dispatch(const std::string& cmd, Ctx& c) {
    if (cmd == "verify-basis") return cmd_verify_basis(c);
    if (cmd == "weights") return cmd_weights(c);
    if (cmd == "sparse-dominate") return cmd_sparse_dominate(c);
    return cmd_experiment(c);
}

struct Flags {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    int threads = 0;
};

fs::path out_dir(const Flags& f, const json& cfg) {
    if (!f.out.empty()) return f.out;
    if (const char* e = std::getenv("SPARSELAB_OUT_DIR"); e && *e) return e;
    if (cfg.contains("output_dir")) return cfg["output_dir"].get<std::string>();
    return "sparselab_out";
}

int run_command(const std::string& cmd, json cfg, const Flags& f, RunManifest* out_manifest = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    check_keys(cfg, kTopKeys, "config");
    Ctx c;
    c.seed = f.seed ? *f.seed : jget<std::uint64_t>(cfg, "seed", 1);
    c.threads = f.threads > 0 ? f.threads : jget<int>(cfg, "threads", 1);
    if (c.threads < 1) throw ConfigError("threads must be positive");
    c.out = out_dir(f, cfg);
    cfg["seed"] = c.seed;
    c.cfg = cfg;
    int code;
    try {
        code = dispatch(cmd, c);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    RunManifest m;
    m.command = cmd;
    m.config = cfg;
    m.config_digest = digest(cfg);
    m.seed = c.seed;
    m.outputs = c.outputs;
    m.output_digests = c.digests;
    m.exit_code = code;
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_atomic(c.out / "manifest.json", m.to_json().dump(2) + "\n");
    if (out_manifest) *out_manifest = m;
    return code;
}

int cmd_replay(const Flags& f) {
    RunManifest old = RunManifest::from_json(load_json(f.config));
    Flags g = f;
    if (g.out.empty()) g.out = (fs::path(f.config).parent_path() / "replay").string();
    g.seed = old.seed;
    RunManifest now;
    run_command(old.command, old.config, g, &now);
    int mismatches = 0;
    for (const auto& [name, d] : old.output_digests) {
        auto it = now.output_digests.find(name);
        if (it == now.output_digests.end() || it->second != d) {
            std::cerr << "replay mismatch: " << name << '\n';
            ++mismatches;
        }
    }
    for (const auto& [name, d] : now.output_digests)
        if (!old.output_digests.count(name)) {
            std::cerr << "replay produced an unexpected file: " << name << '\n';
            ++mismatches;
        }
    std::cout << "replayed " << old.command << ": " << old.output_digests.size() << " outputs, " << mismatches << " mismatches\n";
    return mismatches == 0 ? kOk : kExpect;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparselab: ball-basis verification, sparse domination and weighted experiments"};
    app.footer(kColumnsHelp);
    app.require_subcommand(1);
    Flags f;
    std::uint64_t seed = 0;
    std::vector<CLI::App*> subs;
    for (const char* name : {"verify-basis", "weights", "sparse-dominate", "experiment", "replay"}) {
        auto* s = app.add_subcommand(name, name == std::string("replay") ? "re-run a manifest and compare output digests" : std::string("run ") + name);
        s->add_option("--config", f.config, name == std::string("replay") ? "manifest.json of an earlier run" : "JSON config file")->required();
        s->add_option("--out", f.out, "output directory");
        s->add_option("--seed", seed, "seed, overrides the config");
        s->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
        subs.push_back(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }
    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed") > 0) f.seed = seed;
    const std::string cmd = chosen->get_name();
    try {
        if (cmd == "replay") return cmd_replay(f);
        return run_command(cmd, load_json(f.config), f);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "aborted: " << e.what() << '\n';
        return kAbort;
    }
}
