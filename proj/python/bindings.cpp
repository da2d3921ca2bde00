#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparselab/experiments.hpp"
#include "sparselab/io.hpp"
#include "sparselab/random.hpp"

namespace py = pybind11;
using namespace sparselab;

namespace {

BallBasis dyadic(int depth, std::vector<double> masses) {
    if (masses.empty()) masses.assign(static_cast<size_t>(1) << depth, 1.0 / (1 << depth));
    return build_dyadic_basis(depth, masses);
}

py::dict axioms(const BallBasis& b) {
    AxiomReport r = verify_axioms(b);
    py::dict d;
    d["b1"] = r.b1_pass;
    d["b2"] = r.b2_pass;
    d["b3"] = r.b3_pass;
    d["b4"] = r.b4_pass;
    d["all_pass"] = r.all_pass();
    d["effective_c0"] = r.effective_c0;
    d["witness_balls"] = r.witness_balls;
    d["witness_note"] = r.witness_note;
    return d;
}

py::dict dominate(const std::string& tag, const BallBasis& b, const std::vector<GridFunction>& fs, int samples, std::uint64_t seed) {
    Operator op(operator_from_json({{"tag", tag}}), b);
    DominationOptions o;
    o.sampling.n_samples = samples;
    o.sampling.seed = seed;
    DominationResult r = construct_domination(op, fs, b.root, o);
    py::dict d;
    d["aborted"] = r.aborted;
    d["abort_reason"] = r.abort_reason;
    d["pointwise_constant"] = r.pointwise_constant;
    d["cT"] = r.cT;
    d["s1_size"] = r.s1.size();
    d["s2_size"] = r.s2.size();
    d["s1_ok"] = r.s1_ok;
    d["s2_ok"] = r.s2_ok;
    d["fkfk_ok"] = r.fkfk_ok;
    return d;
}

}  // namespace

PYBIND11_MODULE(_sparselab, m) {
    m.doc() = "ball-basis harmonic analysis at desk scale";
    m.attr("__version__") = kVersion;

    py::class_<BallBasis>(m, "BallBasis")
        .def_property_readonly("size", &BallBasis::size)
        .def_property_readonly("atoms", [](const BallBasis& b) { return b.space.size(); })
        .def_property_readonly("root", [](const BallBasis& b) { return b.root; })
        .def_readonly("c0", &BallBasis::c0)
        .def("containing", &BallBasis::containing)
        .def("coords", [](const BallBasis& b) {
            std::vector<double> x(static_cast<size_t>(b.space.size()));
            for (int i = 0; i < b.space.size(); ++i) x[static_cast<size_t>(i)] = b.space.coord(i);
            return x;
        });

    m.def("dyadic_basis", &dyadic, py::arg("depth"), py::arg("masses") = std::vector<double>{});
    m.def("interval_basis", &build_interval_basis, py::arg("n"), py::arg("masses"), py::arg("kappa"));
    m.def("rect2d_candidate", &build_rect2d_candidate, py::arg("n"));
    m.def("verify_axioms", &axioms);

    m.def("maximal", &maximal, py::arg("basis"), py::arg("f"), py::arg("r") = 1.0);
    m.def("weak_norm", &weak_norm, py::arg("g"), py::arg("p"), py::arg("masses"));
    m.def("variation_norm", &variation_norm, py::arg("a"), py::arg("q"));
    m.def("corpus_function", [](const BallBasis& b, const std::string& recipe, std::uint64_t seed, std::uint64_t index) {
        return corpus_function(recipe_from_string(recipe), b.space, seed, index);
    });

    m.def("ap_constant", [](const BallBasis& b, const GridFunction& w, double p) { return ap_constant(WeightRecord(w), p, b).constant; });
    m.def("rh_constant", [](const BallBasis& b, const GridFunction& w, double s) { return rh_constant(WeightRecord(w), s, b); });
    m.def("ainf_constants", [](const BallBasis& b, const GridFunction& w) {
        auto a = ainf_constants(WeightRecord(w), b);
        return py::make_tuple(a.exp_log, a.fujii);
    });
    m.def("rubio_de_francia", [](const BallBasis& b, const GridFunction& h, double s) {
        auto r = rubio_de_francia(h, s, b);
        py::dict d;
        d["rh"] = r.rh;
        d["pass"] = r.pass;
        d["norm_ratio"] = r.norm_ratio;
        d["a1_constant"] = r.a1_constant;
        return d;
    });

    m.def("apply", [](const std::string& tag, const BallBasis& b, const std::vector<GridFunction>& fs) {
        return Operator(operator_from_json({{"tag", tag}}), b).apply(fs);
    });
    m.def("dominate", &dominate, py::arg("tag"), py::arg("basis"), py::arg("fs"), py::arg("samples") = 8, py::arg("seed") = 1);
    m.def("fit_stretched_exponential", [](const std::vector<double>& t, const std::vector<double>& p) {
        auto f = fit_stretched_exponential(t, p);
        return py::make_tuple(f.gamma, f.beta, f.r2);
    });
}
