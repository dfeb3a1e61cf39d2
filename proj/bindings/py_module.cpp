// Python surface for the core operations. Heavy lifting stays in q3r_core;
// this file is conversion glue only.
#include "q3r/errors.hpp"
#include "q3r/recovery.hpp"
#include "q3r/reweighting.hpp"
#include "q3r/spectral.hpp"
#include "q3r/truncation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace q3r;

namespace {

OptimizerConfig make_opt(double alpha, double beta1, double beta2, double delta,
                         double eta, double lambda, long period, double eps_floor,
                         double clip_norm) {
    OptimizerConfig cfg;
    cfg.alpha = alpha;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.delta = delta;
    cfg.eta = eta;
    cfg.lambda = lambda;
    cfg.period = period;
    cfg.eps_floor = eps_floor;
    cfg.clip_norm = clip_norm;
    cfg.validate();
    return cfg;
}

// One regularized tensor plus its optimizer state, stepped from python.
class AdamQ3R {
public:
    AdamQ3R(Matrix w0, Index r_target, const OptimizerConfig& cfg)
        : cfg_(cfg), p_(make_param("w", std::move(w0))) {
        if (r_target > 0)
            enable_q3r(p_, RankTarget::absolute(r_target), cfg_.eps_floor);
    }

    const Matrix& step(const Matrix& grad) {
        adamq3r_step({&p_}, {grad}, cfg_, t_);
        ++t_;
        return p_.w;
    }

    const Matrix& w() const { return p_.w; }
    long step_count() const { return t_; }
    double eps() const { return p_.op ? p_.op->eps() : 0.0; }
    Index rank_envelope() const { return p_.op ? p_.op->rank_envelope() : 0; }
    double penalty() const { return p_.op ? p_.op->q3r_value(p_.w) : 0.0; }

private:
    OptimizerConfig cfg_;
    ParamTensor p_;
    long t_ = 0;
};

} // namespace

PYBIND11_MODULE(_q3r, m) {
    m.doc() = "Quadratic reweighted rank regularizer: spectral surrogate, "
              "reweighting operator, AdamQ3R step, SVD truncation, recovery demo";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("f_eps", &f_eps, py::arg("sigma"), py::arg("eps"),
          "Smoothed spectral penalty of one singular value");
    m.def("F_eps", &F_eps, py::arg("w"), py::arg("eps"),
          "Smoothed rank surrogate of a matrix");
    m.def("grad_F_eps", &grad_F_eps_oracle, py::arg("w"), py::arg("eps"),
          "Exact gradient of F_eps");
    m.def(
        "svd_truncated",
        [](const Matrix& w, Index k) {
            const SvdResult r = svd_truncated(w, k);
            return py::make_tuple(r.u, r.s, r.v);
        },
        py::arg("w"), py::arg("k"), "Top-k singular triplets (u, s, v)");
    m.def("singular_values", &singular_values, py::arg("w"));
    m.def("tail_ratio", &tail_ratio, py::arg("w"), py::arg("r"),
          "Fraction of squared spectral energy in the top r singular values");
    m.def("rank_for_retention", &rank_for_retention, py::arg("d1"), py::arg("d2"),
          py::arg("retention"));
    m.def("truncate_matrix", &truncate_matrix, py::arg("w"), py::arg("r"),
          "Best rank-r approximation by truncated SVD");

    py::class_<SmoothingState>(m, "SmoothingState")
        .def(py::init([](Index r_target, double eps_floor) {
                 SmoothingState s;
                 s.r_target = r_target;
                 s.eps_floor = eps_floor;
                 return s;
             }),
             py::arg("r_target"), py::arg("eps_floor") = 1e-12)
        .def_readonly("eps", &SmoothingState::eps)
        .def_readonly("r_target", &SmoothingState::r_target)
        .def_readonly("eps_floor", &SmoothingState::eps_floor)
        .def("is_set", &SmoothingState::is_set);

    py::class_<ReweightingOperator>(m, "ReweightingOperator")
        .def_static("build", &ReweightingOperator::build, py::arg("anchor"),
                    py::arg("eps"))
        .def("apply", &ReweightingOperator::apply, py::arg("w"))
        .def("q3r_value", &ReweightingOperator::q3r_value, py::arg("w"))
        .def("grad_q3r", &ReweightingOperator::grad_q3r, py::arg("w"))
        .def("quadratic_model", &ReweightingOperator::quadratic_model, py::arg("w"))
        .def_property_readonly("eps", &ReweightingOperator::eps)
        .def_property_readonly("rank_envelope", &ReweightingOperator::rank_envelope)
        .def_property_readonly("u", &ReweightingOperator::u)
        .def_property_readonly("sigma", &ReweightingOperator::sigma)
        .def_property_readonly("v", &ReweightingOperator::v);

    m.def(
        "update_operator",
        [](const Matrix& w, const SmoothingState& state) {
            auto [op, next] = update_operator(w, state);
            return py::make_tuple(op, next);
        },
        py::arg("w"), py::arg("state"),
        "Refresh the operator at anchor w and tighten eps; returns (op, state)");

    py::class_<AdamQ3R>(m, "AdamQ3R")
        .def(py::init([](Matrix w0, Index r_target, double lambda, double alpha,
                         double beta1, double beta2, double delta, double eta,
                         long period, double eps_floor, double clip_norm) {
                 return AdamQ3R(std::move(w0), r_target,
                                make_opt(alpha, beta1, beta2, delta, eta, lambda,
                                         period, eps_floor, clip_norm));
             }),
             py::arg("w0"), py::arg("r_target") = 0, py::arg("lambda_") = 1e-3,
             py::arg("alpha") = 1e-3, py::arg("beta1") = 0.9,
             py::arg("beta2") = 0.999, py::arg("delta") = 1e-8,
             py::arg("eta") = 3.0, py::arg("period") = 5,
             py::arg("eps_floor") = 1e-12, py::arg("clip_norm") = 0.0)
        .def("step", &AdamQ3R::step, py::arg("grad"),
             py::return_value_policy::copy,
             "One update from the loss gradient; returns the new iterate")
        .def_property_readonly("w", &AdamQ3R::w, py::return_value_policy::copy)
        .def_property_readonly("step_count", &AdamQ3R::step_count)
        .def_property_readonly("eps", &AdamQ3R::eps)
        .def_property_readonly("rank_envelope", &AdamQ3R::rank_envelope)
        .def_property_readonly("penalty", &AdamQ3R::penalty);

    m.def(
        "run_matrix_recovery",
        [](Index d1, Index d2, Index rank, double oversampling, double lambda,
           Index r_target, long iters, std::uint64_t seed) {
            RecoveryConfig cfg;
            cfg.d1 = d1;
            cfg.d2 = d2;
            cfg.rank = rank;
            cfg.oversampling = oversampling;
            cfg.lambda = lambda;
            cfg.r_target = r_target;
            cfg.iters = iters;
            cfg.seed = seed;
            const RecoveryReport r = run_matrix_recovery(cfg);
            py::dict out;
            out["rel_err"] = r.rel_err;
            out["tail"] = r.tail;
            out["residual"] = r.residual;
            out["eps"] = r.eps;
            out["r_env"] = r.r_env;
            out["measurements"] = r.measurements;
            out["iters"] = r.iters_run;
            return out;
        },
        py::arg("d1"), py::arg("d2"), py::arg("rank"), py::arg("oversampling"),
        py::arg("lambda_"), py::arg("r_target") = 0, py::arg("iters") = 20000,
        py::arg("seed") = 1, "Seeded Gaussian-measurement recovery experiment");
}
