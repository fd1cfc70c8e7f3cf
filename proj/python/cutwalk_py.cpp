#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cutwalk/classify.hpp"
#include "cutwalk/dvals.hpp"
#include "cutwalk/env.hpp"
#include "cutwalk/errors.hpp"
#include "cutwalk/laws.hpp"
#include "cutwalk/simulate.hpp"
#include "cutwalk/stats.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace cutwalk;

namespace {

py::dict law_dict(const LawValue& v) {
    return py::dict("value"_a = v.value, "lo"_a = v.lo, "hi"_a = v.hi);
}

py::dict gof_dict(const GofReport& r) {
    py::object p = r.p_value ? py::object(py::float_(*r.p_value)) : py::object(py::none());
    return py::dict("statistic"_a = r.statistic, "df"_a = r.df, "p_value"_a = p, "buckets"_a = r.buckets,
                    "min_expected"_a = r.min_expected, "degenerate"_a = r.degenerate);
}

}  // namespace

PYBIND11_MODULE(_cutwalk, m) {
    m.doc() = "Cutpoints and local times of transient nearest-neighbour walks";
    m.attr("__version__") = CUTWALK_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception<RecurrentError>(m, "RecurrentError", PyExc_RuntimeError);
    py::register_exception<NoDataError>(m, "NoDataError", PyExc_RuntimeError);

    py::class_<Bracket>(m, "Bracket")
        .def_readonly("lo", &Bracket::lo)
        .def_readonly("hi", &Bracket::hi)
        .def_readonly("converged", &Bracket::converged)
        .def_readonly("heuristic", &Bracket::heuristic)
        .def_readonly("horizon", &Bracket::horizon)
        .def_property_readonly("mid", &Bracket::mid)
        .def_property_readonly("width", &Bracket::width)
        .def("contains", &Bracket::contains, "x"_a)
        .def("__repr__", [](const Bracket& b) {
            return "Bracket(" + std::to_string(b.lo) + ", " + std::to_string(b.hi) + ")";
        });

    py::class_<BiasFamily>(m, "BiasFamily")
        .def_static("parse", [](const std::string& text) { return parse_family(text); }, "text"_a)
        .def_property_readonly("grammar", &BiasFamily::grammar)
        .def("p_at", &BiasFamily::p_at, "i"_a);

    py::class_<ChainEnv>(m, "ChainEnv")
        .def(py::init([](const std::string& text) { return ChainEnv(parse_family(text)); }), "family"_a)
        .def(py::init<BiasFamily>(), "family"_a)
        .def_property_readonly("family", &ChainEnv::family)
        .def("p_at", &ChainEnv::p_at, "i"_a)
        .def("u_at", &ChainEnv::u_at, "i"_a)
        .def("log_prefix_product", &ChainEnv::log_prefix_product, "k"_a);

    m.def("d_between", &d_between, "env"_a, "m"_a, "n"_a);
    m.def("d_limit", [](const ChainEnv& env, Level level, double width) { return d_limit(env, level, width); },
          "env"_a, "m"_a, "width_target"_a = 1e-10);
    m.def("d_profile",
          [](const ChainEnv& env, Level max_level, double width) {
              ProfileOptions o;
              o.width_target = width;
              return d_profile(env, max_level, o);
          },
          "env"_a, "max_level"_a, "width_target"_a = 1e-10);
    m.def("hitting_prob", py::overload_cast<const ChainEnv&, Level, Level, Level>(&hitting_prob), "env"_a,
          "a"_a, "b"_a, "c"_a);
    m.def("recover_p_from_d", &recover_p_from_d, "d_prev"_a, "d_cur"_a);
    m.def("horizon_for_epsilon",
          [](const ChainEnv& env, Level max_monitored, double eps) {
              return horizon_for_epsilon(env, max_monitored, eps);
          },
          "env"_a, "max_monitored"_a, "eps"_a);

    m.def("cutpoint_prob", [](const ChainEnv& env, Level k) { return law_dict(cutpoint_prob(env, k)); },
          "env"_a, "k"_a);
    m.def("strong_cutpoint_prob",
          [](const ChainEnv& env, Level k) { return law_dict(strong_cutpoint_prob(env, k)); }, "env"_a, "k"_a);
    m.def("joint_cutpoint_prob",
          [](const ChainEnv& env, Level j, Level k) { return law_dict(joint_cutpoint_prob(env, j, k)); },
          "env"_a, "j"_a, "k"_a);
    m.def("joint_strong_prob",
          [](const ChainEnv& env, Level j, Level k) { return law_dict(joint_strong_prob(env, j, k)); },
          "env"_a, "j"_a, "k"_a);
    m.def("local_time_pmf",
          [](const ChainEnv& env, Level r, long long l) { return law_dict(local_time_pmf(env, r, l)); },
          "env"_a, "r"_a, "l"_a);
    m.def("upcross_pmf",
          [](const ChainEnv& env, Level r, long long l) { return law_dict(upcross_pmf(env, r, l)); },
          "env"_a, "r"_a, "l"_a);

    m.def("classify",
          [](const std::string& family) {
              const Verdict v = classify(parse_family(family));
              py::list rationale;
              for (const auto& r : v.rationale) rationale.append(py::dict("rule"_a = r.rule, "detail"_a = r.detail));
              return py::dict("outcome"_a = to_string(v.outcome),
                              "technical_condition_met"_a = v.technical_condition_met,
                              "delta"_a = v.delta_used, "rationale"_a = rationale);
          },
          "family"_a);
    m.def("criterion_partial_sum", &criterion_partial_sum, "env"_a, "n"_a, "width_target"_a = 1e-6);
    m.def("equiconv_transform_partial", &equiconv_transform_partial, "env"_a, "n"_a, "width_target"_a = 1e-6);
    m.def("polfeldt_check", &polfeldt_check, "beta"_a, "x"_a, "tol"_a = 1e-8, "s_scale"_a = 1.0);

    m.def(
        "simulate",
        [](const std::string& family, Level levels, double eps, std::int64_t replicas, std::uint64_t seed,
           int workers, std::vector<std::pair<Level, Level>> pairs) {
            const ChainEnv env(parse_family(family));
            WalkConfig cfg;
            cfg.monitored_max = levels;
            cfg.eps_censor = eps;
            cfg.replicas = replicas;
            cfg.master_seed = seed;
            cfg.workers = workers;
            cfg.pairs = std::move(pairs);
            py::gil_scoped_release release;
            return to_jsonl(census(env, cfg));
        },
        "family"_a, "levels"_a = 20, "eps"_a = 1.0 / 1024.0, "replicas"_a = 10000, "seed"_a = 0,
        "workers"_a = 1, "pairs"_a = std::vector<std::pair<Level, Level>>{},
        "Run a census and return it as JSON lines.");
    m.def(
        "compare_census",
        [](const std::string& jsonl) {
            const Census c = census_from_jsonl(jsonl);
            const ChainEnv env(parse_family(c.family));
            return summary_csv(compare_census_to_exact(c, env));
        },
        "census_jsonl"_a, "Per-site frequencies against exact laws, as CSV.");

    m.def("wilson_interval", &wilson_interval, "successes"_a, "n"_a, "z"_a = 1.959963984540054);
    m.def(
        "chi_square_geometric",
        [](const std::map<std::int64_t, std::int64_t>& observed, double q, double min_expected) {
            return gof_dict(chi_square_geometric(observed, q, min_expected));
        },
        "observed"_a, "q"_a, "min_expected"_a = 5.0);
}
