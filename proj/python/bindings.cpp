#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "commands.hpp"
#include "config.hpp"

#include "blockpg/error.hpp"
#include "blockpg/exact.hpp"
#include "blockpg/rates.hpp"

namespace py = pybind11;
using namespace blockpg;

namespace {

py::dict report_dict(const RateReport& r)
{
    py::dict d;
    d["alpha"] = r.alpha;
    d["h"] = r.h;
    d["L"] = r.block_size;
    d["p"] = r.overlap;
    d["N"] = r.particles;
    d["c"] = r.c;
    d["epsilon"] = r.epsilon;
    d["lambda_ideal"] = r.lambda_ideal;
    d["beta"] = r.beta;
    d["lambda_lumped"] = r.lambda_lumped;
    d["w_hat"] = r.w_hat;
    d["lambda_pg_par"] = r.lambda_pg_par;
    d["lambda_pg_lr"] = r.lambda_pg_lr;
    d["flags"] = r.flags();
    return d;
}

// sites are 1-based on the Python side, as in the CLI
std::vector<std::pair<std::size_t, std::size_t>> blocks_of(const BlockCover& c)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& b : c.blocks)
        out.emplace_back(b.first + 1, b.last + 1);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Blocked particle Gibbs samplers for hidden Markov models";

    // translators run newest first, so the base class goes first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<CapacityError>(m, "CapacityError", PyExc_MemoryError);

    m.def(
        "build_cover",
        [](std::size_t T, std::size_t L, std::size_t p) { return blocks_of(build_cover(T, L, p)); },
        py::arg("T"), py::arg("L"), py::arg("p"), "Blocks (1-based, inclusive) of the regular cover.");

    m.def(
        "cover_violations",
        [](std::size_t T, const std::vector<std::pair<std::size_t, std::size_t>>& blocks) {
            std::vector<Interval> iv;
            for (const auto& [a, b] : blocks)
            {
                if (a < 1 || b < a)
                    throw ValidationError("blocks must be 1-based [first, last] with first <= last");
                iv.push_back(Interval{a - 1, b - 1});
            }
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& v : validate_cover(make_cover(T, iv)))
                out.emplace_back(to_string(v.assumption), v.message);
            return out;
        },
        py::arg("T"), py::arg("blocks"));

    m.def(
        "coupling_alpha",
        [](double sigma_minus, double sigma_plus, double delta, int h) {
            return coupling_alpha(MixingProfile{sigma_minus, sigma_plus, delta, h});
        },
        py::arg("sigma_minus"), py::arg("sigma_plus"), py::arg("delta"), py::arg("h") = 1);

    m.def(
        "common_rates",
        [](double alpha, int h, std::size_t L, std::size_t p, double epsilon) {
            return report_dict(common_rates(alpha, h, L, p, epsilon));
        },
        py::arg("alpha"), py::arg("h"), py::arg("L"), py::arg("p"), py::arg("epsilon") = 0.0);

    m.def(
        "pg_rates",
        [](double sigma_minus, double sigma_plus, double delta, int h, std::size_t L, std::size_t p, std::size_t N) {
            return report_dict(rate_pg_common(MixingProfile{sigma_minus, sigma_plus, delta, h}, L, p, N));
        },
        py::arg("sigma_minus"), py::arg("sigma_plus"), py::arg("delta"), py::arg("h"), py::arg("L"), py::arg("p"),
        py::arg("N"));

    m.def("pg_epsilon", &pg_epsilon, py::arg("c"), py::arg("N"), py::arg("L"));

    m.def(
        "sweep_operator",
        [](const std::string& config_path, std::size_t cap) {
            const app::ExperimentConfig cfg = app::load_config(config_path);
            const HmmModel model = app::model_from_json(cfg.model);
            const BlockCover cover = app::make_cover_from(cfg.cover);
            SmoothingTarget target(model, app::make_observations(cfg, model, cover.length));
            const SweepOperator op = sweep_operator(target, cover, parse_schedule(cfg.schedule, cover.num_blocks()),
                                                    app::make_kernel(cfg.kernel), cap);
            return py::make_tuple(op.matrix, op.target);
        },
        py::arg("config"), py::arg("cap") = kDefaultStateCap,
        "Exact one-sweep transition matrix and target for a micro config.");

    m.def(
        "run",
        [](const std::string& command, const std::string& config_path, py::dict overrides) {
            app::ExperimentConfig cfg = app::load_config(config_path);
            if (!overrides.empty())
            {
                app::json j = cfg.to_json();
                for (auto item : overrides)
                {
                    const std::string key = py::str(item.first);
                    j[key] = app::json::parse(py::str(py::module_::import("json").attr("dumps")(item.second))
                                                  .cast<std::string>());
                }
                cfg = app::parse_config(j, cfg.source.parent_path());
            }
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = app::run_command(command, cfg, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("command"), py::arg("config"), py::arg("overrides") = py::dict(),
        "Runs a subcommand; returns (exit code, stdout text, stderr text).");
}
