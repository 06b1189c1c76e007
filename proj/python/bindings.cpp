// Python bindings. Points cross the boundary as (n, d) arrays and are stored
// column-wise on the C++ side.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "neemo/checks.hpp"
#include "neemo/error.hpp"
#include "neemo/events.hpp"
#include "neemo/experiments.hpp"
#include "neemo/fitter.hpp"
#include "neemo/lipnet.hpp"
#include "neemo/ot.hpp"
#include "neemo/shapes.hpp"

namespace py = pybind11;
using namespace neemo;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ot::DiscreteMeasure measure(const Eigen::VectorXd& weights, const RowPoints& points) {
    ot::DiscreteMeasure m(weights, points.transpose());
    m.validate();
    return m;
}

RowPoints rows(const Eigen::MatrixXd& columns) { return columns.transpose(); }

py::dict record_dict(const fit::TraceRecord& r) {
    py::dict d;
    d["step"] = r.step;
    d["theta"] = r.theta;
    d["emd"] = r.emd_estimate;
    d["grad_norm"] = r.grad_norm_theta;
    return d;
}

}  // namespace

PYBIND11_MODULE(_neemo, m) {
    m.doc() = "Wasserstein-1 estimation with 1-Lipschitz networks and minimax shape fitting";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto input = py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", input.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<fit::FitDivergence>(m, "FitDivergence", numerical.ptr());
    py::register_exception<StateError>(m, "StateError", base.ptr());

    // ot
    py::class_<ot::TransportPlan>(m, "TransportPlan")
        .def_readonly("gamma", &ot::TransportPlan::gamma)
        .def_readonly("cost", &ot::TransportPlan::cost)
        .def_readonly("u", &ot::TransportPlan::u)
        .def_readonly("v", &ot::TransportPlan::v)
        .def_readonly("pivots", &ot::TransportPlan::pivots);

    m.def(
        "exact_emd",
        [](const Eigen::VectorXd& a, const RowPoints& x, const Eigen::VectorXd& b, const RowPoints& y) {
            return ot::exact_emd(measure(a, x), measure(b, y));
        },
        py::arg("weights_a"), py::arg("points_a"), py::arg("weights_b"), py::arg("points_b"),
        "Exact EMD and optimal plan between two weighted point clouds (weights are normalized).");
    m.def(
        "sinkhorn_emd",
        [](const Eigen::VectorXd& a, const RowPoints& x, const Eigen::VectorXd& b, const RowPoints& y, double epsilon,
           std::size_t max_iters, double tol) {
            ot::SinkhornOptions o;
            o.epsilon = epsilon;
            o.max_iters = max_iters;
            o.tol = tol;
            const auto r = ot::sinkhorn_emd(measure(a, x), measure(b, y), o);
            py::dict d;
            d["value"] = r.value;
            d["iterations"] = r.iterations;
            d["marginal_error"] = r.marginal_error;
            return d;
        },
        py::arg("weights_a"), py::arg("points_a"), py::arg("weights_b"), py::arg("points_b"),
        py::arg("epsilon") = 0.01, py::arg("max_iters") = 100000, py::arg("tol") = 1e-9);
    m.def(
        "emd_1d",
        [](const Eigen::VectorXd& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b, const Eigen::VectorXd& y) {
            return ot::emd_1d(ot::DiscreteMeasure(a, x.transpose()), ot::DiscreteMeasure(b, y.transpose()));
        },
        py::arg("weights_a"), py::arg("points_a"), py::arg("weights_b"), py::arg("points_b"));

    // lipnet
    py::enum_<lipnet::Projection>(m, "Projection")
        .value("WHOLE", lipnet::Projection::Whole)
        .value("PER_ROW", lipnet::Projection::PerRow)
        .value("UNIT_ROW", lipnet::Projection::UnitRow);

    py::class_<lipnet::Architecture>(m, "Architecture")
        .def(py::init<>())
        .def_readwrite("input_dim", &lipnet::Architecture::input_dim)
        .def_readwrite("hidden", &lipnet::Architecture::hidden)
        .def_readwrite("group_size", &lipnet::Architecture::group_size)
        .def_readwrite("projection", &lipnet::Architecture::projection);

    py::class_<lipnet::LipschitzMLP>(m, "LipschitzMLP")
        .def_static("random", &lipnet::LipschitzMLP::random, py::arg("arch"), py::arg("seed") = 0)
        .def("__call__", [](const lipnet::LipschitzMLP& net, const RowPoints& x) {
            return Eigen::VectorXd(net.forward_batch(x.transpose()));
        })
        .def("save", &lipnet::LipschitzMLP::save)
        .def_static("load", &lipnet::LipschitzMLP::load)
        .def("lipschitz_ratio", &lipnet::lipschitz_ratio_check, py::arg("pairs") = 10000, py::arg("seed") = 0,
             py::arg("lo") = -1.0, py::arg("hi") = 1.0);

    // fitter config
    py::class_<fit::GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def_readwrite("nx", &fit::GridSpec::nx)
        .def_readwrite("ny", &fit::GridSpec::ny)
        .def_readwrite("xmin", &fit::GridSpec::xmin)
        .def_readwrite("xmax", &fit::GridSpec::xmax)
        .def_readwrite("ymin", &fit::GridSpec::ymin)
        .def_readwrite("ymax", &fit::GridSpec::ymax);

    py::class_<fit::FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_static("parse", [](const std::string& text) { return fit::parse_config(text); }, py::arg("text"))
        .def("__str__", &fit::config_to_text)
        .def_readwrite("arch", &fit::FitConfig::arch)
        .def_readwrite("inner_steps_per_outer", &fit::FitConfig::inner_steps_per_outer)
        .def_readwrite("inner_lr", &fit::FitConfig::inner_lr)
        .def_readwrite("outer_lr", &fit::FitConfig::outer_lr)
        .def_readwrite("outer_steps", &fit::FitConfig::outer_steps)
        .def_readwrite("warmup_inner_steps", &fit::FitConfig::warmup_inner_steps)
        .def_readwrite("refit_inner_steps", &fit::FitConfig::refit_inner_steps)
        .def_readwrite("estimate_steps", &fit::FitConfig::estimate_steps)
        .def_readwrite("outer_lr_final_fraction", &fit::FitConfig::outer_lr_final_fraction)
        .def_readwrite("inner_lr_final_fraction", &fit::FitConfig::inner_lr_final_fraction)
        .def_readwrite("stochastic", &fit::FitConfig::stochastic)
        .def_readwrite("batch_size", &fit::FitConfig::batch_size)
        .def_readwrite("seed", &fit::FitConfig::seed)
        .def_readwrite("convergence_tol", &fit::FitConfig::convergence_tol)
        .def_readwrite("heatmap", &fit::FitConfig::heatmap)
        .def_readwrite("snapshot_every", &fit::FitConfig::snapshot_every)
        .def_readwrite("divergence_threshold", &fit::FitConfig::divergence_threshold);

    // shapes
    py::class_<shapes::ShapeSpec>(m, "ShapeSpec")
        .def_static("point_set", &shapes::ShapeSpec::point_set, py::arg("centers"), py::arg("learned_weights") = false)
        .def_static("circle_set", &shapes::ShapeSpec::circle_set, py::arg("circles"), py::arg("samples") = 64)
        .def_static("ellipse", &shapes::ShapeSpec::ellipse, py::arg("cx"), py::arg("cy"), py::arg("a"), py::arg("b"),
                    py::arg("rotation") = 0.0, py::arg("samples") = 64)
        .def_static("triangle", &shapes::ShapeSpec::triangle, py::arg("vertices"), py::arg("samples") = 64)
        .def_static("composite", &shapes::ShapeSpec::composite, py::arg("parts"))
        .def_static("from_json", &shapes::ShapeSpec::from_json)
        .def_static("load", &shapes::ShapeSpec::load)
        .def("to_json", &shapes::ShapeSpec::to_json)
        .def("save", &shapes::ShapeSpec::save)
        .def_property("theta", [](const shapes::ShapeSpec& s) { return s.theta; },
                      [](shapes::ShapeSpec& s, std::vector<double> t) { s.set_theta(std::move(t)); })
        .def_readwrite("stochastic", &shapes::ShapeSpec::stochastic)
        .def_property_readonly("kind", [](const shapes::ShapeSpec& s) { return shapes::to_string(s.kind); })
        .def_property_readonly("num_points", &shapes::ShapeSpec::num_points)
        .def(
            "sample",
            [](const shapes::ShapeSpec& s, std::uint64_t seed) {
                const auto w = shapes::sample(s, seed);
                return py::make_tuple(w.weights, rows(w.points));
            },
            py::arg("seed") = 0, "(weights, points) of the shape's sample measure.")
        .def("translate", [](shapes::ShapeSpec& s, std::vector<double> t) { shapes::translate(s, t); });

    // events
    py::class_<events::Event>(m, "Event")
        .def(py::init([](const Eigen::VectorXd& energies, const RowPoints& positions) {
                 events::Event e;
                 e.energies = energies;
                 e.positions = positions.transpose();
                 e.validate();
                 return e;
             }),
             py::arg("energies"), py::arg("positions"))
        .def_readonly("energies", &events::Event::energies)
        .def_property_readonly("positions", [](const events::Event& e) { return rows(e.positions); })
        .def_property_readonly("weights", [](const events::Event& e) { return events::normalize(e).weights; })
        .def("__len__", [](const events::Event& e) { return e.size(); })
        .def("save", [](const events::Event& e, const std::filesystem::path& p) { events::save_event(e, p); });

    m.def("load_event", py::overload_cast<const std::filesystem::path&>(&events::load_event), py::arg("path"));
    m.def("gen_circle_event", &events::gen_circle_event, py::arg("circles"), py::arg("points_per_circle") = 200,
          py::arg("jitter") = 0.0, py::arg("seed") = 0);
    m.def(
        "gen_triangle_ellipse_event",
        [](int points, std::uint64_t seed) {
            return events::gen_triangle_ellipse_event(events::triangle_ellipse_layout(), points, seed);
        },
        py::arg("points_per_shape") = 400, py::arg("seed") = 0);
    m.def(
        "gen_subjet_event",
        [](int n, double sigma, int per_center, std::uint64_t seed) {
            events::SubjetParams p;
            p.n_centers = n;
            p.sigma = sigma;
            p.particles_per_center = per_center;
            return events::gen_subjet_event(p, seed);
        },
        py::arg("n_centers") = 3, py::arg("sigma") = 0.05, py::arg("particles_per_center") = 10, py::arg("seed") = 0);
    m.def("three_circle_layout", &events::three_circle_layout);

    // estimation and fitting
    m.def(
        "estimate_emd",
        [](const Eigen::VectorXd& a, const RowPoints& x, const Eigen::VectorXd& b, const RowPoints& y,
           const fit::FitConfig& config) {
            auto arch = config.arch;
            arch.input_dim = static_cast<int>(x.cols());
            const auto P = measure(a, x);
            const auto Q = measure(b, y);
            auto r = fit::estimate_emd(P, {Q.normalized().weights, Q.points}, lipnet::LipschitzMLP::random(arch, config.seed),
                                       config);
            py::dict d;
            d["emd"] = r.emd;
            d["history"] = r.history;
            d["origin"] = r.origin;
            d["net"] = r.net;
            return d;
        },
        py::arg("weights_a"), py::arg("points_a"), py::arg("weights_b"), py::arg("points_b"),
        py::arg("config") = fit::FitConfig{},
        "Lower bound on the EMD from gradient ascent on the dual; the net is evaluated at x - origin.");

    py::class_<fit::FitTrace>(m, "FitTrace")
        .def_readonly("final_theta", &fit::FitTrace::final_theta)
        .def_readonly("final_observable", &fit::FitTrace::final_observable)
        .def_readonly("refit_history", &fit::FitTrace::refit_history)
        .def_readonly("outer_steps_run", &fit::FitTrace::outer_steps_run)
        .def_readonly("origin", &fit::FitTrace::origin)
        .def_readonly("final_net", &fit::FitTrace::final_net)
        .def_property_readonly("records", [](const fit::FitTrace& t) {
            py::list out;
            for (const auto& r : t.records) out.append(record_dict(r));
            return out;
        });

    m.def(
        "fit",
        [](const events::Event& event, const shapes::ShapeSpec& init, const fit::FitConfig& config) {
            py::gil_scoped_release release;
            return fit::fit(event, init, config);
        },
        py::arg("event"), py::arg("init"), py::arg("config") = fit::FitConfig{});
    m.def(
        "potential_heatmap",
        [](const lipnet::LipschitzMLP& net, const fit::GridSpec& grid, const Eigen::VectorXd& origin) {
            const auto v = fit::potential_heatmap(net, grid, origin);
            return Eigen::Map<const RowPoints>(v.data(), grid.ny, grid.nx).eval();
        },
        py::arg("net"), py::arg("grid"), py::arg("origin"), "f(x - origin) on the grid as an (ny, nx) array.");

    // self checks
    m.def(
        "run_check",
        [](const std::string& name, std::uint64_t seed) {
            const auto r = checks::run_suite(name, seed);
            py::dict d;
            d["name"] = r.name;
            d["passed"] = r.passed;
            d["metric"] = r.metric;
            d["threshold"] = r.threshold;
            d["detail"] = r.detail;
            return d;
        },
        py::arg("name"), py::arg("seed") = 0);
    m.def("check_names", &checks::suite_names);
}
