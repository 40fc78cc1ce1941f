#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flexicubes/diff.hpp"
#include "flexicubes/meshcheck.hpp"
#include "flexicubes/optimize.hpp"
#include "flexicubes/tables.hpp"
#include "flexicubes/tet.hpp"

namespace py = pybind11;
using namespace flexi;

namespace {

using ArrayD = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ArrayI = py::array_t<int32_t, py::array::c_style | py::array::forcecast>;

ScalarGrid grid_from_numpy(int res, ArrayD sdf, ArrayD deform) {
    ScalarGrid g = ScalarGrid::make_domain(res);
    if ((size_t)sdf.size() != g.num_vertices())
        throw std::runtime_error("sdf must have (res+1)^3 entries");
    std::memcpy(g.sdf.data(), sdf.data(), sizeof(double) * g.num_vertices());
    if (deform.size() != 0) {
        if ((size_t)deform.size() != 3 * g.num_vertices())
            throw std::runtime_error("deform must have (res+1)^3 x 3 entries");
        const double* d = deform.data();
        for (size_t i = 0; i < g.num_vertices(); ++i)
            g.deform_raw[i] = {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
    }
    return g;
}

FlexParams params_from_numpy(size_t ncells, ArrayD alpha, ArrayD beta, ArrayD gamma) {
    FlexParams p = FlexParams::zeros(ncells);
    auto copy_into = [](std::vector<double>& dst, ArrayD& src, const char* name) {
        if (src.size() == 0) return;
        if ((size_t)src.size() != dst.size())
            throw std::runtime_error(std::string(name) + ": wrong number of entries");
        std::memcpy(dst.data(), src.data(), sizeof(double) * dst.size());
    };
    copy_into(p.alpha_raw, alpha, "alpha");
    copy_into(p.beta_raw, beta, "beta");
    copy_into(p.gamma_raw, gamma, "gamma");
    return p;
}

py::tuple mesh_to_numpy(const TriMesh& m) {
    py::array_t<double> verts({(py::ssize_t)m.vertices.size(), (py::ssize_t)3});
    auto v = verts.mutable_unchecked<2>();
    for (size_t i = 0; i < m.vertices.size(); ++i) {
        v(i, 0) = m.vertices[i].x;
        v(i, 1) = m.vertices[i].y;
        v(i, 2) = m.vertices[i].z;
    }
    py::array_t<int32_t> tris({(py::ssize_t)m.tris.size(), (py::ssize_t)3});
    auto t = tris.mutable_unchecked<2>();
    for (size_t i = 0; i < m.tris.size(); ++i)
        for (int k = 0; k < 3; ++k) t(i, k) = m.tris[i][k];
    return py::make_tuple(verts, tris);
}

py::dict topo_to_dict(const TopoReport& r) {
    py::dict d;
    d["num_vertices"] = r.num_vertices;
    d["num_edges"] = r.num_edges;
    d["num_faces"] = r.num_faces;
    d["boundary_edges"] = r.boundary_edges;
    d["non_manifold_edges"] = r.non_manifold_edges;
    d["non_manifold_vertices"] = r.non_manifold_vertices;
    d["euler_characteristic"] = r.euler_characteristic;
    d["connected_components"] = r.connected_components;
    d["consistent_orientation"] = r.consistent_orientation;
    return d;
}

}  // namespace

PYBIND11_MODULE(flexicubes, m) {
    m.doc() = "Differentiable isosurface extraction (flexible dual marching cubes)";

    m.def(
        "extract_surface",
        [](int res, ArrayD sdf, ArrayD deform, ArrayD alpha, ArrayD beta, ArrayD gamma,
           bool training_split) {
            ScalarGrid g = grid_from_numpy(res, sdf, deform);
            FlexParams p = params_from_numpy(g.num_cells(), alpha, beta, gamma);
            auto pos = deformed_positions(g);
            QuadMesh q = extract_quads(make_field(g, p, pos), dmc_tables());
            TriMesh mesh = training_split ? split_training(q) : split_final(q);
            return mesh_to_numpy(mesh);
        },
        py::arg("res"), py::arg("sdf"), py::arg("deform") = ArrayD(),
        py::arg("alpha") = ArrayD(), py::arg("beta") = ArrayD(), py::arg("gamma") = ArrayD(),
        py::arg("training_split") = false,
        "Extract a triangle mesh from sdf values on the (res+1)^3 lattice over [-1,1]^3. "
        "Returns (vertices, triangles).");

    m.def(
        "extract_mc",
        [](int res, ArrayD sdf, ArrayD deform) {
            ScalarGrid g = grid_from_numpy(res, sdf, deform);
            FlexParams p = FlexParams::zeros(g.num_cells());
            auto pos = deformed_positions(g);
            return mesh_to_numpy(extract_mc_baseline(make_field(g, p, pos), dmc_tables()));
        },
        py::arg("res"), py::arg("sdf"), py::arg("deform") = ArrayD(),
        "Classic marching cubes baseline on the same lattice.");

    m.def(
        "extract_tets",
        [](int res, ArrayD sdf, double thin_threshold) {
            ScalarGrid g = grid_from_numpy(res, sdf, ArrayD());
            FlexParams p = FlexParams::zeros(g.num_cells());
            auto pos = deformed_positions(g);
            auto field = make_field(g, p, pos);
            QuadMesh q = extract_quads(field, dmc_tables());
            TetMesh t = filter_thin_tets(extract_tets(field, dmc_tables(), q), thin_threshold);
            py::array_t<double> verts({(py::ssize_t)t.vertices.size(), (py::ssize_t)3});
            auto v = verts.mutable_unchecked<2>();
            for (size_t i = 0; i < t.vertices.size(); ++i) {
                v(i, 0) = t.vertices[i].x;
                v(i, 1) = t.vertices[i].y;
                v(i, 2) = t.vertices[i].z;
            }
            py::array_t<int32_t> tets({(py::ssize_t)t.tets.size(), (py::ssize_t)4});
            auto ti = tets.mutable_unchecked<2>();
            for (size_t i = 0; i < t.tets.size(); ++i)
                for (int k = 0; k < 4; ++k) ti(i, k) = t.tets[i][k];
            return py::make_tuple(verts, tets);
        },
        py::arg("res"), py::arg("sdf"), py::arg("thin_threshold") = 2e-7,
        "Tetrahedralize the inside volume; returns (vertices, tets).");

    m.def(
        "check_topology",
        [](ArrayD verts, ArrayI tris) {
            TriMesh m;
            auto v = verts.unchecked<2>();
            for (py::ssize_t i = 0; i < v.shape(0); ++i)
                m.vertices.push_back({v(i, 0), v(i, 1), v(i, 2)});
            m.midpoint_flag.assign(m.vertices.size(), 0);
            m.vertex_cell.assign(m.vertices.size(), -1);
            auto t = tris.unchecked<2>();
            for (py::ssize_t i = 0; i < t.shape(0); ++i)
                m.tris.push_back({t(i, 0), t(i, 1), t(i, 2)});
            return topo_to_dict(check_topology(m));
        },
        py::arg("vertices"), py::arg("triangles"));

    m.def(
        "fit",
        [](const std::string& target, int res, int iters, uint64_t seed, int sdf_samples,
           int surface_samples) {
            FitConfig cfg;
            cfg.target_spec = target;
            cfg.resolution = res;
            cfg.iterations = iters;
            cfg.seed = seed;
            cfg.objective.seed = seed;
            cfg.objective.n_sdf_samples = sdf_samples;
            cfg.objective.n_surface_samples = surface_samples;
            FitResult r = fit(cfg);
            if (r.exit_code != 0) throw std::runtime_error("fit aborted: " + r.abort_reason);
            py::dict d;
            d["mesh"] = mesh_to_numpy(r.mesh_final);
            d["loss_history"] = r.state.loss_history;
            return d;
        },
        py::arg("target"), py::arg("res") = 16, py::arg("iters") = 100, py::arg("seed") = 1,
        py::arg("sdf_samples") = 500, py::arg("surface_samples") = 500,
        "Gradient-based fit against a builtin target or OBJ path.");

    m.def(
        "gradcheck",
        [](int res, uint64_t seed) {
            Rng rng(seed);
            ScalarGrid g = ScalarGrid::make_domain(res);
            for (auto& s : g.sdf) s = rng.uniform(-0.8, 0.8);
            FlexParams p = FlexParams::zeros(g.num_cells());
            for (auto& a : p.alpha_raw) a = rng.uniform(-0.5, 0.5);
            for (auto& b : p.beta_raw) b = rng.uniform(-0.5, 0.5);
            for (auto& c : p.gamma_raw) c = rng.uniform(-0.5, 0.5);
            auto target = make_builtin_target("sphere");
            ObjectiveSpec spec;
            spec.cfg.n_sdf_samples = 100;
            spec.cfg.n_surface_samples = 100;
            spec.cfg.seed = seed;
            GradCheckConfig gcc;
            gcc.seed = seed;
            return grad_check(g, p, target.get(), spec, gcc).max_rel_err;
        },
        py::arg("res") = 5, py::arg("seed") = 1,
        "Max relative error of reverse-mode gradients vs central differences.");

    m.def("dump_tables_json", [] { return dmc_tables().dump_json(); },
          "Case tables as JSON for cross-implementation diffing.");
}
