#include "flexicubes/grid.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace flexi {

void ScalarGrid::validate() const {
    if (resolution.x < 1 || resolution.y < 1 || resolution.z < 1)
        throw std::runtime_error("grid: resolution must be >= 1 per axis");
    if (!(spacing > 0) || !std::isfinite(spacing))
        throw std::runtime_error("grid: spacing must be positive");
    if (sdf.size() != num_vertices() || deform_raw.size() != num_vertices())
        throw std::runtime_error("grid: field size mismatch");
    for (double s : sdf)
        if (!std::isfinite(s)) throw std::runtime_error("grid: non-finite sdf value");
    for (const Vec3& d : deform_raw)
        if (!std::isfinite(d.x) || !std::isfinite(d.y) || !std::isfinite(d.z))
            throw std::runtime_error("grid: non-finite deformation");
}

ScalarGrid ScalarGrid::make(IVec3 res, Vec3 origin, double h) {
    ScalarGrid g;
    g.resolution = res;
    g.origin = origin;
    g.spacing = h;
    g.sdf.assign(g.num_vertices(), 0.0);
    g.deform_raw.assign(g.num_vertices(), Vec3{0, 0, 0});
    return g;
}

ScalarGrid ScalarGrid::make_domain(int res) {
    return make({res, res, res}, {-1, -1, -1}, 2.0 / res);
}

std::vector<Vec3> deformed_positions(const ScalarGrid& g) {
    std::vector<Vec3> pos(g.num_vertices());
    for (int k = 0; k <= g.resolution.z; ++k)
        for (int j = 0; j <= g.resolution.y; ++j)
            for (int i = 0; i <= g.resolution.x; ++i) {
                size_t v = g.vidx(i, j, k);
                pos[v] = deformed_position(g.lattice_position(i, j, k), g.spacing, g.deform_raw[v]);
            }
    return pos;
}

void save_grid_json(const ScalarGrid& g, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = "flexicubes-grid";
    j["version"] = 1;
    j["resolution"] = {g.resolution.x, g.resolution.y, g.resolution.z};
    j["origin"] = {g.origin.x, g.origin.y, g.origin.z};
    j["spacing"] = g.spacing;
    j["sdf"] = g.sdf;
    auto d = nlohmann::ordered_json::array();
    for (const Vec3& v : g.deform_raw) d.push_back({v.x, v.y, v.z});
    j["deform_raw"] = std::move(d);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("grid: cannot write " + path);
    os << j.dump() << "\n";
}

ScalarGrid load_grid_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("grid: cannot read " + path);
    nlohmann::json j;
    is >> j;
    if (j.value("format", "") != "flexicubes-grid" || j.value("version", 0) != 1)
        throw std::runtime_error("grid: unrecognized snapshot format");
    ScalarGrid g;
    g.resolution = {j["resolution"][0], j["resolution"][1], j["resolution"][2]};
    g.origin = {j["origin"][0], j["origin"][1], j["origin"][2]};
    g.spacing = j["spacing"];
    g.sdf = j["sdf"].get<std::vector<double>>();
    for (auto& v : j["deform_raw"]) g.deform_raw.push_back({v[0], v[1], v[2]});
    g.validate();
    return g;
}

namespace {
template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
}  // namespace

void save_grid_binary(const ScalarGrid& g, std::ostream& os) {
    os.write("FXGRID01", 8);
    put(os, int32_t(g.resolution.x));
    put(os, int32_t(g.resolution.y));
    put(os, int32_t(g.resolution.z));
    put(os, g.origin.x);
    put(os, g.origin.y);
    put(os, g.origin.z);
    put(os, g.spacing);
    for (double s : g.sdf) put(os, s);
    for (const Vec3& d : g.deform_raw) {
        put(os, d.x);
        put(os, d.y);
        put(os, d.z);
    }
}

ScalarGrid load_grid_binary(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "FXGRID01")
        throw std::runtime_error("grid: bad binary snapshot magic");
    IVec3 res{get<int32_t>(is), get<int32_t>(is), get<int32_t>(is)};
    Vec3 origin{get<double>(is), get<double>(is), get<double>(is)};
    double h = get<double>(is);
    ScalarGrid g = ScalarGrid::make(res, origin, h);
    for (double& s : g.sdf) s = get<double>(is);
    for (Vec3& d : g.deform_raw) {
        d.x = get<double>(is);
        d.y = get<double>(is);
        d.z = get<double>(is);
    }
    if (!is) throw std::runtime_error("grid: truncated binary snapshot");
    g.validate();
    return g;
}

}  // namespace flexi
