#include "c3dag/balloon.hpp"
#include "c3dag/control.hpp"
#include "c3dag/dataset.hpp"
#include "c3dag/diffusion.hpp"
#include "c3dag/error.hpp"
#include "c3dag/image.hpp"
#include "c3dag/pipeline.hpp"
#include "c3dag/radiance.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace c3dag;

namespace {

py::array_t<double> image_array(const Image& img) {
    py::array_t<double> out({img.height, img.width, img.channels});
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(double));
    return out;
}

py::array_t<std::uint8_t> rgb8_array(const Rgb8Image& img) {
    py::array_t<std::uint8_t> out({img.height, img.width, 3});
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size());
    return out;
}

py::array_t<double> depth_array(const DepthMap& d) {
    py::array_t<double> out({d.height, d.width});
    std::memcpy(out.mutable_data(), d.depth.data(), d.depth.size() * sizeof(double));
    return out;
}

py::tuple mesh_arrays(const TriMesh& mesh) {
    py::array_t<double> v({static_cast<py::ssize_t>(mesh.vertices.size()), py::ssize_t{3}});
    py::array_t<int> f({static_cast<py::ssize_t>(mesh.triangles.size()), py::ssize_t{3}});
    auto vv = v.mutable_unchecked<2>();
    auto ff = f.mutable_unchecked<2>();
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        for (int a = 0; a < 3; ++a) vv(i, a) = mesh.vertices[i][a];
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i)
        for (int a = 0; a < 3; ++a) ff(i, a) = mesh.triangles[i][a];
    return py::make_tuple(v, f);
}

py::dict stats_dict(const MeshStats& s) {
    py::dict d;
    d["vertices"] = s.vertices;
    d["triangles"] = s.triangles;
    d["edges"] = s.edges;
    d["components"] = s.components;
    d["euler_characteristic"] = s.euler_characteristic();
    d["watertight"] = s.watertight();
    d["area"] = s.area;
    d["signed_volume"] = s.signed_volume;
    return d;
}

py::dict record_dict(const IterationRecord& r) {
    py::dict d;
    d["iter"] = r.iter;
    d["t"] = r.t;
    d["step"] = r.step;
    d["omega"] = r.omega;
    d["control"] = r.control;
    d["grad_norm"] = r.grad_norm;
    d["opacity_mean"] = r.opacity_mean;
    d["view"] = r.view;
    return d;
}

py::dict result_dict(const Pipeline& p, const StageResult& r) {
    py::dict d;
    py::list records;
    for (const auto& rec : r.report.records) records.append(record_dict(rec));
    d["stage"] = r.report.stage;
    d["records"] = records;
    d["skipped"] = r.report.skipped.size();
    d["wall_seconds"] = r.report.wall_seconds;
    d["checkpoint"] = r.report.checkpoint;
    d["aborted"] = r.report.aborted;
    d["iou"] = p.silhouette_iou(r.grid);
    d["grid"] = py::bytes(save_grid(r.grid));
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Balloon-animal skeletons, meshing, conditioning renders and radiance-grid optimisation";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<DegenerateBoneError>(m, "DegenerateBoneError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());

    py::class_<Camera>(m, "Camera")
        .def_static(
            "from_spherical",
            [](double radius, double azimuth, double polar, double fov_y, int width, int height) {
                return camera_from_spherical({radius, azimuth, polar}, fov_y, {width, height});
            },
            py::arg("radius"), py::arg("azimuth"), py::arg("polar"), py::arg("fov_y") = 45.0, py::arg("width") = 64,
            py::arg("height") = 64)
        .def_property_readonly("position", &Camera::position)
        .def_property_readonly("forward", &Camera::forward)
        .def_property_readonly("focal", &Camera::focal)
        .def_property_readonly("width", [](const Camera& c) { return c.resolution().width; })
        .def_property_readonly("height", [](const Camera& c) { return c.resolution().height; })
        .def("project", [](const Camera& c, const Vec3& p) {
            const Projection pr = project_point(c, p);
            return py::make_tuple(pr.pixel, pr.depth, pr.in_front);
        });

    py::class_<Skeleton>(m, "Skeleton")
        .def_static("default", &default_skeleton)
        .def_static("loads", [](const std::string& doc) { return load_skeleton(doc); })
        .def("dumps", [](const Skeleton& s) { return save_skeleton(s); })
        .def("keypoint", [](const Skeleton& s, const std::string& name) {
            const auto k = keypoint_from_name(name);
            if (!k) throw py::key_error(name);
            return Vec3(s[*k]);
        })
        .def("with_keypoint",
             [](const Skeleton& s, const std::string& name, const Vec3& p) {
                 const auto k = keypoint_from_name(name);
                 if (!k) throw py::key_error(name);
                 return s.with_keypoint(*k, p);
             })
        .def_property_readonly("names", [](const Skeleton&) {
            std::vector<std::string> names;
            for (Keypoint k : all_keypoints()) names.emplace_back(keypoint_name(k));
            return names;
        })
        .def("view", [](const Skeleton& s, const Camera& c) {
            return std::string(view_name(classify_view(c, body_frame(s))));
        });

    py::class_<BodyPartConfig>(m, "BodyPartConfig")
        .def(py::init<>())
        .def_static("for_skeleton", &default_body_config)
        .def_static("loads", [](const std::string& doc) { return load_body_config(doc); })
        .def("dumps", [](const BodyPartConfig& b) { return save_body_config(b); })
        .def_readwrite("head_radii", &BodyPartConfig::head_radii)
        .def_readwrite("torso_radii", &BodyPartConfig::torso_radii)
        .def_readwrite("limb_radius", &BodyPartConfig::limb_radius)
        .def_readwrite("tail_base_radius", &BodyPartConfig::tail_base_radius)
        .def_readwrite("snout_base_radius", &BodyPartConfig::snout_base_radius);

    py::class_<BalloonShape>(m, "BalloonShape")
        .def_static(
            "build",
            [](const Skeleton& s, std::optional<BodyPartConfig> body) {
                return build_shape(s, body ? *body : default_body_config(s));
            },
            py::arg("skeleton"), py::arg("body") = py::none())
        .def_property_readonly("primitive_count", [](const BalloonShape& s) { return s.primitives.size(); })
        .def_property_readonly("bounds", [](const BalloonShape& s) {
            const Aabb b = s.bounds();
            return py::make_tuple(b.lo, b.hi);
        })
        .def("sdf", [](const BalloonShape& s, py::array_t<double, py::array::c_style | py::array::forcecast> pts) {
            if (pts.ndim() != 2 || pts.shape(1) != 3) throw DomainError("points must have shape (n, 3)");
            auto in = pts.unchecked<2>();
            py::array_t<double> out(pts.shape(0));
            auto o = out.mutable_unchecked<1>();
            for (py::ssize_t i = 0; i < pts.shape(0); ++i) o(i) = sdf_eval(s, Vec3(in(i, 0), in(i, 1), in(i, 2)));
            return out;
        })
        .def(
            "mesh",
            [](const BalloonShape& s, int res) {
                TriMesh mesh;
                {
                    py::gil_scoped_release release;
                    mesh = extract_mesh(s, res);
                }
                py::tuple arrays = mesh_arrays(mesh);
                return py::make_tuple(arrays[0], arrays[1], stats_dict(mesh_stats(mesh)));
            },
            py::arg("resolution") = 64, "Marching-cubes mesh as (vertices, triangles, stats).")
        .def("obj", [](const BalloonShape& s, int res) { return export_obj(extract_mesh(s, res)); },
             py::arg("resolution") = 64)
        .def("dumps", [](const BalloonShape& s) { return save_shape(s); })
        .def(
            "render_depth",
            [](const BalloonShape& s, const Camera& c) {
                DepthMap d;
                {
                    py::gil_scoped_release release;
                    d = render_depth(s, c);
                }
                return depth_array(d);
            },
            "z-depth per pixel; misses are +inf.");

    m.def(
        "render_pose",
        [](const Skeleton& s, const Camera& c) {
            const Pose2D pose = project_pose(s, c);
            return rgb8_array(rasterize_pose(pose, default_pose_style(c.resolution())));
        },
        "Pose conditioning image as an (h, w, 3) uint8 array.");

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def(py::init<int, double, double>(), py::arg("steps") = 1000, py::arg("beta_start") = 1e-4,
             py::arg("beta_end") = 2e-2)
        .def_property_readonly("steps", &NoiseSchedule::steps)
        .def("alpha", &NoiseSchedule::alpha)
        .def("alpha_bar", &NoiseSchedule::alpha_bar)
        .def("sigma2", &NoiseSchedule::sigma2)
        .def("discrete_step", &NoiseSchedule::discrete_step);

    auto state = [](long iter, long total) {
        ScheduleState s;
        s.iter = iter;
        s.total_iters = total;
        return s;
    };
    m.def("anneal_timestep", [state](long i, long n) { return anneal_timestep(state(i, n)); });
    m.def("guidance_scale", [state](long i, long n) { return guidance_scale(state(i, n)); });
    m.def("control_scale", [state](long i, long n) { return control_scale(state(i, n)); });

    py::class_<RadianceGrid>(m, "RadianceGrid")
        .def_static("loads", [](const py::bytes& b) { return load_grid(std::string(b)); })
        .def("dumps", [](const RadianceGrid& g) { return py::bytes(save_grid(g)); })
        .def_property_readonly("resolution", &RadianceGrid::resolution)
        .def_property_readonly("channels", &RadianceGrid::channels)
        .def_property_readonly("params", [](const RadianceGrid& g) {
            return py::array_t<double>(static_cast<py::ssize_t>(g.params().size()), g.params().data());
        })
        .def(
            "render",
            [](const RadianceGrid& g, const Camera& c, int n_samples) {
                RenderOptions opts;
                opts.n_samples = n_samples;
                opts.jitter = false;
                RenderedImage r;
                {
                    py::gil_scoped_release release;
                    r = render(g, c, opts, nullptr, nullptr);
                }
                py::array_t<double> opacity({c.resolution().height, c.resolution().width});
                std::memcpy(opacity.mutable_data(), r.opacity.data(), r.opacity.size() * sizeof(double));
                return py::make_tuple(image_array(r.color), opacity);
            },
            py::arg("camera"), py::arg("n_samples") = 64, "(colour, opacity) arrays.");

    m.def(
        "curate",
        [](const std::vector<std::string>& documents, double threshold, std::uint64_t seed) {
            const ControlSet set = make_control_set(documents, threshold, AugmentRanges{}, seed);
            py::list images;
            for (const auto& img : set.images) images.append(rgb8_array(img));
            return py::make_tuple(images, set.source_index, set.report.to_json());
        },
        py::arg("documents"), py::arg("threshold") = 0.3, py::arg("seed") = 0,
        "Filter, augment and rasterize annotation documents: (images, source indices, report JSON).");

    py::class_<Pipeline>(m, "Pipeline")
        .def(py::init([](const std::string& config_json, const std::string& base_dir) {
                 return Pipeline(parse_config(config_json, base_dir));
             }),
             py::arg("config") = "{}", py::arg("base_dir") = "")
        .def_property_readonly("config", [](const Pipeline& p) { return config_to_json(p.config()); })
        .def_property_readonly("skeleton", &Pipeline::skeleton)
        .def_property_readonly("shape", &Pipeline::shape)
        .def("initial_grid", &Pipeline::initial_grid)
        .def(
            "stage1",
            [](const Pipeline& p, std::optional<RadianceGrid> grid) {
                StageResult r{RadianceGrid({2, 2, 2}, Aabb{Vec3::Zero(), Vec3::Ones()}), {}};
                {
                    py::gil_scoped_release release;
                    r = p.stage1(grid ? *grid : p.initial_grid());
                }
                return py::make_tuple(r.grid, result_dict(p, r));
            },
            py::arg("grid") = py::none())
        .def(
            "stage2",
            [](const Pipeline& p, std::optional<RadianceGrid> grid) {
                StageResult r{RadianceGrid({2, 2, 2}, Aabb{Vec3::Zero(), Vec3::Ones()}), {}};
                {
                    py::gil_scoped_release release;
                    r = p.stage2(grid ? *grid : p.initial_grid());
                }
                return py::make_tuple(r.grid, result_dict(p, r));
            },
            py::arg("grid") = py::none())
        .def("silhouette_iou", &Pipeline::silhouette_iou)
        .def("target_mae", &Pipeline::target_mae);
}
