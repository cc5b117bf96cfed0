// meshray: simulate range sensors against triangle-mesh maps.
//
//   meshray simulate --map MAP --sensor SENSOR.toml --poses POSES.csv --attrs LIST --out FILE
//   meshray bench scans (--map MAP | --sphere-faces N) --counts 1000,2000 --reps R
//   meshray bench mapsize --faces 10000,40000 --scans 10000 --reps R
//   meshray info --map MAP
//
// Exit codes: 0 ok, 1 user or input error, 2 internal invariant failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "meshray/assets.hpp"
#include "meshray/bench.hpp"
#include "meshray/error.hpp"
#include "meshray/noise.hpp"
#include "meshray/parallel.hpp"
#include "meshray/pointcloud.hpp"
#include "meshray/sensors.hpp"
#include "meshray/simulation.hpp"

namespace {

using namespace meshray;

constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

unsigned thread_count(int flag)
{
    if (flag >= 0) return static_cast<unsigned>(flag);
    if (const char* env = std::getenv("MESHRAY_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 0) throw UsageError("MESHRAY_THREADS must be a non-negative integer");
        return static_cast<unsigned>(v);
    }
    return 0;
}

std::vector<std::uint64_t> parse_list(const std::string& text, const char* what)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || v == 0) {
            throw UsageError(std::string("--") + what + ": expected positive integers, got '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string("--") + what + " is empty");
    return out;
}

std::shared_ptr<Scene> load_map(const std::string& path)
{
    if (path.empty()) throw UsageError("--map is empty");
    return load_scene(path);
}

SensorRig load_rig(const std::string& path)
{
    if (path.empty()) return {vlp16_preset(), Transform::identity()};
    return load_sensor_config(path);
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    std::string map, sensor, poses, attrs = "hits,ranges,points", out, noise, format;
    std::uint64_t seed = 0;
    bool per_pose = false, hits_only = false, deterministic = false;
    int threads = -1;
};

int run_simulate(const SimulateArgs& a)
{
    if (a.out.empty()) throw UsageError("--out is empty");
    const auto scene = load_map(a.map);
    const SensorRig rig = load_rig(a.sensor);
    const auto poses = load_poses(a.poses);
    const AttrSelection requested = AttrSelection::parse(a.attrs);
    std::optional<NoiseSpec> noise;
    if (!a.noise.empty()) noise = NoiseSpec::parse(a.noise, a.seed);

    std::string format = a.format;
    if (format.empty()) format = std::filesystem::path(a.out).extension() == ".csv" ? "csv" : "ply";
    if (format != "ply" && format != "csv") throw UsageError("--format must be ply or csv");

    const unsigned threads = thread_count(a.threads);
    AttrSelection sel = requested;
    if (noise) sel.ranges = true;
    const Simulator sim(scene, rig);
    SimResult result = sim.simulate(poses, sel, {threads});
    if (result.rays_cast != result.size()) throw std::logic_error("ray cast count does not match the pattern");
    if (noise) {
        apply_noise(result, *noise, rig, threads);
        if (!requested.ranges) {
            result.selection.ranges = false;
            result.ranges.clear();
        }
    }

    CloudWriteOptions opts;
    opts.per_pose = a.per_pose;
    opts.deterministic = a.deterministic;
    opts.hits_only = a.hits_only;
    const auto written = format == "ply" ? write_cloud_ply(a.out, result, opts) : write_cloud_csv(a.out, result, opts);
    std::size_t hits = 0;
    if (!result.hits.empty()) hits = static_cast<std::size_t>(std::count(result.hits.begin(), result.hits.end(), 1));
    std::cout << "simulated " << result.n_poses << " pose(s) x " << result.n_rays << " rays";
    if (!result.hits.empty()) std::cout << ", " << hits << " hits";
    std::cout << "; wrote " << written.size() << " file(s)\n";
    return 0;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
    std::string map, sensor, out, counts = "1000,2000,4000,8000", faces = "10000,40000,160000,640000,2560000";
    std::uint64_t sphere_faces = 0, scans = 10000, seed = 0;
    int reps = -1;
    int threads = -1;
};

constexpr double kSphereRadius = 10.0;
constexpr double kPoseBallFraction = 0.9;

std::ostream& csv_stream(const std::string& out, std::ofstream& file)
{
    if (out.empty()) return std::cout;
    file.open(out, std::ios::binary);
    if (!file) throw Error(ErrorCode::Io, "cannot write " + out);
    return file;
}

int run_bench_scans(const BenchArgs& a)
{
    const int reps = a.reps < 0 ? 5 : a.reps;
    if (reps == 0) throw UsageError("--reps must be >= 1");
    if (a.map.empty() == (a.sphere_faces == 0)) throw UsageError("give exactly one of --map or --sphere-faces");
    const auto counts = parse_list(a.counts, "counts");
    const unsigned threads = thread_count(a.threads);

    std::shared_ptr<Scene> scene;
    std::vector<Transform> pool;
    const std::uint64_t max_count = *std::max_element(counts.begin(), counts.end());
    if (a.sphere_faces) {
        if (a.sphere_faces > 0xFFFFFFFFull) throw UsageError("--sphere-faces too large");
        scene = std::make_shared<Scene>();
        scene->add_geometry(make_icosphere(static_cast<std::uint32_t>(a.sphere_faces), kSphereRadius));
        scene->commit();
        pool = sample_poses_in_ball(max_count, {0, 0, 0}, kSphereRadius * kPoseBallFraction, a.seed);
    } else {
        scene = load_map(a.map);
        pool = sample_poses_in_box(max_count, scene->bounds(), a.seed);
    }
    const Simulator sim(scene, load_rig(a.sensor));

    std::ofstream file;
    std::ostream& csv = csv_stream(a.out, file);
    csv << bench_csv_header("count") << '\n';
    std::vector<double> xs, ys;
    for (const auto n : counts) {
        const std::span<const Transform> poses(pool.data(), n);
        BenchRecord rec{device_label(resolve_threads(threads)), n, static_cast<std::uint32_t>(reps), 0.0, 0.0};
        for (int r = 0; r < reps; ++r) {
            const double t = time_scans(sim, poses, threads);
            rec.seconds += t;
            xs.push_back(static_cast<double>(n));
            ys.push_back(t);
        }
        rec.scans_per_second = static_cast<double>(n) * reps / rec.seconds;
        csv << bench_csv_row(rec) << '\n';
        csv.flush();
    }
    std::set<std::uint64_t> distinct(counts.begin(), counts.end());
    if (distinct.size() >= 2) {
        const LinearFit fit = fit_linear(xs, ys);
        std::cerr << "fit: seconds = " << fit.a << " + " << fit.b << " * scans, R^2 = " << fit.r2 << '\n';
    } else {
        std::cerr << "fit: needs at least two distinct counts\n";
    }
    return 0;
}

int run_bench_mapsize(const BenchArgs& a)
{
    const int reps = a.reps < 0 ? 3 : a.reps;
    if (reps == 0) throw UsageError("--reps must be >= 1");
    if (a.scans == 0) throw UsageError("--scans must be >= 1");
    auto faces = parse_list(a.faces, "faces");
    if (!std::is_sorted(faces.begin(), faces.end())) {
        std::cerr << "warning: --faces is not increasing; sorted\n";
        std::sort(faces.begin(), faces.end());
    }
    for (const auto f : faces)
        if (f > 0xFFFFFFFFull) throw UsageError("--faces entry too large");
    const unsigned threads = thread_count(a.threads);
    const SensorRig rig = load_rig(a.sensor);
    const auto poses = sample_poses_in_ball(a.scans, {0, 0, 0}, kSphereRadius * kPoseBallFraction, a.seed);

    std::ofstream file;
    std::ostream& csv = csv_stream(a.out, file);
    csv << bench_csv_header("faces") << '\n';
    std::vector<double> medians;
    std::vector<std::uint64_t> actual;
    for (const auto f : faces) {
        auto scene = std::make_shared<Scene>();
        Mesh mesh = make_icosphere(static_cast<std::uint32_t>(f), kSphereRadius);
        const std::uint64_t n_faces = mesh.faces.size();
        scene->add_geometry(std::move(mesh));
        scene->commit();
        const Simulator sim(scene, rig);
        BenchRecord rec{device_label(resolve_threads(threads)), n_faces, static_cast<std::uint32_t>(reps), 0.0, 0.0};
        std::vector<double> times;
        for (int r = 0; r < reps; ++r) {
            times.push_back(time_scans(sim, poses, threads));
            rec.seconds += times.back();
        }
        rec.scans_per_second = static_cast<double>(a.scans) * reps / rec.seconds;
        csv << bench_csv_row(rec) << '\n';
        csv.flush();
        medians.push_back(median(times));
        actual.push_back(n_faces);
    }
    for (std::size_t i = 1; i < medians.size(); ++i) {
        std::cerr << "ratio " << actual[i] << "/" << actual[i - 1] << " faces: " << medians[i] / medians[i - 1]
                  << '\n';
    }
    return 0;
}

// ---- info -----------------------------------------------------------------

void print_geometries(const Scene& s, const std::string& prefix)
{
    for (const auto id : s.geometry_ids()) {
        const GeometryInfo g = s.geometry_info(id);
        std::cout << prefix << "geometry " << id << ": faces " << g.faces << ", dropped " << g.degenerate_dropped
                  << ", bvh depth " << g.bvh.depth << ", sah cost " << g.bvh.sah_cost << '\n';
    }
}

int run_info(const std::string& map)
{
    const auto scene = load_map(map);
    const Aabb b = scene->bounds();
    std::cout << "map: " << map << '\n'
              << "geometries: " << scene->geometry_count() << '\n'
              << "instances: " << scene->instance_count() << '\n'
              << "unique faces: " << scene->stored_face_count() << '\n'
              << "instanced faces: " << scene->instanced_face_count() << '\n'
              << "bounds: [" << b.min.x << ", " << b.min.y << ", " << b.min.z << "] .. [" << b.max.x << ", "
              << b.max.y << ", " << b.max.z << "]\n";
    print_geometries(*scene, "");
    std::map<const Scene*, std::size_t> subs;
    for (const auto id : scene->instance_ids()) {
        const Scene* sub = scene->instance_target(id).get();
        if (subs.emplace(sub, subs.size()).second) {
            print_geometries(*sub, "sub-scene " + std::to_string(subs[sub]) + " ");
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Range-sensor simulation against triangle-mesh maps"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate scans and write a point cloud");
    simulate->add_option("--map", sim.map, "Mesh file, multi-object OBJ or directory")->required();
    simulate->add_option("--sensor", sim.sensor, "Sensor TOML (default: VLP-16)");
    simulate->add_option("--poses", sim.poses, "Pose CSV x,y,z,qx,qy,qz,qw")->required();
    simulate->add_option("--attrs", sim.attrs, "hits,ranges,points,normals,prim_ids,geom_ids,inst_ids or all")
        ->capture_default_str();
    simulate->add_option("--out", sim.out, "Output file")->required();
    simulate->add_option("--noise", sim.noise, "gaussian:sigma=S | relgaussian:a=A,b=B,exp=E | dust:rho=R");
    simulate->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
    simulate->add_option("--format", sim.format, "ply or csv (default: from --out)");
    simulate->add_flag("--per-pose", sim.per_pose, "One file per pose");
    simulate->add_flag("--hits-only", sim.hits_only, "Skip misses");
    simulate->add_flag("--deterministic", sim.deterministic, "Omit the timestamp comment");
    simulate->add_option("--threads", sim.threads, "Worker threads (0: all cores; env MESHRAY_THREADS)");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
    bench_cmd->require_subcommand(1);
    auto* scans = bench_cmd->add_subcommand("scans", "Wall time against the number of scans");
    scans->add_option("--map", bench.map, "Map to scan");
    scans->add_option("--sphere-faces", bench.sphere_faces, "Use a synthetic icosphere of at least N faces");
    scans->add_option("--counts", bench.counts, "Scan counts")->capture_default_str();
    scans->add_option("--reps", bench.reps, "Repetitions per count (default 5)");
    auto* mapsize = bench_cmd->add_subcommand("mapsize", "Wall time against the map size");
    mapsize->add_option("--faces", bench.faces, "Icosphere face counts")->capture_default_str();
    mapsize->add_option("--scans", bench.scans, "Scans per run")->capture_default_str();
    mapsize->add_option("--reps", bench.reps, "Repetitions per size (default 3)");
    for (auto* c : {scans, mapsize}) {
        c->add_option("--sensor", bench.sensor, "Sensor TOML (default: VLP-16)");
        c->add_option("--seed", bench.seed, "Pose sampling seed")->capture_default_str();
        c->add_option("--out", bench.out, "CSV file (default: stdout)");
        c->add_option("--threads", bench.threads, "Worker threads (0: all cores; env MESHRAY_THREADS)");
    }

    std::string info_map;
    auto* info = app.add_subcommand("info", "Describe a map");
    info->add_option("--map", info_map, "Mesh file, multi-object OBJ or directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUser;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (scans->parsed()) return run_bench_scans(bench);
        if (mapsize->parsed()) return run_bench_mapsize(bench);
        if (info->parsed()) {
            if (info_map.empty()) {
                std::cerr << info->help();
                return kExitUser;
            }
            return run_info(info_map);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::DirtyScene || e.code() == ErrorCode::CountMismatch ? kExitInternal
                                                                                           : kExitUser;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitUser;
}
