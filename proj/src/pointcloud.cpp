#include "meshray/pointcloud.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "meshray/error.hpp"

namespace meshray {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, bool binary)
{
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

bool keep(const SimResult& r, std::size_t i, const CloudWriteOptions& o)
{
    if (!o.hits_only) return true;
    if (r.selection.hits) return r.hits[i] != 0;
    if (r.selection.ranges) return std::isfinite(r.ranges[i]);
    if (r.selection.points) return !std::isnan(r.points[3 * i]);
    if (r.selection.normals) return !std::isnan(r.normals[3 * i]);
    if (r.selection.prim_ids) return r.prim_ids[i] != kNoInstance;
    return r.geom_ids.empty() || r.geom_ids[i] != kNoInstance;
}

std::string timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

template <typename T>
void put(std::ofstream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_ply_range(const fs::path& path, const SimResult& r, std::size_t begin, std::size_t end,
                     const CloudWriteOptions& o)
{
    std::size_t count = 0;
    for (std::size_t i = begin; i < end; ++i) count += keep(r, i, o);
    const AttrSelection& s = r.selection;
    std::ofstream out = open_out(path, true);
    out << "ply\nformat binary_little_endian 1.0\n";
    if (!o.deterministic) out << "comment created " << timestamp() << "\n";
    out << "comment attributes " << s.to_string() << "\n";
    out << "element vertex " << count << "\n";
    if (s.points) out << "property float x\nproperty float y\nproperty float z\n";
    if (s.normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
    if (s.ranges) out << "property float range\n";
    if (s.hits) out << "property uchar hit\n";
    if (s.prim_ids) out << "property uint prim_id\n";
    if (s.geom_ids) out << "property uint geom_id\n";
    if (s.inst_ids) out << "property uint inst_id\n";
    out << "end_header\n";
    for (std::size_t i = begin; i < end; ++i) {
        if (!keep(r, i, o)) continue;
        if (s.points) out.write(reinterpret_cast<const char*>(&r.points[3 * i]), 12);
        if (s.normals) out.write(reinterpret_cast<const char*>(&r.normals[3 * i]), 12);
        if (s.ranges) put(out, r.ranges[i]);
        if (s.hits) put(out, r.hits[i]);
        if (s.prim_ids) put(out, r.prim_ids[i]);
        if (s.geom_ids) put(out, r.geom_ids[i]);
        if (s.inst_ids) put(out, r.inst_ids[i]);
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void append_number(std::string& line, float v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    line.append(buf, res.ptr);
}

void append_number(std::string& line, std::uint64_t v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    line.append(buf, res.ptr);
}

void write_csv_range(const fs::path& path, const SimResult& r, std::size_t begin, std::size_t end,
                     const CloudWriteOptions& o)
{
    const AttrSelection& s = r.selection;
    std::ofstream out = open_out(path, false);
    std::string header = "pose,ray";
    if (s.hits) header += ",hit";
    if (s.ranges) header += ",range";
    if (s.points) header += ",x,y,z";
    if (s.normals) header += ",nx,ny,nz";
    if (s.prim_ids) header += ",prim_id";
    if (s.geom_ids) header += ",geom_id";
    if (s.inst_ids) header += ",inst_id";
    out << header << '\n';
    std::string line;
    for (std::size_t i = begin; i < end; ++i) {
        if (!keep(r, i, o)) continue;
        line.clear();
        append_number(line, i / r.n_rays);
        line += ',';
        append_number(line, i % r.n_rays);
        auto f = [&](float v) {
            line += ',';
            append_number(line, v);
        };
        auto u = [&](std::uint64_t v) {
            line += ',';
            append_number(line, v);
        };
        if (s.hits) u(r.hits[i]);
        if (s.ranges) f(r.ranges[i]);
        if (s.points) {
            for (int k = 0; k < 3; ++k) f(r.points[3 * i + k]);
        }
        if (s.normals) {
            for (int k = 0; k < 3; ++k) f(r.normals[3 * i + k]);
        }
        if (s.prim_ids) u(r.prim_ids[i]);
        if (s.geom_ids) u(r.geom_ids[i]);
        if (s.inst_ids) u(r.inst_ids[i]);
        line += '\n';
        out << line;
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

template <typename Fn>
std::vector<fs::path> write_split(const fs::path& path, const SimResult& r, const CloudWriteOptions& o, Fn fn)
{
    std::vector<fs::path> written;
    if (!o.per_pose) {
        fn(path, 0, r.size());
        written.push_back(path);
        return written;
    }
    for (std::uint32_t p = 0; p < r.n_poses; ++p) {
        const fs::path out = per_pose_path(path, p);
        fn(out, static_cast<std::size_t>(p) * r.n_rays, static_cast<std::size_t>(p + 1) * r.n_rays);
        written.push_back(out);
    }
    return written;
}

}  // namespace

fs::path per_pose_path(const fs::path& path, std::uint32_t index)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%06u", index);
    return path.parent_path() / (path.stem().string() + buf + path.extension().string());
}

std::vector<fs::path> write_cloud_ply(const fs::path& path, const SimResult& result, const CloudWriteOptions& options)
{
    return write_split(path, result, options, [&](const fs::path& p, std::size_t b, std::size_t e) {
        write_ply_range(p, result, b, e, options);
    });
}

std::vector<fs::path> write_cloud_csv(const fs::path& path, const SimResult& result, const CloudWriteOptions& options)
{
    return write_split(path, result, options, [&](const fs::path& p, std::size_t b, std::size_t e) {
        write_csv_range(p, result, b, e, options);
    });
}

}  // namespace meshray
