#include "meshray/assets.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "meshray/csv.hpp"
#include "meshray/error.hpp"
#include "meshray/toml_lite.hpp"

namespace meshray {

static_assert(std::endian::native == std::endian::little, "binary mesh I/O assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

[[noreturn]] void parse_error(const fs::path& path, const std::string& where, const std::string& msg)
{
    throw Error(ErrorCode::ParseError, path.string() + ":" + where + ": " + msg);
}

std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out)
{
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

// Iterates lines of a text buffer, tracking 1-based line numbers.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    bool next(std::string_view& line)
    {
        if (pos_ >= text_.size()) return false;
        const auto nl = text_.find('\n', pos_);
        const auto end = nl == std::string_view::npos ? text_.size() : nl;
        line = text_.substr(pos_, end - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = end + 1;
        ++line_no_;
        return true;
    }
    std::size_t line_no() const { return line_no_; }
    std::size_t offset() const { return pos_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

void fan_triangulate(const std::vector<std::uint32_t>& poly, std::vector<Face>& faces)
{
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

// ---------------------------------------------------------------- OBJ

struct ObjObject {
    std::string name;
    std::vector<Face> faces;  // indices into the file-global vertex list
};

struct ObjData {
    std::vector<Vec3> vertices;
    std::vector<ObjObject> objects;
};

ObjData parse_obj(const fs::path& path)
{
    const std::string text = read_file(path);
    ObjData data;
    std::map<std::string, std::size_t> by_name;
    std::size_t current = static_cast<std::size_t>(-1);
    auto select = [&](const std::string& name) {
        auto [it, inserted] = by_name.try_emplace(name, data.objects.size());
        if (inserted) data.objects.push_back({name, {}});
        current = it->second;
    };

    struct PendingFace {
        std::vector<std::int64_t> raw;
        std::size_t line;
        std::size_t vertex_count;  // vertices defined before this face
        std::size_t object;
    };

    LineReader reader(text);
    std::string_view line;
    std::vector<std::uint32_t> poly;
    while (reader.next(line)) {
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0].front() == '#') continue;
        const std::string where = std::to_string(reader.line_no());
        if (tok[0] == "v") {
            if (tok.size() < 4) parse_error(path, where, "vertex needs 3 coordinates");
            Vec3 v;
            for (int a = 0; a < 3; ++a) {
                if (!parse_number(tok[1 + a], v[a])) parse_error(path, where, "invalid coordinate");
            }
            data.vertices.push_back(v);
        } else if (tok[0] == "o") {
            std::string name;
            for (std::size_t i = 1; i < tok.size(); ++i) name += (i > 1 ? " " : "") + std::string(tok[i]);
            select(name);
        } else if (tok[0] == "f") {
            if (tok.size() < 4) parse_error(path, where, "face needs at least 3 vertices");
            if (current == static_cast<std::size_t>(-1)) select(path.stem().string());
            poly.clear();
            const auto n = static_cast<std::int64_t>(data.vertices.size());
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const std::string_view ref = tok[i].substr(0, tok[i].find('/'));
                std::int64_t idx = 0;
                if (!parse_number(ref, idx) || idx == 0) parse_error(path, where, "invalid vertex reference");
                const std::int64_t resolved = idx > 0 ? idx - 1 : n + idx;
                if (resolved < 0 || resolved >= n) {
                    parse_error(path, where,
                                "face references vertex " + std::to_string(idx) + " of " + std::to_string(n));
                }
                poly.push_back(static_cast<std::uint32_t>(resolved));
            }
            fan_triangulate(poly, data.objects[current].faces);
        }
    }
    return data;
}

// Keeps only vertices referenced by `faces`, remapping indices.
Mesh compact(const std::vector<Vec3>& vertices, const std::vector<Face>& faces)
{
    Mesh m;
    std::unordered_map<std::uint32_t, std::uint32_t> remap;
    m.faces.reserve(faces.size());
    for (const Face& f : faces) {
        Face out;
        for (int k = 0; k < 3; ++k) {
            auto [it, inserted] = remap.try_emplace(f[k], static_cast<std::uint32_t>(m.vertices.size()));
            if (inserted) m.vertices.push_back(vertices[f[k]]);
            out[k] = it->second;
        }
        m.faces.push_back(out);
    }
    return m;
}

// ---------------------------------------------------------------- PLY

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<PlyType> ply_type(std::string_view s)
{
    if (s == "char" || s == "int8") return PlyType::I8;
    if (s == "uchar" || s == "uint8") return PlyType::U8;
    if (s == "short" || s == "int16") return PlyType::I16;
    if (s == "ushort" || s == "uint16") return PlyType::U16;
    if (s == "int" || s == "int32") return PlyType::I32;
    if (s == "uint" || s == "uint32") return PlyType::U32;
    if (s == "float" || s == "float32") return PlyType::F32;
    if (s == "double" || s == "float64") return PlyType::F64;
    return std::nullopt;
}

std::size_t ply_size(PlyType t)
{
    switch (t) {
    case PlyType::I8:
    case PlyType::U8: return 1;
    case PlyType::I16:
    case PlyType::U16: return 2;
    case PlyType::I32:
    case PlyType::U32:
    case PlyType::F32: return 4;
    case PlyType::F64: return 8;
    }
    return 0;
}

double ply_read_binary(const char* p, PlyType t)
{
    switch (t) {
    case PlyType::I8: return static_cast<std::int8_t>(*p);
    case PlyType::U8: return static_cast<std::uint8_t>(*p);
    case PlyType::I16: {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    case PlyType::U16: {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    case PlyType::I32: {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    case PlyType::U32: {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    case PlyType::F32: {
        float v;
        std::memcpy(&v, p, 4);
        return v;
    }
    case PlyType::F64: {
        double v;
        std::memcpy(&v, p, 8);
        return v;
    }
    }
    return 0.0;
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::F32;
    bool is_list = false;
    PlyType count_type = PlyType::U8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

Mesh parse_ply(const fs::path& path)
{
    const std::string text = read_file(path);
    LineReader reader(text);
    std::string_view line;
    if (!reader.next(line) || line != "ply") parse_error(path, "1", "missing 'ply' magic");

    bool binary = false;
    std::vector<PlyElement> elements;
    bool header_done = false;
    while (reader.next(line)) {
        const auto tok = split_ws(line);
        const std::string where = std::to_string(reader.line_no());
        if (tok.empty()) continue;
        if (tok[0] == "format") {
            if (tok.size() < 2) parse_error(path, where, "malformed format line");
            if (tok[1] == "ascii") {
                binary = false;
            } else if (tok[1] == "binary_little_endian") {
                binary = true;
            } else if (tok[1] == "binary_big_endian") {
                throw Error(ErrorCode::UnsupportedFeature, path.string() + ": PLY binary_big_endian");
            } else {
                parse_error(path, where, "unknown format '" + std::string(tok[1]) + "'");
            }
        } else if (tok[0] == "comment" || tok[0] == "obj_info") {
            continue;
        } else if (tok[0] == "element") {
            std::size_t count = 0;
            if (tok.size() != 3 || !parse_number(tok[2], count)) parse_error(path, where, "malformed element line");
            elements.push_back({std::string(tok[1]), count, {}});
        } else if (tok[0] == "property") {
            if (elements.empty()) parse_error(path, where, "property before element");
            PlyProperty prop;
            if (tok.size() == 5 && tok[1] == "list") {
                auto ct = ply_type(tok[2]);
                auto it = ply_type(tok[3]);
                if (!ct || !it) parse_error(path, where, "unknown list type");
                prop = {std::string(tok[4]), *it, true, *ct};
            } else if (tok.size() == 3) {
                auto t = ply_type(tok[1]);
                if (!t) parse_error(path, where, "unknown property type '" + std::string(tok[1]) + "'");
                prop = {std::string(tok[2]), *t, false, PlyType::U8};
            } else {
                parse_error(path, where, "malformed property line");
            }
            elements.back().props.push_back(prop);
        } else if (tok[0] == "end_header") {
            header_done = true;
            break;
        } else {
            parse_error(path, where, "unexpected header line '" + std::string(tok[0]) + "'");
        }
    }
    if (!header_done) parse_error(path, std::to_string(reader.line_no()), "missing end_header");

    Mesh mesh;
    std::vector<std::uint32_t> poly;
    std::size_t offset = reader.offset();

    for (const PlyElement& el : elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        int xyz[3] = {-1, -1, -1};
        int indices_prop = -1;
        for (std::size_t p = 0; p < el.props.size(); ++p) {
            const auto& name = el.props[p].name;
            if (is_vertex && name == "x") xyz[0] = static_cast<int>(p);
            if (is_vertex && name == "y") xyz[1] = static_cast<int>(p);
            if (is_vertex && name == "z") xyz[2] = static_cast<int>(p);
            if (is_face && el.props[p].is_list && (name == "vertex_indices" || name == "vertex_index")) {
                indices_prop = static_cast<int>(p);
            }
        }
        if (is_vertex && (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0)) {
            parse_error(path, "header", "vertex element lacks x/y/z");
        }
        if (is_face && indices_prop < 0) parse_error(path, "header", "face element lacks vertex_indices");

        for (std::size_t r = 0; r < el.count; ++r) {
            Vec3 v;
            poly.clear();
            std::string where;
            if (binary) {
                where = "offset " + std::to_string(offset);
                for (std::size_t p = 0; p < el.props.size(); ++p) {
                    const PlyProperty& prop = el.props[p];
                    std::size_t n = 1;
                    if (prop.is_list) {
                        if (offset + ply_size(prop.count_type) > text.size()) parse_error(path, where, "truncated file");
                        n = static_cast<std::size_t>(ply_read_binary(text.data() + offset, prop.count_type));
                        offset += ply_size(prop.count_type);
                    }
                    if (offset + n * ply_size(prop.type) > text.size()) parse_error(path, where, "truncated file");
                    for (std::size_t k = 0; k < n; ++k) {
                        const double value = ply_read_binary(text.data() + offset, prop.type);
                        offset += ply_size(prop.type);
                        if (static_cast<int>(p) == indices_prop) poly.push_back(static_cast<std::uint32_t>(value));
                        for (int a = 0; a < 3; ++a) {
                            if (static_cast<int>(p) == xyz[a]) v[a] = value;
                        }
                    }
                }
            } else {
                if (!reader.next(line)) parse_error(path, std::to_string(reader.line_no()), "unexpected end of file");
                where = std::to_string(reader.line_no());
                const auto tok = split_ws(line);
                std::size_t t = 0;
                for (std::size_t p = 0; p < el.props.size(); ++p) {
                    const PlyProperty& prop = el.props[p];
                    std::size_t n = 1;
                    if (prop.is_list) {
                        if (t >= tok.size() || !parse_number(tok[t++], n)) parse_error(path, where, "bad list count");
                    }
                    for (std::size_t k = 0; k < n; ++k) {
                        double value = 0.0;
                        if (t >= tok.size() || !parse_number(tok[t++], value)) parse_error(path, where, "bad value");
                        if (static_cast<int>(p) == indices_prop) poly.push_back(static_cast<std::uint32_t>(value));
                        for (int a = 0; a < 3; ++a) {
                            if (static_cast<int>(p) == xyz[a]) v[a] = value;
                        }
                    }
                }
            }
            if (is_vertex) {
                mesh.vertices.push_back(v);
            } else if (is_face) {
                if (poly.size() < 3) parse_error(path, where, "face with fewer than 3 vertices");
                for (std::uint32_t i : poly) {
                    if (i >= mesh.vertices.size()) {
                        parse_error(path, where,
                                    "face references vertex " + std::to_string(i) + " of " +
                                        std::to_string(mesh.vertices.size()));
                    }
                }
                fan_triangulate(poly, mesh.faces);
            }
        }
    }
    return mesh;
}

// ---------------------------------------------------------------- STL

struct VertexKey {
    std::uint64_t x, y, z;
    bool operator==(const VertexKey&) const = default;
};

struct VertexKeyHash {
    std::size_t operator()(const VertexKey& k) const
    {
        return std::hash<std::uint64_t>{}(k.x * 0x9E3779B97F4A7C15ull ^ (k.y + 0x632BE59BD9B4E019ull) * 31 ^ k.z);
    }
};

class VertexWelder {
public:
    explicit VertexWelder(Mesh& mesh) : mesh_(mesh) {}
    std::uint32_t add(const Vec3& v)
    {
        const VertexKey key{std::bit_cast<std::uint64_t>(v.x), std::bit_cast<std::uint64_t>(v.y),
                            std::bit_cast<std::uint64_t>(v.z)};
        auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(mesh_.vertices.size()));
        if (inserted) mesh_.vertices.push_back(v);
        return it->second;
    }

private:
    Mesh& mesh_;
    std::unordered_map<VertexKey, std::uint32_t, VertexKeyHash> index_;
};

Mesh parse_stl(const fs::path& path)
{
    const std::string data = read_file(path);
    Mesh mesh;
    VertexWelder weld(mesh);

    bool binary = false;
    if (data.size() >= 84) {
        std::uint32_t n = 0;
        std::memcpy(&n, data.data() + 80, 4);
        binary = data.size() == 84 + 50 * static_cast<std::size_t>(n);
    }
    if (!binary && data.compare(0, 5, "solid") != 0) {
        parse_error(path, "offset 0", "neither binary STL nor ascii 'solid'");
    }

    if (binary) {
        std::uint32_t n = 0;
        std::memcpy(&n, data.data() + 80, 4);
        for (std::uint32_t f = 0; f < n; ++f) {
            const char* rec = data.data() + 84 + 50 * static_cast<std::size_t>(f);
            Face face;
            for (int k = 0; k < 3; ++k) {
                float c[3];
                std::memcpy(c, rec + 12 + 12 * k, 12);
                face[k] = weld.add({c[0], c[1], c[2]});
            }
            mesh.faces.push_back(face);
        }
        return mesh;
    }

    LineReader reader(data);
    std::string_view line;
    std::vector<std::uint32_t> loop;
    while (reader.next(line)) {
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        const std::string where = std::to_string(reader.line_no());
        if (tok[0] == "vertex") {
            Vec3 v;
            if (tok.size() != 4) parse_error(path, where, "vertex needs 3 coordinates");
            for (int a = 0; a < 3; ++a) {
                if (!parse_number(tok[1 + a], v[a])) parse_error(path, where, "invalid coordinate");
            }
            loop.push_back(weld.add(v));
        } else if (tok[0] == "outer") {
            loop.clear();
        } else if (tok[0] == "endloop") {
            if (loop.size() < 3) parse_error(path, where, "facet with fewer than 3 vertices");
            fan_triangulate(loop, mesh.faces);
            loop.clear();
        }
    }
    return mesh;
}

LoadedMesh finish(Mesh mesh, std::size_t submeshes)
{
    LoadedMesh out;
    out.report.degenerate_dropped = drop_degenerate_faces(mesh);
    out.report.vertices = mesh.vertices.size();
    out.report.faces = mesh.faces.size();
    out.report.submeshes = submeshes;
    out.mesh = std::move(mesh);
    return out;
}

Transform read_placement(const toml::Table& t, const std::string& ctx)
{
    Transform tr;
    auto vec = [&](const char* key, Vec3 fallback) {
        const toml::Value* v = toml::find(t, key);
        if (!v) return fallback;
        const auto& a = v->as_array(ctx + "." + key);
        if (a.size() != 3) throw Error(ErrorCode::ParseError, ctx + "." + key + " needs 3 components");
        return Vec3{a[0].as_number(ctx), a[1].as_number(ctx), a[2].as_number(ctx)};
    };
    tr.translation = vec("position", {0, 0, 0});
    const Vec3 rpy = vec("rpy", {0, 0, 0});
    tr.rotation = Rotation::from_rpy(deg_to_rad(rpy.x), deg_to_rad(rpy.y), deg_to_rad(rpy.z));
    tr.scale = vec("scale", {1, 1, 1});
    if (!(tr.scale.x > 0 && tr.scale.y > 0 && tr.scale.z > 0)) {
        throw Error(ErrorCode::ParseError, ctx + ".scale components must be > 0");
    }
    return tr;
}

bool is_mesh_file(const fs::path& p)
{
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".obj" || ext == ".ply" || ext == ".stl";
}

}  // namespace

MeshFormat format_from_path(const fs::path& path)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") return MeshFormat::Obj;
    if (ext == ".ply") return MeshFormat::Ply;
    if (ext == ".stl") return MeshFormat::Stl;
    throw Error(ErrorCode::UnsupportedFeature, "unknown mesh extension '" + ext + "' for " + path.string());
}

LoadedMesh load_mesh(const fs::path& path, std::optional<MeshFormat> format)
{
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "no such file: " + path.string());
    switch (format.value_or(format_from_path(path))) {
    case MeshFormat::Obj: {
        ObjData data = parse_obj(path);
        Mesh mesh;
        mesh.vertices = std::move(data.vertices);
        for (auto& obj : data.objects) mesh.faces.insert(mesh.faces.end(), obj.faces.begin(), obj.faces.end());
        return finish(std::move(mesh), std::max<std::size_t>(data.objects.size(), 1));
    }
    case MeshFormat::Ply: return finish(parse_ply(path), 1);
    case MeshFormat::Stl: return finish(parse_stl(path), 1);
    }
    throw Error(ErrorCode::UnsupportedFeature, "unknown mesh format");
}

std::vector<NamedMesh> load_obj_objects(const fs::path& path, LoadReport* report)
{
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "no such file: " + path.string());
    const ObjData data = parse_obj(path);
    std::vector<NamedMesh> out;
    LoadReport rep;
    rep.vertices = data.vertices.size();
    for (const ObjObject& obj : data.objects) {
        Mesh m = compact(data.vertices, obj.faces);
        rep.degenerate_dropped += drop_degenerate_faces(m);
        rep.faces += m.faces.size();
        if (m.faces.empty()) continue;
        out.push_back({obj.name, std::move(m)});
    }
    rep.submeshes = out.size();
    if (report) *report = rep;
    return out;
}

std::shared_ptr<Scene> load_scene(const fs::path& path, std::optional<fs::path> sidecar, LoadReport* report)
{
    std::vector<NamedMesh> objects;
    LoadReport total;
    auto add_report = [&](const LoadReport& r) {
        total.vertices += r.vertices;
        total.faces += r.faces;
        total.degenerate_dropped += r.degenerate_dropped;
    };

    fs::path default_sidecar;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && is_mesh_file(entry.path())) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            LoadedMesh lm = load_mesh(f);
            add_report(lm.report);
            if (!lm.mesh.faces.empty()) objects.push_back({f.stem().string(), std::move(lm.mesh)});
        }
        default_sidecar = path / "placements.toml";
    } else {
        if (!fs::exists(path)) throw Error(ErrorCode::Io, "no such file: " + path.string());
        if (format_from_path(path) == MeshFormat::Obj) {
            LoadReport r;
            objects = load_obj_objects(path, &r);
            add_report(r);
        } else {
            LoadedMesh lm = load_mesh(path);
            add_report(lm.report);
            if (!lm.mesh.faces.empty()) objects.push_back({path.stem().string(), std::move(lm.mesh)});
        }
        default_sidecar = fs::path(path.string() + ".placements.toml");
    }
    if (objects.empty()) throw Error(ErrorCode::EmptyMesh, "no triangles found in " + path.string());
    total.submeshes = objects.size();

    const fs::path sidecar_path = sidecar.value_or(default_sidecar);
    std::vector<std::pair<std::string, Transform>> placements;
    if (sidecar || fs::exists(sidecar_path)) {
        const toml::Table root = toml::parse_file(sidecar_path.string());
        if (const toml::Value* list = toml::find(root, "instance")) {
            const auto& arr = list->as_array("instance");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string ctx = "instance[" + std::to_string(i) + "]";
                const toml::Table& t = arr[i].as_table(ctx);
                const std::string name = toml::require(t, "name", ctx).as_string(ctx + ".name");
                placements.emplace_back(name, read_placement(t, ctx));
            }
        }
    }

    auto scene = std::make_shared<Scene>();
    std::map<std::string, std::shared_ptr<Scene>> subs;
    for (const auto& [name, placement] : placements) {
        const bool known = std::any_of(objects.begin(), objects.end(), [&](const NamedMesh& o) { return o.name == name; });
        if (!known) throw Error(ErrorCode::UnknownObjectName, "placement names missing object '" + name + "'");
        subs.try_emplace(name, nullptr);
    }
    for (NamedMesh& obj : objects) {
        auto it = subs.find(obj.name);
        if (it == subs.end()) {
            scene->add_geometry(std::move(obj.mesh));
        } else if (!it->second) {
            it->second = std::make_shared<Scene>();
            it->second->add_geometry(std::move(obj.mesh));
            it->second->commit();
        } else {
            // Repeated object names fold into one sub-scene.
            it->second->add_geometry(std::move(obj.mesh));
            it->second->commit();
        }
    }
    for (const auto& [name, placement] : placements) scene->add_instance(subs.at(name), Affine::from(placement));
    scene->commit();
    if (report) *report = total;
    return scene;
}

std::vector<Transform> load_poses(const fs::path& path)
{
    const auto rows = read_numeric_csv(path, 7);
    std::vector<Transform> poses;
    poses.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        Rotation q{r[6], r[3], r[4], r[5]};
        const double n = q.norm();
        if (!(n >= 0.99 && n <= 1.01)) {
            throw Error(ErrorCode::NonUnitQuaternion,
                        path.string() + ": pose " + std::to_string(i) + " has |q| = " + std::to_string(n));
        }
        Transform t;
        t.translation = {r[0], r[1], r[2]};
        t.rotation = q.normalized();
        poses.push_back(t);
    }
    return poses;
}

void write_poses(const fs::path& path, const std::vector<Transform>& poses)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.precision(17);
    out << "x,y,z,qx,qy,qz,qw\n";
    for (const Transform& t : poses) {
        out << t.translation.x << ',' << t.translation.y << ',' << t.translation.z << ',' << t.rotation.x << ','
            << t.rotation.y << ',' << t.rotation.z << ',' << t.rotation.w << '\n';
    }
}

std::uint32_t icosphere_level(std::uint32_t target_faces)
{
    std::uint32_t level = 0;
    std::uint64_t faces = 20;
    while (faces < target_faces) {
        faces *= 4;
        ++level;
    }
    return level;
}

Mesh make_icosphere(std::uint32_t target_faces, double radius)
{
    const std::uint32_t level = icosphere_level(std::max<std::uint32_t>(target_faces, 20));
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    for (const Vec3& v : {Vec3{-1, t, 0}, Vec3{1, t, 0}, Vec3{-1, -t, 0}, Vec3{1, -t, 0}, Vec3{0, -1, t},
                          Vec3{0, 1, t}, Vec3{0, -1, -t}, Vec3{0, 1, -t}, Vec3{t, 0, -1}, Vec3{t, 0, 1},
                          Vec3{-t, 0, -1}, Vec3{-t, 0, 1}}) {
        m.vertices.push_back(normalized(v) * radius);
    }
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},   {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

    for (std::uint32_t l = 0; l < level; ++l) {
        std::unordered_map<std::uint64_t, std::uint32_t> midpoints;
        midpoints.reserve(m.faces.size() * 2);
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
            auto [it, inserted] = midpoints.try_emplace(key, static_cast<std::uint32_t>(m.vertices.size()));
            if (inserted) m.vertices.push_back(normalized(m.vertices[a] + m.vertices[b]) * radius);
            return it->second;
        };
        std::vector<Face> next;
        next.reserve(m.faces.size() * 4);
        for (const Face& f : m.faces) {
            const std::uint32_t ab = midpoint(f[0], f[1]);
            const std::uint32_t bc = midpoint(f[1], f[2]);
            const std::uint32_t ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    return m;
}

double icosphere_chord_error_bound(std::uint32_t level)
{
    const std::uint64_t faces = 20ull << (2 * level);
    const Mesh m = make_icosphere(static_cast<std::uint32_t>(faces), 1.0);
    double longest2 = 0.0;
    for (const Face& f : m.faces) {
        for (int k = 0; k < 3; ++k) {
            const Vec3 e = m.vertices[f[(k + 1) % 3]] - m.vertices[f[k]];
            longest2 = std::max(longest2, dot(e, e));
        }
    }
    return 1.0 - std::sqrt(1.0 - longest2 / 3.0);
}

Mesh make_ground_plane(double half_extent)
{
    if (!(half_extent > 0.0)) throw Error(ErrorCode::InvalidSpec, "ground plane half extent must be > 0");
    const double h = half_extent;
    Mesh m;
    m.vertices = {{-h, -h, 0.0}, {h, -h, 0.0}, {h, h, 0.0}, {-h, h, 0.0}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

void write_ply_mesh(const fs::path& path, const Mesh& mesh)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "element face " << mesh.faces.size() << "\n"
        << "property list uchar uint vertex_indices\nend_header\n";
    for (const Vec3& v : mesh.vertices) {
        const double xyz[3] = {v.x, v.y, v.z};
        out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
    }
    for (const Face& f : mesh.faces) {
        const std::uint8_t n = 3;
        out.write(reinterpret_cast<const char*>(&n), 1);
        out.write(reinterpret_cast<const char*>(f.data()), 12);
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace meshray
