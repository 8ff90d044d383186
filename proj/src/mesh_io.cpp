#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "touchloc/mesh.hpp"

namespace touchloc {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open mesh file '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line,
                              const std::string& what) {
  throw MeshError(path.string() + ":" + std::to_string(line) + ": " + what);
}

// OBJ: "v x y z" and "f a b c ..." (polygons fan-triangulated; "a/b/c" and
// negative indices accepted). Everything else is ignored.
TriMesh parse_obj(const std::filesystem::path& path, const std::string& text) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<Face> faces;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) parse_error(path, lineno, "vertex needs three coordinates");
      verts.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long idx;
        try {
          std::size_t used = 0;
          idx = std::stol(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          parse_error(path, lineno, "bad face index '" + tok + "'");
        }
        if (idx < 0) idx += static_cast<long>(verts.size()) + 1;
        if (idx < 1 || idx > static_cast<long>(verts.size()))
          parse_error(path, lineno, "face index " + head + " out of range");
        poly.push_back(static_cast<std::uint32_t>(idx - 1));
      }
      if (poly.size() < 3) parse_error(path, lineno, "face needs at least three vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k)
        faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  if (verts.empty() || faces.empty()) throw MeshError(path.string() + ": empty mesh");
  return make_mesh(std::move(verts), std::move(faces), path.stem().string());
}

TriMesh parse_stl_binary(const std::filesystem::path& path, const std::string& data) {
  if (data.size() < 84) throw MeshError(path.string() + ": truncated binary STL header");
  std::uint32_t count;
  std::memcpy(&count, data.data() + 80, 4);
  const std::size_t expected = 84 + static_cast<std::size_t>(count) * 50;
  if (data.size() < expected)
    throw MeshError(path.string() + ": binary STL declares " + std::to_string(count) +
                    " triangles but is truncated");
  if (count == 0) throw MeshError(path.string() + ": empty mesh");
  std::vector<Eigen::Vector3d> verts;
  std::vector<Face> faces;
  verts.reserve(count * 3);
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* rec = data.data() + 84 + static_cast<std::size_t>(i) * 50 + 12;
    for (int k = 0; k < 3; ++k) {
      float xyz[3];
      std::memcpy(xyz, rec + 12 * k, 12);
      verts.emplace_back(xyz[0], xyz[1], xyz[2]);
    }
    faces.push_back({3 * i, 3 * i + 1, 3 * i + 2});
  }
  TriMesh soup = make_mesh(std::move(verts), std::move(faces), path.stem().string());
  return weld_vertices(soup, 0.0);
}

TriMesh parse_stl_ascii(const std::filesystem::path& path, const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  std::vector<Eigen::Vector3d> verts;
  std::vector<Face> faces;
  std::vector<Eigen::Vector3d> facet;
  bool ended = false;
  while (in >> tok) {
    tok = lower(tok);
    if (tok == "vertex") {
      double x, y, z;
      if (!(in >> x >> y >> z)) throw MeshError(path.string() + ": truncated STL vertex");
      facet.emplace_back(x, y, z);
    } else if (tok == "endfacet") {
      if (facet.size() != 3) throw MeshError(path.string() + ": STL facet without 3 vertices");
      const auto base = static_cast<std::uint32_t>(verts.size());
      verts.insert(verts.end(), facet.begin(), facet.end());
      faces.push_back({base, base + 1, base + 2});
      facet.clear();
    } else if (tok == "endsolid") {
      ended = true;
      break;
    }
  }
  if (!ended || !facet.empty()) throw MeshError(path.string() + ": truncated ASCII STL");
  if (faces.empty()) throw MeshError(path.string() + ": empty mesh");
  TriMesh soup = make_mesh(std::move(verts), std::move(faces), path.stem().string());
  return weld_vertices(soup, 0.0);
}

TriMesh parse_stl(const std::filesystem::path& path, const std::string& data) {
  // "solid" prefixed binary files exist, so also check that the size matches.
  bool ascii = data.size() >= 5 && lower(data.substr(0, 5)) == "solid";
  if (ascii && data.size() >= 84) {
    std::uint32_t count;
    std::memcpy(&count, data.data() + 80, 4);
    if (84 + static_cast<std::size_t>(count) * 50 == data.size()) ascii = false;
  }
  return ascii ? parse_stl_ascii(path, data) : parse_stl_binary(path, data);
}

TriMesh parse_ply(const std::filesystem::path& path, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw MeshError(path.string() + ": missing PLY magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;
  };
  std::vector<Element> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw MeshError(path.string() + ": only ASCII PLY is supported");
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw MeshError(path.string() + ": property before element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it;
      }
      ls >> name;
      elements.back().props.push_back(name);
    } else if (kw == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw MeshError(path.string() + ": truncated PLY header");

  std::vector<Eigen::Vector3d> verts;
  std::vector<Face> faces;
  for (const Element& e : elements) {
    for (std::size_t i = 0; i < e.count; ++i) {
      if (!std::getline(in, line))
        throw MeshError(path.string() + ": truncated PLY body in element '" + e.name + "'");
      std::istringstream ls(line);
      if (e.name == "vertex") {
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        auto find = [&](const char* n) {
          auto it = std::find(e.props.begin(), e.props.end(), n);
          if (it == e.props.end()) throw MeshError(path.string() + ": PLY vertex lacks " + n);
          const auto k = static_cast<std::size_t>(it - e.props.begin());
          if (k >= vals.size()) throw MeshError(path.string() + ": short PLY vertex line");
          return vals[k];
        };
        verts.emplace_back(find("x"), find("y"), find("z"));
      } else if (e.name == "face") {
        std::size_t n;
        if (!(ls >> n)) throw MeshError(path.string() + ": bad PLY face line");
        std::vector<std::uint32_t> poly(n);
        for (auto& idx : poly)
          if (!(ls >> idx)) throw MeshError(path.string() + ": short PLY face line");
        if (n < 3) throw MeshError(path.string() + ": PLY face with fewer than 3 vertices");
        for (std::size_t k = 1; k + 1 < n; ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  if (verts.empty() || faces.empty()) throw MeshError(path.string() + ": empty mesh");
  return make_mesh(std::move(verts), std::move(faces), path.stem().string());
}

}  // namespace

TriMesh load_mesh(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  const std::string data = read_file(path);
  if (ext == ".obj") return parse_obj(path, data);
  if (ext == ".stl") return parse_stl(path, data);
  if (ext == ".ply") return parse_ply(path, data);
  throw MeshError("unsupported mesh format '" + ext + "' for " + path.string());
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "# " << mesh.name << "\n";
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Face& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

}  // namespace touchloc
