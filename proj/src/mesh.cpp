#include "lodgpe/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <unordered_map>

#include "lodgpe/errors.hpp"

namespace lodgpe {

void Rect::validate() const {
  if (!(std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) && std::isfinite(ymax)))
    throw ConfigError("domain bounds must be finite");
  if (!(xmax > xmin) || !(ymax > ymin))
    throw ConfigError("domain requires xmax > xmin and ymax > ymin");
}

double TriMesh::signed_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point& a = nodes[tri[0]];
  const Point& b = nodes[tri[1]];
  const Point& c = nodes[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

namespace {

bool on_boundary(const Rect& d, const Point& p) {
  const double tol = 1e-12 * std::max(d.width(), d.height());
  return std::abs(p.x - d.xmin) <= tol || std::abs(p.x - d.xmax) <= tol ||
         std::abs(p.y - d.ymin) <= tol || std::abs(p.y - d.ymax) <= tol;
}

double longest_edge(const TriMesh& m) {
  double h = 0.0;
  for (const auto& t : m.triangles) {
    for (int e = 0; e < 3; ++e) {
      const Point& a = m.nodes[t[e]];
      const Point& b = m.nodes[t[(e + 1) % 3]];
      h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
    }
  }
  return h;
}

}  // namespace

TriMesh uniform_mesh(const Rect& domain, int cells_per_side) {
  domain.validate();
  if (cells_per_side < 1) throw ConfigError("uniform_mesh: cells_per_side must be >= 1");

  const int n = cells_per_side;
  TriMesh m;
  m.domain = domain;
  m.cells_per_side = n;
  m.level = 0;

  const double hx = domain.width() / n;
  const double hy = domain.height() / n;
  m.nodes.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      // Pin the last row/column to the exact bounds.
      const double x = (i == n) ? domain.xmax : domain.xmin + i * hx;
      const double y = (j == n) ? domain.ymax : domain.ymin + j * hy;
      m.nodes.push_back({x, y});
      m.boundary.push_back(i == 0 || j == 0 || i == n || j == n);
    }
  }

  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  m.triangles.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int p00 = id(i, j), p10 = id(i + 1, j), p01 = id(i, j + 1), p11 = id(i + 1, j + 1);
      m.triangles.push_back({p00, p10, p11});
      m.triangles.push_back({p00, p11, p01});
    }
  }
  m.ancestor.resize(m.triangles.size());
  for (std::size_t t = 0; t < m.ancestor.size(); ++t) m.ancestor[t] = static_cast<int>(t);
  m.mesh_size = longest_edge(m);
  return m;
}

namespace {

TriMesh refine_once(const TriMesh& in) {
  TriMesh out;
  out.domain = in.domain;
  out.cells_per_side = 2 * in.cells_per_side;
  out.level = in.level + 1;
  out.nodes = in.nodes;
  out.boundary = in.boundary;

  const std::size_t nn = in.nodes.size();
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(3 * in.triangles.size() / 2 + 8);
  auto mid = [&](int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    const std::uint64_t key = lo * nn + hi;
    auto [it, inserted] = midpoint.try_emplace(key, static_cast<int>(out.nodes.size()));
    if (inserted) {
      const Point p{0.5 * (in.nodes[a].x + in.nodes[b].x), 0.5 * (in.nodes[a].y + in.nodes[b].y)};
      out.nodes.push_back(p);
      out.boundary.push_back(on_boundary(in.domain, p));
    }
    return it->second;
  };

  out.triangles.reserve(4 * in.triangles.size());
  out.ancestor.reserve(4 * in.triangles.size());
  for (std::size_t t = 0; t < in.triangles.size(); ++t) {
    const auto [a, b, c] = in.triangles[t];
    const int ab = mid(a, b);
    const int bc = mid(b, c);
    const int ca = mid(c, a);
    out.triangles.push_back({a, ab, ca});
    out.triangles.push_back({ab, b, bc});
    out.triangles.push_back({ca, bc, c});
    out.triangles.push_back({ab, bc, ca});
    for (int k = 0; k < 4; ++k) out.ancestor.push_back(in.ancestor[t]);
  }
  out.mesh_size = longest_edge(out);
  return out;
}

std::array<double, 3> barycentric(const TriMesh& m, int t, const Point& p) {
  const auto& tri = m.triangles[t];
  const Point& a = m.nodes[tri[0]];
  const Point& b = m.nodes[tri[1]];
  const Point& c = m.nodes[tri[2]];
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
  double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
  // Nodes of nested meshes sit on dyadic points; snap round-off.
  auto snap = [](double v) {
    if (std::abs(v) < 1e-14) return 0.0;
    if (std::abs(v - 1.0) < 1e-14) return 1.0;
    return v;
  };
  l1 = snap(l1);
  l2 = snap(l2);
  return {snap(1.0 - l1 - l2), l1, l2};
}

}  // namespace

TriMesh refine(const TriMesh& mesh, int times) {
  if (times < 1) throw ConfigError("refine: times must be >= 1");
  TriMesh out = refine_once(mesh);
  for (int k = 1; k < times; ++k) out = refine_once(out);
  return out;
}

namespace {

MeshHierarchy make_hierarchy(TriMesh coarse, TriMesh fine, int refinements) {
  MeshHierarchy h;
  h.refinements = refinements;
  h.child_map.assign(fine.num_nodes(), ChildLocation{});
  for (std::size_t t = 0; t < fine.num_triangles(); ++t) {
    for (int v : fine.triangles[t]) {
      auto& loc = h.child_map[v];
      if (loc.triangle >= 0) continue;
      loc.triangle = fine.ancestor[t];
      loc.bary = barycentric(coarse, loc.triangle, fine.nodes[v]);
    }
  }
  h.coarse = std::move(coarse);
  h.fine = std::move(fine);
  return h;
}

}  // namespace

MeshHierarchy build_hierarchy(const Rect& domain, int coarse_cells, int refinements) {
  if (refinements < 1) throw ConfigError("build_hierarchy: refinements must be >= 1");
  TriMesh coarse = uniform_mesh(domain, coarse_cells);
  TriMesh fine = refine(coarse, refinements);
  return make_hierarchy(std::move(coarse), std::move(fine), refinements);
}

MeshHierarchy identity_hierarchy(const Rect& domain, int cells) {
  TriMesh coarse = uniform_mesh(domain, cells);
  TriMesh fine = coarse;
  return make_hierarchy(std::move(coarse), std::move(fine), 0);
}

DofMap DofMap::interior(const TriMesh& mesh) {
  DofMap d;
  d.node_to_dof.assign(mesh.num_nodes(), -1);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    if (mesh.boundary[i]) continue;
    d.node_to_dof[i] = static_cast<int>(d.dof_to_node.size());
    d.dof_to_node.push_back(static_cast<int>(i));
  }
  return d;
}

DofMap DofMap::all_nodes(const TriMesh& mesh) {
  DofMap d;
  d.node_to_dof.resize(mesh.num_nodes());
  d.dof_to_node.resize(mesh.num_nodes());
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    d.node_to_dof[i] = static_cast<int>(i);
    d.dof_to_node[i] = static_cast<int>(i);
  }
  return d;
}

std::vector<int> match_nodes(const TriMesh& a, const TriMesh& b) {
  if (!(a.domain == b.domain) || a.num_nodes() != b.num_nodes())
    throw ConfigError("match_nodes: meshes do not share a node set");
  const int n = std::max(a.cells_per_side, b.cells_per_side);
  const double hx = b.domain.width() / n;
  const double hy = b.domain.height() / n;
  auto key = [&](const Point& p) -> long long {
    const double fx = (p.x - b.domain.xmin) / hx;
    const double fy = (p.y - b.domain.ymin) / hy;
    const long long ix = std::llround(fx);
    const long long iy = std::llround(fy);
    if (std::abs(fx - ix) > 1e-8 || std::abs(fy - iy) > 1e-8)
      throw ConfigError("match_nodes: node off the common grid");
    return iy * (n + 1) + ix;
  };
  std::unordered_map<long long, int> index;
  index.reserve(b.num_nodes());
  for (std::size_t i = 0; i < b.num_nodes(); ++i) index.emplace(key(b.nodes[i]), static_cast<int>(i));
  std::vector<int> perm(a.num_nodes());
  for (std::size_t i = 0; i < a.num_nodes(); ++i) {
    auto it = index.find(key(a.nodes[i]));
    if (it == index.end()) throw ConfigError("match_nodes: node sets differ");
    perm[i] = it->second;
  }
  return perm;
}

void write_mesh(std::ostream& out, const TriMesh& mesh) {
  out << std::setprecision(17);
  out << "# nodes " << mesh.num_nodes() << '\n';
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    out << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << ' ' << int(mesh.boundary[i]) << '\n';
  out << "# triangles " << mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace lodgpe
