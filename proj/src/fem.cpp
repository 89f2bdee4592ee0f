#include "lodgpe/fem.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "lodgpe/errors.hpp"
#include "lodgpe/parallel.hpp"

namespace lodgpe {

const QuadRule& default_quadrature() {
  static const QuadRule rule = [] {
    constexpr double a1 = 0.445948490915964886318329253883;
    constexpr double b1 = 1.0 - 2.0 * a1;
    constexpr double w1 = 0.223381589678011465944977161161;
    constexpr double a2 = 0.091576213509770743459571463402;
    constexpr double b2 = 1.0 - 2.0 * a2;
    constexpr double w2 = 0.109951743655321867388356172172;
    QuadRule r;
    r.degree = 4;
    r.points = {{b1, a1, a1}, {a1, b1, a1}, {a1, a1, b1}, {b2, a2, a2}, {a2, b2, a2}, {a2, a2, b2}};
    r.weights = {w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

// ---------------------------------------------------------------------------
// Potential

Potential Potential::constant(double value) {
  if (!(value >= 0.0)) throw ConfigError("constant potential must be non-negative");
  Potential p;
  p.kind_ = Kind::constant;
  p.value_ = value;
  return p;
}

Potential Potential::harmonic() {
  Potential p;
  p.kind_ = Kind::harmonic;
  return p;
}

Potential Potential::checkerboard(double square_side, double low, double high) {
  if (!(square_side > 0.0)) throw ConfigError("checkerboard square_side must be positive");
  if (!(low >= 0.0) || !(high >= 0.0)) throw ConfigError("checkerboard values must be non-negative");
  Potential p;
  p.kind_ = Kind::checkerboard;
  p.side_ = square_side;
  p.low_ = low;
  p.high_ = high;
  return p;
}

Potential Potential::callable(std::function<double(double, double)> fn, std::string name) {
  if (!fn) throw ConfigError("callable potential is empty");
  Potential p;
  p.kind_ = Kind::callable;
  p.fn_ = std::move(fn);
  p.name_ = std::move(name);
  return p;
}

double Potential::operator()(double x, double y) const {
  switch (kind_) {
    case Kind::constant:
      return value_;
    case Kind::harmonic:
      return 0.5 * (x * x + y * y);
    case Kind::checkerboard: {
      const auto i = static_cast<long long>(std::floor(x / side_));
      const auto j = static_cast<long long>(std::floor(y / side_));
      return ((i + j) % 2 == 0) ? low_ : high_;
    }
    case Kind::callable:
      return fn_(x, y);
  }
  return 0.0;
}

std::string Potential::descriptor() const {
  std::ostringstream s;
  s << std::setprecision(17);
  switch (kind_) {
    case Kind::constant:
      s << "constant(value=" << value_ << ")";
      break;
    case Kind::harmonic:
      s << "harmonic";
      break;
    case Kind::checkerboard:
      s << "checkerboard(side=" << side_ << ",low=" << low_ << ",high=" << high_ << ")";
      break;
    case Kind::callable:
      s << "callable(" << name_ << ")";
      break;
  }
  return s.str();
}

void Potential::check_alignment(const TriMesh& mesh) const {
  if (kind_ != Kind::checkerboard) return;
  const double tol = 1e-10 * side_;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double cx = (mesh.nodes[tri[0]].x + mesh.nodes[tri[1]].x + mesh.nodes[tri[2]].x) / 3.0;
    const double cy = (mesh.nodes[tri[0]].y + mesh.nodes[tri[1]].y + mesh.nodes[tri[2]].y) / 3.0;
    const double x0 = std::floor(cx / side_) * side_;
    const double y0 = std::floor(cy / side_) * side_;
    for (int v : tri) {
      const Point& p = mesh.nodes[v];
      if (p.x < x0 - tol || p.x > x0 + side_ + tol || p.y < y0 - tol || p.y > y0 + side_ + tol)
        throw ConfigError("checkerboard potential (side " + std::to_string(side_) +
                          ") is not aligned with the mesh (cell side " + std::to_string(mesh.cell_side()) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Element helpers

namespace {

struct Element {
  std::array<int, 3> v;
  std::array<Point, 3> p;
  double area;
  std::array<std::array<double, 2>, 3> grad;

  Point at(const std::array<double, 3>& l) const {
    return {l[0] * p[0].x + l[1] * p[1].x + l[2] * p[2].x, l[0] * p[0].y + l[1] * p[1].y + l[2] * p[2].y};
  }
};

Element element(const TriMesh& mesh, std::size_t t) {
  Element e;
  e.v = mesh.triangles[t];
  for (int k = 0; k < 3; ++k) e.p[k] = mesh.nodes[e.v[k]];
  const double det = (e.p[1].x - e.p[0].x) * (e.p[2].y - e.p[0].y) - (e.p[2].x - e.p[0].x) * (e.p[1].y - e.p[0].y);
  e.area = 0.5 * det;
  for (int k = 0; k < 3; ++k) {
    const Point& b = e.p[(k + 1) % 3];
    const Point& c = e.p[(k + 2) % 3];
    e.grad[k] = {(b.y - c.y) / det, (c.x - b.x) / det};
  }
  return e;
}

using Local = std::array<std::array<double, 3>, 3>;

/// Assembles sum over triangles of local 3x3 blocks restricted to dofs.
/// Chunked per thread; chunk buffers are concatenated in triangle order.
template <typename Kernel>
CsrMatrix assemble(const TriMesh& mesh, const DofMap& dofs, Kernel&& kernel) {
  const std::size_t nt = mesh.num_triangles();
  const unsigned nchunks = std::max(1u, std::min<unsigned>(thread_count(), static_cast<unsigned>(nt / 256 + 1)));
  std::vector<std::vector<Triplet>> buffers(nchunks);
  const std::size_t chunk = (nt + nchunks - 1) / nchunks;
  parallel_for(nchunks, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t c = lo; c < hi; ++c) {
      auto& buf = buffers[c];
      const std::size_t t0 = c * chunk;
      const std::size_t t1 = std::min(nt, t0 + chunk);
      buf.reserve(9 * (t1 > t0 ? t1 - t0 : 0));
      for (std::size_t t = t0; t < t1; ++t) {
        const Element e = element(mesh, t);
        Local loc{};
        kernel(e, loc);
        for (int i = 0; i < 3; ++i) {
          const int di = dofs.node_to_dof[e.v[i]];
          if (di < 0) continue;
          for (int j = 0; j < 3; ++j) {
            const int dj = dofs.node_to_dof[e.v[j]];
            if (dj < 0) continue;
            buf.push_back({di, dj, loc[i][j]});
          }
        }
      }
    }
  });
  std::vector<Triplet> all;
  std::size_t total = 0;
  for (const auto& b : buffers) total += b.size();
  all.reserve(total);
  for (auto& b : buffers) all.insert(all.end(), b.begin(), b.end());
  const int n = static_cast<int>(dofs.size());
  return assemble_from_triplets(n, n, std::move(all));
}

double nodal(const DofMap& dofs, const DenseVector& u, int node) {
  const int d = dofs.node_to_dof[node];
  return d < 0 ? 0.0 : u[d];
}

void require_degree(const QuadRule& quad, int degree, const char* what) {
  if (quad.degree < degree)
    throw ConfigError(std::string(what) + ": quadrature of degree " + std::to_string(degree) + " required");
}

void check_dofs(const DofMap& dofs, const DenseVector& u, const char* what) {
  if (static_cast<std::size_t>(u.size()) != dofs.size())
    throw ConfigError(std::string(what) + ": vector length " + std::to_string(u.size()) + " does not match " +
                      std::to_string(dofs.size()) + " dofs");
}

}  // namespace

FeOperators assemble_operators(const TriMesh& mesh, const Potential& potential, const QuadRule& quad) {
  return assemble_operators(mesh, potential, quad, DofMap::interior(mesh));
}

FeOperators assemble_operators(const TriMesh& mesh, const Potential& potential, const QuadRule& quad,
                               DofMap dofs) {
  require_degree(quad, 2, "assemble_operators");
  if (potential.kind() == Potential::Kind::harmonic) require_degree(quad, 4, "assemble_operators (harmonic)");
  potential.check_alignment(mesh);

  FeOperators ops;
  ops.stiffness = assemble(mesh, dofs, [](const Element& e, Local& loc) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        loc[i][j] = e.area * (e.grad[i][0] * e.grad[j][0] + e.grad[i][1] * e.grad[j][1]);
  });
  ops.mass = assemble(mesh, dofs, [](const Element& e, Local& loc) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) loc[i][j] = e.area / 12.0 * (i == j ? 2.0 : 1.0);
  });

  auto check_sign = [](double v) {
    if (!(v >= 0.0)) throw ConfigError("potential takes a negative value at a quadrature point");
  };
  if (potential.piecewise_constant()) {
    ops.potential_mass = assemble(mesh, dofs, [&](const Element& e, Local& loc) {
      const Point c = e.at({1.0 / 3, 1.0 / 3, 1.0 / 3});
      const double v = potential(c.x, c.y);
      check_sign(v);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) loc[i][j] = v * e.area / 12.0 * (i == j ? 2.0 : 1.0);
    });
  } else {
    ops.potential_mass = assemble(mesh, dofs, [&](const Element& e, Local& loc) {
      for (std::size_t q = 0; q < quad.weights.size(); ++q) {
        const auto& l = quad.points[q];
        const Point x = e.at(l);
        const double v = potential(x.x, x.y);
        check_sign(v);
        const double w = quad.weights[q] * e.area * v;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) loc[i][j] += w * (l[i] * l[j]);
      }
    });
  }
  ops.dofs = std::move(dofs);
  return ops;
}

CsrMatrix assemble_density_mass(const TriMesh& mesh, const DofMap& dofs, const DenseVector& u,
                                const QuadRule& quad) {
  require_degree(quad, 4, "assemble_density_mass");
  check_dofs(dofs, u, "assemble_density_mass");
  return assemble(mesh, dofs, [&](const Element& e, Local& loc) {
    const double u0 = nodal(dofs, u, e.v[0]), u1 = nodal(dofs, u, e.v[1]), u2 = nodal(dofs, u, e.v[2]);
    for (std::size_t q = 0; q < quad.weights.size(); ++q) {
      const auto& l = quad.points[q];
      const double uq = l[0] * u0 + l[1] * u1 + l[2] * u2;
      const double w = quad.weights[q] * e.area * uq * uq;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) loc[i][j] += w * (l[i] * l[j]);
    }
  });
}

namespace {

template <typename Integrand>
DenseVector assemble_vector(const TriMesh& mesh, const DofMap& dofs, const QuadRule& quad, Integrand&& g) {
  DenseVector out = DenseVector::Zero(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Element e = element(mesh, t);
    std::array<double, 3> loc{};
    for (std::size_t q = 0; q < quad.weights.size(); ++q) {
      const auto& l = quad.points[q];
      const double w = quad.weights[q] * e.area * g(e, l);
      for (int i = 0; i < 3; ++i) loc[i] += w * l[i];
    }
    for (int i = 0; i < 3; ++i) {
      const int d = dofs.node_to_dof[e.v[i]];
      if (d >= 0) out[d] += loc[i];
    }
  }
  return out;
}

}  // namespace

DenseVector nonlinear_load(const TriMesh& mesh, const DofMap& dofs, const DenseVector& u, const QuadRule& quad) {
  require_degree(quad, 4, "nonlinear_load");
  check_dofs(dofs, u, "nonlinear_load");
  return assemble_vector(mesh, dofs, quad, [&](const Element& e, const std::array<double, 3>& l) {
    const double uq = l[0] * nodal(dofs, u, e.v[0]) + l[1] * nodal(dofs, u, e.v[1]) + l[2] * nodal(dofs, u, e.v[2]);
    return uq * uq * uq;
  });
}

DenseVector load_vector(const TriMesh& mesh, const DofMap& dofs, const std::function<double(double, double)>& f,
                        const QuadRule& quad) {
  return assemble_vector(mesh, dofs, quad, [&](const Element& e, const std::array<double, 3>& l) {
    const Point x = e.at(l);
    return f(x.x, x.y);
  });
}

DenseVector interpolate(const TriMesh& mesh, const DofMap& dofs, const std::function<double(double, double)>& f) {
  DenseVector out(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t d = 0; d < dofs.size(); ++d) {
    const Point& p = mesh.nodes[dofs.dof_to_node[d]];
    out[static_cast<Eigen::Index>(d)] = f(p.x, p.y);
  }
  return out;
}

double l4_norm4(const TriMesh& mesh, const DofMap& dofs, const DenseVector& u, const QuadRule& quad) {
  require_degree(quad, 4, "l4_norm4");
  check_dofs(dofs, u, "l4_norm4");
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double u0 = nodal(dofs, u, tri[0]), u1 = nodal(dofs, u, tri[1]), u2 = nodal(dofs, u, tri[2]);
    if (u0 == 0.0 && u1 == 0.0 && u2 == 0.0) continue;
    double local = 0.0;
    for (std::size_t q = 0; q < quad.weights.size(); ++q) {
      const auto& l = quad.points[q];
      const double uq = l[0] * u0 + l[1] * u1 + l[2] * u2;
      const double u2q = uq * uq;
      local += quad.weights[q] * u2q * u2q;
    }
    sum += local * mesh.signed_area(t);
  }
  return sum;
}

double energy(const FeOperators& ops, const TriMesh& mesh, const DenseVector& u, double beta, const QuadRule& quad) {
  const DenseVector au = spmv(ops.stiffness, u) + spmv(ops.potential_mass, u);
  const double quadratic = 0.5 * u.dot(au);
  if (beta == 0.0) return quadratic;
  return quadratic + 0.25 * beta * l4_norm4(mesh, ops.dofs, u, quad);
}

Norms norms(const FeOperators& ops, const DenseVector& e) {
  const double m = e.dot(spmv(ops.mass, e));
  const double k = e.dot(spmv(ops.stiffness, e));
  return {std::sqrt(std::max(0.0, m)), std::sqrt(std::max(0.0, m + k))};
}

DenseVector to_nodal(const DofMap& dofs, std::size_t num_nodes, const DenseVector& u) {
  DenseVector out = DenseVector::Zero(static_cast<Eigen::Index>(num_nodes));
  for (std::size_t d = 0; d < dofs.size(); ++d) out[dofs.dof_to_node[d]] = u[static_cast<Eigen::Index>(d)];
  return out;
}

}  // namespace lodgpe
