#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace eigenclose {

enum class DomainKind { UnitSquare, LShape };
enum class CellKind { Triangle, Rectangle };

inline constexpr int kNoCell = -1;

/// Edge between two mesh nodes. `a -> b` is the traversal direction of the
/// first incident cell (counterclockwise), so that cell lies on the left.
/// Boundary edges have right_cell == kNoCell.
struct MeshEdge {
  int a = -1;
  int b = -1;
  int left_cell = kNoCell;
  int right_cell = kNoCell;
};

struct MeshCell {
  std::array<int, 4> v{-1, -1, -1, -1};  // counterclockwise
  int nv = 0;
};

/// Conforming partition of a domain into triangles or axis-aligned rectangles.
/// Nodes and edges are numbered lexicographically by (y, x); immutable after
/// construction and safe to share across threads.
class Mesh {
public:
  CellKind cell_kind = CellKind::Triangle;
  DomainKind domain = DomainKind::UnitSquare;
  std::vector<Eigen::Vector2d> nodes;
  std::vector<MeshCell> cells;
  std::vector<MeshEdge> edges;
  std::vector<char> boundary_edge;  // per-edge flag
  double h = 0.0;                   // max side (rectangles) / max diameter (triangles)

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  bool is_boundary_edge(int e) const { return boundary_edge[static_cast<size_t>(e)] != 0; }

  /// Index of the edge joining nodes (a, b) in either orientation; -1 if absent.
  int edge_index(int a, int b) const {
    auto it = edge_lookup_.find(edge_key(a, b));
    return it == edge_lookup_.end() ? -1 : it->second;
  }

  /// Node indices of cell c cyclically: side s joins corner s and corner s+1.
  std::pair<int, int> cell_side(int c, int s) const {
    const MeshCell& cell = cells[static_cast<size_t>(c)];
    return {cell.v[static_cast<size_t>(s)], cell.v[static_cast<size_t>((s + 1) % cell.nv)]};
  }

  double cell_area(int c) const {
    const MeshCell& cell = cells[static_cast<size_t>(c)];
    double a2 = 0.0;  // shoelace
    for (int s = 0; s < cell.nv; ++s) {
      const auto& p = nodes[static_cast<size_t>(cell.v[static_cast<size_t>(s)])];
      const auto& q = nodes[static_cast<size_t>(cell.v[static_cast<size_t>((s + 1) % cell.nv)])];
      a2 += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a2;
  }

  Eigen::Vector2d cell_centroid(int c) const {
    const MeshCell& cell = cells[static_cast<size_t>(c)];
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (int k = 0; k < cell.nv; ++k) s += nodes[static_cast<size_t>(cell.v[static_cast<size_t>(k)])];
    return s / cell.nv;
  }

  double cell_diameter(int c) const {
    const MeshCell& cell = cells[static_cast<size_t>(c)];
    double d = 0.0;
    for (int i = 0; i < cell.nv; ++i)
      for (int j = i + 1; j < cell.nv; ++j)
        d = std::max(d, (nodes[static_cast<size_t>(cell.v[static_cast<size_t>(i)])] -
                         nodes[static_cast<size_t>(cell.v[static_cast<size_t>(j)])])
                            .norm());
    return d;
  }

  /// Nodes lying on the domain boundary (endpoints of boundary edges), sorted.
  std::vector<int> boundary_nodes() const {
    std::vector<char> on(nodes.size(), 0);
    for (int e = 0; e < n_edges(); ++e) {
      if (!is_boundary_edge(e)) continue;
      on[static_cast<size_t>(edges[static_cast<size_t>(e)].a)] = 1;
      on[static_cast<size_t>(edges[static_cast<size_t>(e)].b)] = 1;
    }
    std::vector<int> out;
    for (int i = 0; i < n_nodes(); ++i)
      if (on[static_cast<size_t>(i)]) out.push_back(i);
    return out;
  }

  void finalize();  // builds edge table, flags, h; validates topology

private:
  std::unordered_map<std::uint64_t, int> edge_lookup_;

  static std::uint64_t edge_key(int a, int b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(std::min(a, b));
    const std::uint64_t hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
  }
};

inline void Mesh::finalize() {
  struct Acc {
    int a, b, left, right;
  };
  std::unordered_map<std::uint64_t, Acc> acc;
  acc.reserve(cells.size() * 4);
  for (int c = 0; c < n_cells(); ++c) {
    const MeshCell& cell = cells[static_cast<size_t>(c)];
    for (int s = 0; s < cell.nv; ++s) {
      auto [va, vb] = cell_side(c, s);
      const std::uint64_t key = edge_key(va, vb);
      auto it = acc.find(key);
      if (it == acc.end()) {
        acc.emplace(key, Acc{va, vb, c, kNoCell});
      } else {
        if (it->second.right != kNoCell)
          throw std::runtime_error("mesh: edge shared by more than two cells");
        if (it->second.a != vb || it->second.b != va)
          throw std::runtime_error("mesh: inconsistent edge orientation between cells");
        it->second.right = c;
      }
    }
  }

  edges.clear();
  edges.reserve(acc.size());
  for (const auto& [key, e] : acc) {
    (void)key;
    edges.push_back(MeshEdge{e.a, e.b, e.left, e.right});
  }
  // lexicographic by (midpoint y, midpoint x); node pair as tie-break
  std::sort(edges.begin(), edges.end(), [this](const MeshEdge& p, const MeshEdge& q) {
    const Eigen::Vector2d mp = 0.5 * (nodes[static_cast<size_t>(p.a)] + nodes[static_cast<size_t>(p.b)]);
    const Eigen::Vector2d mq = 0.5 * (nodes[static_cast<size_t>(q.a)] + nodes[static_cast<size_t>(q.b)]);
    if (mp.y() != mq.y()) return mp.y() < mq.y();
    if (mp.x() != mq.x()) return mp.x() < mq.x();
    return std::minmax(p.a, p.b) < std::minmax(q.a, q.b);
  });

  edge_lookup_.clear();
  edge_lookup_.reserve(edges.size());
  boundary_edge.assign(edges.size(), 0);
  for (int e = 0; e < n_edges(); ++e) {
    edge_lookup_[edge_key(edges[static_cast<size_t>(e)].a, edges[static_cast<size_t>(e)].b)] = e;
    boundary_edge[static_cast<size_t>(e)] = edges[static_cast<size_t>(e)].right_cell == kNoCell ? 1 : 0;
  }

  h = 0.0;
  for (int c = 0; c < n_cells(); ++c) {
    if (cell_area(c) <= 0.0) throw std::runtime_error("mesh: cell with nonpositive area");
    if (cell_kind == CellKind::Rectangle) {
      for (int s = 0; s < 4; ++s) {
        auto [va, vb] = cell_side(c, s);
        h = std::max(h, (nodes[static_cast<size_t>(va)] - nodes[static_cast<size_t>(vb)]).norm());
      }
    } else {
      h = std::max(h, cell_diameter(c));
    }
  }
}

/// Uniform mesh of the unit square (0,1)^2 or the L-shape (-1,1)^2 minus
/// (-1,0)x(-1,0); n subdivisions per unit length. Triangle meshes split each
/// grid square along the diagonal from lower-left to upper-right.
inline Mesh build_mesh(DomainKind domain, CellKind cell_kind, int n) {
  if (n < 1) throw std::invalid_argument("build_mesh: n must be >= 1");

  Mesh mesh;
  mesh.cell_kind = cell_kind;
  mesh.domain = domain;

  const int g = (domain == DomainKind::UnitSquare) ? n : 2 * n;
  const double x0 = (domain == DomainKind::UnitSquare) ? 0.0 : -1.0;
  auto coord = [&](int i) { return x0 + static_cast<double>(i) / n; };
  auto in_removed_quadrant = [&](int i, int j) {
    return domain == DomainKind::LShape && i < n && j < n;
  };

  std::vector<int> node_id(static_cast<size_t>((g + 1) * (g + 1)), -1);
  auto gidx = [&](int i, int j) { return static_cast<size_t>(j * (g + 1) + i); };
  for (int j = 0; j <= g; ++j)
    for (int i = 0; i <= g; ++i) {
      const bool keep = !(domain == DomainKind::LShape && i < n && j < n);
      if (!keep) continue;
      node_id[gidx(i, j)] = mesh.n_nodes();
      mesh.nodes.emplace_back(coord(i), coord(j));
    }

  for (int j = 0; j < g; ++j)
    for (int i = 0; i < g; ++i) {
      if (in_removed_quadrant(i, j)) continue;
      const int a = node_id[gidx(i, j)];
      const int b = node_id[gidx(i + 1, j)];
      const int c = node_id[gidx(i + 1, j + 1)];
      const int d = node_id[gidx(i, j + 1)];
      if (cell_kind == CellKind::Rectangle) {
        mesh.cells.push_back(MeshCell{{a, b, c, d}, 4});
      } else {
        mesh.cells.push_back(MeshCell{{a, b, c, -1}, 3});
        mesh.cells.push_back(MeshCell{{a, c, d, -1}, 3});
      }
    }

  mesh.finalize();
  return mesh;
}

/// Splits every cell into 4 congruent children (edge midpoints, plus the
/// center for rectangles). Coarse node indices are a prefix of the fine ones.
inline Mesh refine_uniform(const Mesh& coarse) {
  Mesh fine;
  fine.cell_kind = coarse.cell_kind;
  fine.domain = coarse.domain;
  fine.nodes = coarse.nodes;

  const int n0 = coarse.n_nodes();
  for (const MeshEdge& e : coarse.edges)
    fine.nodes.emplace_back(0.5 * (coarse.nodes[static_cast<size_t>(e.a)] +
                                   coarse.nodes[static_cast<size_t>(e.b)]));
  const int m0 = n0 + coarse.n_edges();
  if (coarse.cell_kind == CellKind::Rectangle)
    for (int c = 0; c < coarse.n_cells(); ++c) fine.nodes.emplace_back(coarse.cell_centroid(c));

  auto mid = [&](int a, int b) { return n0 + coarse.edge_index(a, b); };
  for (int c = 0; c < coarse.n_cells(); ++c) {
    const MeshCell& cell = coarse.cells[static_cast<size_t>(c)];
    if (cell.nv == 3) {
      const int v0 = cell.v[0], v1 = cell.v[1], v2 = cell.v[2];
      const int m01 = mid(v0, v1), m12 = mid(v1, v2), m20 = mid(v2, v0);
      fine.cells.push_back(MeshCell{{v0, m01, m20, -1}, 3});
      fine.cells.push_back(MeshCell{{m01, v1, m12, -1}, 3});
      fine.cells.push_back(MeshCell{{m20, m12, v2, -1}, 3});
      fine.cells.push_back(MeshCell{{m01, m12, m20, -1}, 3});
    } else {
      const int v0 = cell.v[0], v1 = cell.v[1], v2 = cell.v[2], v3 = cell.v[3];
      const int m01 = mid(v0, v1), m12 = mid(v1, v2), m23 = mid(v2, v3), m30 = mid(v3, v0);
      const int cc = m0 + c;
      fine.cells.push_back(MeshCell{{v0, m01, cc, m30}, 4});
      fine.cells.push_back(MeshCell{{m01, v1, m12, cc}, 4});
      fine.cells.push_back(MeshCell{{m30, cc, m23, v3}, 4});
      fine.cells.push_back(MeshCell{{cc, m12, v2, m23}, 4});
    }
  }

  fine.finalize();
  return fine;
}

/// Plain-text mesh dump: `v x y`, `c i j k [l]`, `e a b left right` sections.
inline void write_mesh(const Mesh& mesh, std::ostream& os) {
  char buf[128];
  for (const auto& p : mesh.nodes) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g\n", p.x(), p.y());
    os << buf;
  }
  for (const MeshCell& c : mesh.cells) {
    os << 'c';
    for (int k = 0; k < c.nv; ++k) os << ' ' << c.v[static_cast<size_t>(k)];
    os << '\n';
  }
  for (const MeshEdge& e : mesh.edges)
    os << "e " << e.a << ' ' << e.b << ' ' << e.left_cell << ' ' << e.right_cell << '\n';
}

}  // namespace eigenclose
