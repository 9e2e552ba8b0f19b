#include "pcsimp/qem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <string>
#include <tuple>

#include <Eigen/SVD>

#include "pcsimp/error.hpp"

namespace pcs {

Quadric Quadric::from_plane(const Eigen::Vector4d& plane, double weight) {
  Quadric q;
  q.m = weight * plane * plane.transpose();
  return q;
}

double Quadric::evaluate(const Vec3& v) const {
  const Eigen::Vector4d h(v.x(), v.y(), v.z(), 1.0);
  return h.dot(m * h);
}

Contraction optimal_contraction(const Quadric& q, const Vec3& a, const Vec3& b,
                                double condition_limit) {
  const Eigen::Matrix3d lhs = q.m.topLeftCorner<3, 3>();
  const Vec3 rhs = -q.m.topRightCorner<3, 1>();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(lhs, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv[2] > 0.0 && sv[0] / sv[2] <= condition_limit) {
    const Vec3 v = svd.solve(rhs);
    if (v.allFinite()) return {v, q.evaluate(v), true};
  }
  Contraction best{0.5 * (a + b), q.evaluate(0.5 * (a + b)), false};
  for (const Vec3& p : {a, b}) {
    const double c = q.evaluate(p);
    if (c < best.cost) best = {p, c, false};
  }
  return best;
}

namespace {

using Edge = std::pair<Index, Index>;

Edge make_edge(Index a, Index b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::map<Edge, std::vector<std::size_t>> edge_faces(const Mesh& mesh) {
  std::map<Edge, std::vector<std::size_t>> out;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    for (int e = 0; e < 3; ++e) out[make_edge(t[e], t[(e + 1) % 3])].push_back(f);
  }
  return out;
}

Vec3 face_normal(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
  return (p1 - p0).cross(p2 - p0);
}

}  // namespace

std::vector<Quadric> vertex_quadrics(const Mesh& mesh, const QemOptions& options) {
  std::vector<Quadric> quadrics(mesh.positions.size());
  const auto& p = mesh.positions;
  for (const Face& t : mesh.faces) {
    Vec3 n = face_normal(p[t[0]], p[t[1]], p[t[2]]);
    if (n.norm() == 0.0) continue;
    n.normalize();
    const Quadric kq = Quadric::from_plane({n.x(), n.y(), n.z(), -n.dot(p[t[0]])});
    for (Index v : t) quadrics[v] += kq;
  }
  if (options.boundary_weight <= 0.0) return quadrics;

  for (const auto& [edge, faces] : edge_faces(mesh)) {
    if (faces.size() != 1) continue;
    const Face& t = mesh.faces[faces.front()];
    const Vec3 n = face_normal(p[t[0]], p[t[1]], p[t[2]]);
    const Vec3& a = p[edge.first];
    const Vec3& b = p[edge.second];
    Vec3 m = (b - a).cross(n);
    if (m.norm() == 0.0) continue;
    m.normalize();
    const Quadric bq = Quadric::from_plane({m.x(), m.y(), m.z(), -m.dot(a)}, options.boundary_weight);
    quadrics[edge.first] += bq;
    quadrics[edge.second] += bq;
  }
  return quadrics;
}

namespace {

struct HeapEntry {
  double cost;
  Index a;
  Index b;
  std::uint32_t stamp_a;
  std::uint32_t stamp_b;
  Vec3 position;

  friend bool operator>(const HeapEntry& x, const HeapEntry& y) {
    return std::tie(x.cost, x.a, x.b) > std::tie(y.cost, y.a, y.b);
  }
};

class Decimator {
 public:
  Decimator(const Mesh& mesh, const QemOptions& options)
      : options_(options),
        pos_(mesh.positions),
        faces_(mesh.faces),
        face_alive_(mesh.faces.size(), 1),
        vertex_alive_(mesh.positions.size(), 1),
        stamp_(mesh.positions.size(), 0),
        incident_(mesh.positions.size()),
        quadrics_(vertex_quadrics(mesh, options)) {
    for (std::size_t f = 0; f < faces_.size(); ++f)
      for (Index v : faces_[f]) incident_[v].push_back(f);
    for (const auto& [edge, faces] : edge_faces(mesh)) push(edge.first, edge.second);
    alive_count_ = pos_.size();
  }

  QemResult run(std::size_t target) {
    QemResult result;
    while (alive_count_ > target && !heap_.empty()) {
      const HeapEntry e = heap_.top();
      heap_.pop();
      if (!vertex_alive_[e.a] || !vertex_alive_[e.b]) continue;
      if (stamp_[e.a] != e.stamp_a || stamp_[e.b] != e.stamp_b) continue;
      if (!link_condition(e.a, e.b) || flips(e.a, e.b, e.position)) continue;
      collapse(e.a, e.b, e.position);
      result.collapse_costs.push_back(e.cost);
    }
    result.mesh = compact();
    result.achieved_vertices = result.mesh.positions.size();
    return result;
  }

 private:
  void push(Index a, Index b) {
    if (a > b) std::swap(a, b);
    const Contraction c =
        optimal_contraction(quadrics_[a] + quadrics_[b], pos_[a], pos_[b], options_.condition_limit);
    heap_.push({c.cost, a, b, stamp_[a], stamp_[b], c.position});
  }

  std::vector<Index> ring(Index v) const {
    std::vector<Index> r;
    for (std::size_t f : incident_[v]) {
      if (!face_alive_[f]) continue;
      for (Index w : faces_[f])
        if (w != v) r.push_back(w);
    }
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    return r;
  }

  bool contains(const Face& t, Index v) const { return t[0] == v || t[1] == v || t[2] == v; }

  // The two one-rings may only share the apexes of the faces on edge (a, b).
  bool link_condition(Index a, Index b) const {
    const auto ra = ring(a);
    const auto rb = ring(b);
    std::vector<Index> common;
    std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(common));
    std::size_t shared_faces = 0;
    for (std::size_t f : incident_[a])
      if (face_alive_[f] && contains(faces_[f], b)) ++shared_faces;
    return common.size() == shared_faces;
  }

  bool flips(Index a, Index b, const Vec3& target) const {
    for (Index v : {a, b}) {
      for (std::size_t f : incident_[v]) {
        if (!face_alive_[f]) continue;
        const Face& t = faces_[f];
        if (contains(t, a) && contains(t, b)) continue;
        std::array<Vec3, 3> after;
        for (int c = 0; c < 3; ++c) after[c] = (t[c] == a || t[c] == b) ? target : pos_[t[c]];
        const Vec3 n0 = face_normal(pos_[t[0]], pos_[t[1]], pos_[t[2]]);
        const Vec3 n1 = face_normal(after[0], after[1], after[2]);
        if (n0.dot(n1) < 0.0) return true;
      }
    }
    return false;
  }

  void collapse(Index a, Index b, const Vec3& target) {
    pos_[a] = target;
    quadrics_[a] += quadrics_[b];
    vertex_alive_[b] = 0;
    --alive_count_;
    for (std::size_t f : incident_[b]) {
      if (!face_alive_[f]) continue;
      Face& t = faces_[f];
      if (contains(t, a)) {
        face_alive_[f] = 0;
        continue;
      }
      for (Index& v : t)
        if (v == b) v = a;
      incident_[a].push_back(f);
    }
    incident_[b].clear();
    auto& inc = incident_[a];
    inc.erase(std::remove_if(inc.begin(), inc.end(), [&](std::size_t f) { return !face_alive_[f]; }),
              inc.end());
    std::sort(inc.begin(), inc.end());
    inc.erase(std::unique(inc.begin(), inc.end()), inc.end());

    ++stamp_[a];
    for (Index w : ring(a)) push(a, w);
  }

  Mesh compact() const {
    Mesh out;
    std::vector<Index> remap(pos_.size(), 0);
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      if (!vertex_alive_[v]) continue;
      remap[v] = static_cast<Index>(out.positions.size());
      out.positions.push_back(pos_[v]);
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const Face& t = faces_[f];
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
      out.faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    }
    return out;
  }

  QemOptions options_;
  Positions pos_;
  std::vector<Face> faces_;
  std::vector<std::uint8_t> face_alive_;
  std::vector<std::uint8_t> vertex_alive_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<Quadric> quadrics_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> heap_;
  std::size_t alive_count_ = 0;
};

}  // namespace

QemResult qem_simplify(const Mesh& mesh, std::size_t target_vertices, const QemOptions& options) {
  if (mesh.faces.empty()) throw Error(ErrorCode::NotAMesh, "input has no faces");
  try {
    mesh.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::NotAMesh, e.what());
  }
  for (const auto& [edge, faces] : edge_faces(mesh)) {
    if (faces.size() > 2)
      throw Error(ErrorCode::NotAMesh, "edge (" + std::to_string(edge.first) + ", " +
                                           std::to_string(edge.second) + ") has " +
                                           std::to_string(faces.size()) + " faces");
  }
  if (target_vertices < 4)
    throw Error(ErrorCode::TargetTooSmall, "target vertex count must be at least 4");
  if (target_vertices >= mesh.positions.size()) {
    QemResult r;
    r.mesh = mesh;
    r.achieved_vertices = mesh.positions.size();
    return r;
  }
  return Decimator(mesh, options).run(target_vertices);
}

}  // namespace pcs
