#include "mign/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mign/errors.hpp"

namespace mign {

GeoCoord geo_from_radians(double lon, double lat) {
  constexpr double half_pi = kPi / 2.0;
  if (!(lat >= -half_pi && lat <= half_pi) || !std::isfinite(lon))
    throw DomainError("latitude out of range [-pi/2, pi/2]: " + std::to_string(lat));
  while (lon > kPi) lon -= 2.0 * kPi;
  while (lon < -kPi) lon += 2.0 * kPi;
  return GeoCoord{lon, lat};
}

GeoCoord make_geo(double lon_deg, double lat_deg) {
  if (!(lat_deg >= -90.0 && lat_deg <= 90.0))
    throw DomainError("latitude out of range [-90, 90] degrees: " + std::to_string(lat_deg));
  return geo_from_radians(lon_deg * kPi / 180.0, lat_deg * kPi / 180.0);
}

std::array<double, 3> geo_to_unit_vec(const GeoCoord& c) {
  const double cl = std::cos(c.lat);
  return {cl * std::cos(c.lon), cl * std::sin(c.lon), std::sin(c.lat)};
}

GeoCoord unit_vec_to_geo(const std::array<double, 3>& v) {
  const double z = std::clamp(v[2], -1.0, 1.0);
  return GeoCoord{std::atan2(v[1], v[0]), std::asin(z)};
}

double great_circle_distance(const GeoCoord& a, const GeoCoord& b) {
  const double sdlat = std::sin(0.5 * (b.lat - a.lat));
  const double sdlon = std::sin(0.5 * (b.lon - a.lon));
  const double h = sdlat * sdlat + std::cos(a.lat) * std::cos(b.lat) * sdlon * sdlon;
  return 2.0 * std::asin(std::min(1.0, std::sqrt(h)));
}

namespace {

struct Vec3 {
  double x, y, z;
};

inline Vec3 to_vec3(const GeoCoord& c) {
  const auto v = geo_to_unit_vec(c);
  return Vec3{v[0], v[1], v[2]};
}

inline double chord2(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double axis_value(const Vec3& v, int axis) {
  return axis == 0 ? v.x : (axis == 1 ? v.y : v.z);
}

// Candidate ordering: nearer chord wins, ties go to the lower index.
struct Candidate {
  double d2;
  std::uint32_t idx;
};

inline bool better(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
}

// Bounded set of the k best candidates, max-heap with the worst on top.
class KBest {
 public:
  explicit KBest(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(const Candidate& c) {
    if (heap_.size() < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }

  bool full() const { return heap_.size() == k_; }
  double bound() const {
    return full() ? heap_.front().d2 : std::numeric_limits<double>::infinity();
  }
  std::vector<Candidate>& items() { return heap_; }

 private:
  std::size_t k_;
  std::vector<Candidate> heap_;
};

// Static kd-tree over unit vectors. Split axis = widest extent; median by
// (coordinate, index) so the layout is deterministic.
class KdTree {
 public:
  explicit KdTree(std::span<const GeoCoord> points) {
    const std::size_t n = points.size();
    pts_.resize(n);
    for (std::size_t i = 0; i < n; ++i) pts_[i] = to_vec3(points[i]);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    nodes_.reserve(n);
    root_ = build(order.data(), order.data() + n);
  }

  // Fills `out` with the best candidates, skipping `exclude` (pass
  // UINT32_MAX to keep everything).
  void query(const Vec3& q, std::uint32_t exclude, KBest& out) const {
    search(root_, q, exclude, out);
  }

 private:
  static constexpr std::uint32_t kNull = 0xffffffffu;

  struct Node {
    Vec3 p;
    std::uint32_t idx;
    std::uint32_t left = kNull;
    std::uint32_t right = kNull;
    std::uint8_t axis = 0;
  };

  std::uint32_t build(std::uint32_t* first, std::uint32_t* last) {
    if (first == last) return kNull;
    double lo[3] = {1e30, 1e30, 1e30}, hi[3] = {-1e30, -1e30, -1e30};
    for (auto* it = first; it != last; ++it) {
      const Vec3& p = pts_[*it];
      const double v[3] = {p.x, p.y, p.z};
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], v[a]);
        hi[a] = std::max(hi[a], v[a]);
      }
    }
    int axis = 0;
    double ext = hi[0] - lo[0];
    for (int a = 1; a < 3; ++a) {
      if (hi[a] - lo[a] > ext) {
        ext = hi[a] - lo[a];
        axis = a;
      }
    }
    auto* mid = first + (last - first) / 2;
    std::nth_element(first, mid, last, [&](std::uint32_t a, std::uint32_t b) {
      const double va = axis_value(pts_[a], axis), vb = axis_value(pts_[b], axis);
      return va < vb || (va == vb && a < b);
    });
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{pts_[*mid], *mid, kNull, kNull, static_cast<std::uint8_t>(axis)});
    const std::uint32_t l = build(first, mid);
    const std::uint32_t r = build(mid + 1, last);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(std::uint32_t id, const Vec3& q, std::uint32_t exclude, KBest& out) const {
    if (id == kNull) return;
    const Node& nd = nodes_[id];
    if (nd.idx != exclude) out.offer(Candidate{chord2(q, nd.p), nd.idx});
    const double diff = axis_value(q, nd.axis) - axis_value(nd.p, nd.axis);
    const std::uint32_t near = diff <= 0.0 ? nd.left : nd.right;
    const std::uint32_t far = diff <= 0.0 ? nd.right : nd.left;
    search(near, q, exclude, out);
    // Strict comparison: an exactly tied plane distance can still hide an
    // equal-distance candidate with a lower index on the far side.
    if (diff * diff > out.bound()) return;
    search(far, q, exclude, out);
  }

  std::vector<Vec3> pts_;
  std::vector<Node> nodes_;
  std::uint32_t root_ = kNull;
};

EdgeList knn_impl(std::span<const GeoCoord> sources, std::span<const GeoCoord> targets,
                  std::size_t k, bool self_excluded, Exec ex) {
  if (sources.empty()) throw DataError("knn: empty source set");
  if (k < 1) throw DomainError("knn: k must be >= 1");
  const std::size_t avail = sources.size() - (self_excluded ? 1 : 0);
  const std::size_t deg = std::min(k, avail);
  if (deg == 0) throw DataError("knn: no eligible sources");

  EdgeList out;
  out.n_sources = sources.size();
  out.n_targets = targets.size();
  out.offsets.resize(targets.size() + 1);
  for (std::size_t t = 0; t <= targets.size(); ++t) out.offsets[t] = t * deg;
  out.src.resize(targets.size() * deg);
  out.dist.resize(targets.size() * deg);

  KdTree tree(sources);
  parallel_for(targets.size(), ex, [&](std::size_t t) {
    KBest best(deg);
    const Vec3 q = to_vec3(targets[t]);
    const std::uint32_t exclude =
        self_excluded ? static_cast<std::uint32_t>(t) : 0xffffffffu;
    tree.query(q, exclude, best);
    auto& items = best.items();
    std::sort(items.begin(), items.end(),
              [](const Candidate& a, const Candidate& b) { return a.idx < b.idx; });
    const std::size_t base = t * deg;
    for (std::size_t j = 0; j < deg; ++j) {
      out.src[base + j] = items[j].idx;
      out.dist[base + j] = great_circle_distance(sources[items[j].idx], targets[t]);
    }
  });
  return out;
}

}  // namespace

EdgeList knn_edges(std::span<const GeoCoord> sources, std::span<const GeoCoord> targets,
                   std::size_t k, Exec ex) {
  return knn_impl(sources, targets, k, false, ex);
}

EdgeList knn_graph(std::span<const GeoCoord> points, std::size_t k, Exec ex) {
  if (points.size() < 2) throw DataError("knn_graph: need at least 2 points");
  return knn_impl(points, points, k, true, ex);
}

std::vector<std::uint32_t> nearest_source(std::span<const GeoCoord> sources,
                                          std::span<const GeoCoord> targets, Exec ex) {
  if (sources.empty()) throw DataError("nearest_source: empty source set");
  std::vector<std::uint32_t> out(targets.size());
  KdTree tree(sources);
  parallel_for(targets.size(), ex, [&](std::size_t t) {
    KBest best(1);
    tree.query(to_vec3(targets[t]), 0xffffffffu, best);
    out[t] = best.items().front().idx;
  });
  return out;
}

EdgeListTranspose transpose(const EdgeList& edges) {
  EdgeListTranspose tr;
  tr.offsets.assign(edges.n_sources + 1, 0);
  for (std::uint32_t s : edges.src) tr.offsets[s + 1]++;
  for (std::size_t i = 1; i <= edges.n_sources; ++i) tr.offsets[i] += tr.offsets[i - 1];
  tr.edge_pos.resize(edges.edge_count());
  tr.tgt.resize(edges.edge_count());
  std::vector<std::size_t> cursor(tr.offsets.begin(), tr.offsets.end() - 1);
  for (std::size_t t = 0; t < edges.n_targets; ++t) {
    for (std::size_t e = edges.offsets[t]; e < edges.offsets[t + 1]; ++e) {
      const std::size_t pos = cursor[edges.src[e]]++;
      tr.edge_pos[pos] = e;
      tr.tgt[pos] = static_cast<std::uint32_t>(t);
    }
  }
  return tr;
}

}  // namespace mign
