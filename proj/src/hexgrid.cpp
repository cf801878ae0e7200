#include "pmslam/hexgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pmslam {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;

// Axial steps for lateral faces 1..6.
constexpr std::array<std::array<int, 2>, 6> kAxialSteps = {{
    {+1, 0}, {0, +1}, {-1, +1}, {-1, 0}, {0, -1}, {+1, -1}}};

// Relative tolerance on squared distances / layer coordinates used to detect
// boundary points.
constexpr double kTieTol = 1e-10;

int locate_layer(double z, const HexGridSpec& spec) {
  const double u = (z - spec.origin.z() - spec.half_height) / (2.0 * spec.half_height);
  return static_cast<int>(std::ceil(u - kTieTol));
}

std::array<int, 2> locate_planar(double x, double y, const HexGridSpec& spec) {
  const double dx = x - spec.origin.x();
  const double dy = y - spec.origin.y();
  const double fa = (2.0 / 3.0) * dx / spec.radius;
  const double fb = (-dx / 3.0 + kSqrt3 / 3.0 * dy) / spec.radius;

  // Cube rounding gives the nearest center away from boundaries.
  const double fc = -fa - fb;
  double ra = std::round(fa), rb = std::round(fb), rc = std::round(fc);
  const double da = std::abs(ra - fa), db = std::abs(rb - fb), dc = std::abs(rc - fc);
  if (da > db && da > dc) {
    ra = -rb - rc;
  } else if (db > dc) {
    rb = -ra - rc;
  }
  const int a0 = static_cast<int>(ra);
  const int b0 = static_cast<int>(rb);

  // Resolve ties among the rounded tile and its ring.
  auto dist2 = [&](int a, int b) {
    const double cx = 1.5 * spec.radius * a;
    const double cy = kSqrt3 * spec.radius * (b + 0.5 * a);
    return (dx - cx) * (dx - cx) + (dy - cy) * (dy - cy);
  };
  std::array<std::array<int, 3>, 7> cand;  // a, b, unused
  std::array<double, 7> d2;
  cand[0] = {a0, b0, 0};
  d2[0] = dist2(a0, b0);
  for (int j = 0; j < 6; ++j) {
    cand[j + 1] = {a0 + kAxialSteps[j][0], b0 + kAxialSteps[j][1], 0};
    d2[j + 1] = dist2(cand[j + 1][0], cand[j + 1][1]);
  }
  const double best = *std::min_element(d2.begin(), d2.end());
  const double tol = kTieTol * spec.radius * spec.radius;
  std::array<int, 2> pick = {std::numeric_limits<int>::max(), 0};
  for (int j = 0; j < 7; ++j) {
    if (d2[j] <= best + tol) {
      const std::array<int, 2> c = {cand[j][0], cand[j][1]};
      if (c < pick) pick = c;
    }
  }
  return pick;
}

void check_face(int face) {
  if (face < 1 || face > 8) {
    throw std::out_of_range("hex face must be in 1..8, got " + std::to_string(face));
  }
}

}  // namespace

int opposite_face(int face) {
  check_face(face);
  if (face == kTopFace) return kBottomFace;
  if (face == kBottomFace) return kTopFace;
  return (face - 1 + 3) % 6 + 1;
}

HexIndex neighbor(const HexIndex& idx, int face) {
  check_face(face);
  if (face == kTopFace) return {idx.a, idx.b, idx.layer + 1};
  if (face == kBottomFace) return {idx.a, idx.b, idx.layer - 1};
  const auto& s = kAxialSteps[face - 1];
  return {idx.a + s[0], idx.b + s[1], idx.layer};
}

Vec3 center(const HexIndex& idx, const HexGridSpec& spec) {
  return spec.origin + Vec3(1.5 * spec.radius * idx.a,
                            kSqrt3 * spec.radius * (idx.b + 0.5 * idx.a),
                            2.0 * spec.half_height * idx.layer);
}

HexIndex locate(const Vec3& p, const HexGridSpec& spec) {
  const auto ab = locate_planar(p.x(), p.y(), spec);
  return {ab[0], ab[1], locate_layer(p.z(), spec)};
}

Eigen::Vector2d lateral_normal(int face) {
  if (face < 1 || face > kLateralFaces) {
    throw std::out_of_range("lateral face must be in 1..6, got " + std::to_string(face));
  }
  const double ang = (30.0 + 60.0 * (face - 1)) * M_PI / 180.0;
  return {std::cos(ang), std::sin(ang)};
}

bool prism_contains(const HexIndex& idx, const Vec3& p, const HexGridSpec& spec,
                    double tol) {
  const Vec3 d = p - center(idx, spec);
  if (std::abs(d.z()) > spec.half_height + tol) return false;
  const double apothem = 0.5 * kSqrt3 * spec.radius;
  for (int j = 1; j <= kLateralFaces; ++j) {
    if (lateral_normal(j).dot(d.head<2>()) > apothem + tol) return false;
  }
  return true;
}

std::vector<FaceCrossing> face_crossings(const Vec3& p_prev, const Vec3& p_curr,
                                         const HexGridSpec& spec) {
  std::vector<FaceCrossing> out;
  HexIndex cur = locate(p_prev, spec);
  const HexIndex target = locate(p_curr, spec);
  if (cur == target) return out;

  const Vec3 dir = p_curr - p_prev;
  const double apothem = 0.5 * kSqrt3 * spec.radius;
  double t_cur = 0.0;

  // Convexity bounds the chain length by the number of tiles the segment can
  // touch; the cap only guards against degenerate floating-point input.
  const double len = dir.norm();
  const int cap = 16 + 4 * static_cast<int>(len / std::min(spec.radius, spec.half_height));
  for (int iter = 0; iter < cap && cur != target; ++iter) {
    const Vec3 rel = p_prev - center(cur, spec);
    int best_face = 0;
    double best_t = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 8; ++j) {
      double rate, dist;
      if (j <= kLateralFaces) {
        const Eigen::Vector2d n = lateral_normal(j);
        rate = n.dot(dir.head<2>());
        dist = apothem - n.dot(rel.head<2>());
      } else {
        const double sgn = (j == kTopFace) ? 1.0 : -1.0;
        rate = sgn * dir.z();
        dist = spec.half_height - sgn * rel.z();
      }
      if (rate <= 0.0) continue;
      const double t = std::max(dist / rate, t_cur);
      if (t < best_t) {
        best_t = t;
        best_face = j;
      }
    }
    if (best_face == 0 || best_t >= 1.0) break;
    const HexIndex nxt = neighbor(cur, best_face);
    out.push_back({cur, nxt, best_face, best_t});
    cur = nxt;
    t_cur = best_t;
  }

  // Endpoint on (or numerically at) a shared face: reconcile with locate's
  // tie-break by stepping to the target through adjacent faces.
  for (int guard = 0; cur != target && guard < 64; ++guard) {
    if (!out.empty() && out.back().from == target && out.back().fraction >= 1.0 - 1e-9) {
      cur = out.back().from;
      out.pop_back();
      continue;
    }
    int face = 0;
    if (target.a == cur.a && target.b == cur.b) {
      face = target.layer > cur.layer ? kTopFace : kBottomFace;
    } else {
      const Vec3 tc = center(target, spec);
      double best = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= kLateralFaces; ++j) {
        const double d = (center(neighbor(cur, j), spec) - tc).head<2>().squaredNorm();
        if (d < best) {
          best = d;
          face = j;
        }
      }
    }
    const HexIndex nxt = neighbor(cur, face);
    out.push_back({cur, nxt, face, 1.0});
    cur = nxt;
  }
  return out;
}

}  // namespace pmslam
