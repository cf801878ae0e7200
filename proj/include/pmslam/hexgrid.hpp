#pragma once

// Flat-top hexagonal prism tilings shared by the magnetic and motion maps.
//
// Tile (a, b, layer) uses axial coordinates in the plane. With circumradius r
// its center is
//
//   x = origin.x + 1.5 r a
//   y = origin.y + sqrt(3) r (b + a / 2)
//   z = origin.z + 2 half_height layer
//
// Face numbering (outward normal angle in the xy plane, axial step):
//
//   1:  30 deg  (+1,  0)        4: 210 deg  (-1,  0)
//   2:  90 deg  ( 0, +1)        5: 270 deg  ( 0, -1)
//   3: 150 deg  (-1, +1)        6: 330 deg  (+1, -1)
//   7: top      layer + 1       8: bottom   layer - 1
//
// A point on a face shared by two tiles belongs to the tile with the
// lexicographically smaller (a, b, layer).

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace pmslam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct HexGridSpec {
  double radius = 1.0;
  double half_height = 1.0;
  Vec3 origin = Vec3::Zero();

  bool valid() const { return radius > 0.0 && half_height > 0.0; }
};

struct HexIndex {
  int a = 0;
  int b = 0;
  int layer = 0;

  friend auto operator<=>(const HexIndex&, const HexIndex&) = default;
};

inline constexpr int kLateralFaces = 6;
inline constexpr int kTopFace = 7;
inline constexpr int kBottomFace = 8;

struct FaceCrossing {
  HexIndex from;
  HexIndex to;
  int face = 0;
  double fraction = 0.0;
};

/// Face on the far side of `face` (1<->4, 2<->5, 3<->6, 7<->8).
int opposite_face(int face);

/// Throws std::out_of_range for faces outside 1..8.
HexIndex neighbor(const HexIndex& idx, int face);

Vec3 center(const HexIndex& idx, const HexGridSpec& spec);

HexIndex locate(const Vec3& p, const HexGridSpec& spec);

/// True if p lies in the closed prism of tile idx.
bool prism_contains(const HexIndex& idx, const Vec3& p, const HexGridSpec& spec,
                    double tol = 1e-12);

/// Outward unit normal of lateral face 1..6.
Eigen::Vector2d lateral_normal(int face);

/// Ordered tile-to-tile crossings of the segment p_prev -> p_curr. The chain
/// starts at locate(p_prev) and ends at locate(p_curr).
std::vector<FaceCrossing> face_crossings(const Vec3& p_prev, const Vec3& p_curr,
                                         const HexGridSpec& spec);

struct HexIndexHash {
  std::size_t operator()(const HexIndex& idx) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(idx.a);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(idx.b);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(idx.layer);
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

}  // namespace pmslam
