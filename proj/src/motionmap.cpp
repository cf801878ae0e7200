#include "pmslam/motionmap.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pmslam {

double transition_prob(const MotionTile& tile, int face) {
  if (face == kTopFace || face == kBottomFace) return tile.p_v;
  if (face < 1 || face > kLateralFaces) {
    throw std::out_of_range("motion face must be in 1..8, got " + std::to_string(face));
  }
  const std::uint64_t total =
      std::accumulate(tile.counts.begin(), tile.counts.end(), std::uint64_t{0});
  return static_cast<double>(tile.counts[face - 1]) / static_cast<double>(total);
}

MotionTile record_transition(MotionTile tile, int face) {
  if (face == kTopFace || face == kBottomFace) {
    throw std::invalid_argument("vertical faces are not counted");
  }
  if (face < 1 || face > kLateralFaces) {
    throw std::out_of_range("motion face must be in 1..6, got " + std::to_string(face));
  }
  ++tile.counts[face - 1];
  return tile;
}

const MotionTile* MotionMap::find(const HexIndex& idx) const {
  const auto it = tiles_.find(idx);
  return it == tiles_.end() ? nullptr : &it->second;
}

const MotionTile& MotionMap::ensure(const HexIndex& idx) {
  auto it = tiles_.find(idx);
  if (it == tiles_.end()) {
    MotionTile t;
    t.idx = idx;
    t.p_v = p_v_;
    it = tiles_.emplace(idx, t).first;
  }
  return it->second;
}

void MotionMap::record(std::span<const FaceCrossing> crossings) {
  for (const auto& c : crossings) {
    ensure(c.from);
    ensure(c.to);
    if (c.face <= kLateralFaces) {
      auto& t = tiles_.at(c.from);
      t = record_transition(t, c.face);
    }
  }
}

double log_motion_weight(MotionMap& map, std::span<const FaceCrossing> crossings) {
  double lw = 0.0;
  for (const auto& c : crossings) {
    map.ensure(c.to);
    lw += std::log(transition_prob(map.ensure(c.from), c.face));
  }
  return lw;
}

double motion_weight(MotionMap& map, std::span<const FaceCrossing> crossings) {
  return std::exp(log_motion_weight(map, crossings));
}

}  // namespace pmslam
