#pragma once

// Hexagonal motion map: each tile counts how often each lateral face was
// crossed when leaving the tile. Lateral transition probabilities are the
// normalized counts; the top and bottom faces get a fixed small probability.

#include <array>
#include <cstdint>
#include <map>
#include <span>

#include "pmslam/hexgrid.hpp"

namespace pmslam {

struct MotionTile {
  HexIndex idx;
  std::array<std::uint32_t, kLateralFaces> counts{1, 1, 1, 1, 1, 1};
  double p_v = 0.001;
};

/// N_j / sum N for j in 1..6, p_v for 7 and 8. Throws std::out_of_range for
/// other faces.
double transition_prob(const MotionTile& tile, int face);

/// Increments the counter of lateral face 1..6; throws std::invalid_argument
/// for vertical faces and std::out_of_range for anything else.
MotionTile record_transition(MotionTile tile, int face);

class MotionMap {
 public:
  explicit MotionMap(double p_v = 0.001) : p_v_(p_v) {}

  double p_v() const { return p_v_; }
  std::size_t size() const { return tiles_.size(); }
  bool contains(const HexIndex& idx) const { return tiles_.count(idx) != 0; }
  const MotionTile* find(const HexIndex& idx) const;
  const MotionTile& ensure(const HexIndex& idx);

  /// Counts lateral crossings on their exit tile; vertical crossings only
  /// instantiate tiles.
  void record(std::span<const FaceCrossing> crossings);

  const std::map<HexIndex, MotionTile>& tiles() const { return tiles_; }

 private:
  double p_v_;
  std::map<HexIndex, MotionTile> tiles_;
};

/// Product over the chain of transition_prob(exit tile, face); 1 for an
/// empty chain. Unknown tiles are instantiated fresh first.
double motion_weight(MotionMap& map, std::span<const FaceCrossing> crossings);
double log_motion_weight(MotionMap& map, std::span<const FaceCrossing> crossings);

}  // namespace pmslam
