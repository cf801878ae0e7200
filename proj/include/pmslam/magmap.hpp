#pragma once

// Reduced-rank Gaussian-process magnetic field map on overlapping hexagonal
// tiles.
//
// The field is the gradient of a scalar potential with prior
//   phi ~ GP(0, sigma_lin^2 p^T p' + SE(sigma_se, lengthscale)).
// Each tile approximates the SE part with the m lowest Dirichlet eigenmodes of
// the Laplacian on a box around the tile, so a tile's state is a Gaussian over
// m + 3 coefficients: three for the linear (uniform field) part followed by
// the m basis weights. A magnetometer reading in the sensor frame is
//   z = R(q)^T grad Phi(p) coeffs + noise,  noise ~ N(0, R_m).

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "pmslam/hexgrid.hpp"
#include "pmslam/posemath.hpp"

namespace pmslam {

struct MagHyperparams {
  double lengthscale = 0.3;
  double sigma_se = 1.0;
  double sigma_lin = 0.5;
  Mat3 noise = 0.1 * Mat3::Identity();
  int num_basis = 256;
  double margin = 1.3;

  bool valid() const;
};

/// 3-D squared-exponential spectral density
///   S(lambda) = sigma_se^2 (2 pi l^2)^(3/2) exp(-lambda^2 l^2 / 2),
/// the Fourier transform of sigma_se^2 exp(-|r|^2 / (2 l^2)) over R^3 (units:
/// potential^2 m^3).
double spectral_density_se(double lambda, const MagHyperparams& hp);

struct BasisMode {
  std::array<int, 3> n{1, 1, 1};
  double lambda = 0.0;  // sqrt of the Laplacian eigenvalue, rad/m
};

/// Eigenbasis shared by every tile of one grid: modes sorted by increasing
/// lambda (decreasing prior variance) and the prior variances of all m + 3
/// coefficients.
struct TileBasis {
  Vec3 half_lengths = Vec3::Ones();
  std::vector<BasisMode> modes;
  Eigen::VectorXd prior_variance;
  // Structure-of-arrays copy of the mode numbers for the kernels.
  std::array<std::vector<std::int32_t>, 3> mode_n;
  std::array<int, 3> max_n{0, 0, 0};

  std::size_t state_dim() const { return modes.size() + 3; }
};

std::shared_ptr<const TileBasis> make_tile_basis(const MagHyperparams& hp,
                                                 const HexGridSpec& grid);

struct MagTile {
  HexIndex idx;
  Vec3 center = Vec3::Zero();
  std::shared_ptr<const TileBasis> basis;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  const Vec3& half_lengths() const { return basis->half_lengths; }
  bool domain_contains(const Vec3& p, double tol = 1e-12) const;
};

/// Prior tile: zero mean, diagonal covariance diag(sigma_lin^2 I3, S(lambda_j)).
MagTile build_basis(const HexIndex& idx, const MagHyperparams& hp, const HexGridSpec& grid);
MagTile build_basis(const HexIndex& idx, const HexGridSpec& grid,
                    std::shared_ptr<const TileBasis> basis);

/// Value of eigenfunction `mode` of the tile at p (no domain check).
double eigenfunction(const MagTile& tile, std::size_t mode, const Vec3& p);

using GradientMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// 3 x (m + 3) matrix [I3, grad phi_1, ..., grad phi_m]. Throws
/// std::out_of_range when p is outside the tile domain.
GradientMatrix basis_gradients(const Vec3& p, const MagTile& tile);

struct MagPrediction {
  Vec3 zhat = Vec3::Zero();
  Mat3 S = Mat3::Zero();
};

/// Everything one measurement needs, computed once and shared by the
/// likelihood and the update.
struct MagInnovation {
  GradientMatrix C;                         // R(q)^T grad Phi, 3 x (m + 3)
  Eigen::Matrix<double, Eigen::Dynamic, 3> PCt;
  MagPrediction pred;
};

MagInnovation make_innovation(const MagTile& tile, const Pose& pose, const MagHyperparams& hp);

MagPrediction predict_measurement(const MagTile& tile, const Pose& pose,
                                  const MagHyperparams& hp);

/// log N(z; zhat, S). Throws std::runtime_error when S is not positive
/// definite.
double log_likelihood(const MagInnovation& innov, const Vec3& z);
double log_likelihood(const MagTile& tile, const Pose& pose, const Vec3& z,
                      const MagHyperparams& hp);

/// Kalman measurement update of the tile coefficients in place.
void kalman_update_inplace(MagTile& tile, const MagInnovation& innov, const Vec3& z);
MagTile kalman_update(const MagTile& tile, const Pose& pose, const Vec3& z,
                      const MagHyperparams& hp);

/// Predicted world-frame field (posterior mean) at p.
Vec3 predicted_field(const MagTile& tile, const Vec3& p);

/// Tiles whose margin-extended domain contains p, nearest center first
/// (ties: lexicographic index). Always contains locate(p).
std::vector<HexIndex> tiles_containing(const Vec3& p, const HexGridSpec& grid,
                                       const MagHyperparams& hp);

/// Per-particle magnetic map. Tiles are shared between copies of a map and
/// cloned on first write, so copies behave as independent values.
class MagMap {
 public:
  MagMap() = default;
  MagMap(const MagHyperparams& hp, const HexGridSpec& grid);

  const MagHyperparams& hyperparams() const { return ctx_->hp; }
  const HexGridSpec& grid() const { return ctx_->grid; }
  const std::shared_ptr<const TileBasis>& basis() const { return ctx_->basis; }

  std::size_t size() const { return tiles_.size(); }
  bool contains(const HexIndex& idx) const { return tiles_.count(idx) != 0; }
  const MagTile* find(const HexIndex& idx) const;

  /// Instantiates a prior tile if absent.
  const MagTile& ensure(const HexIndex& idx);

  /// Writable tile, cloned first when storage is shared with another map.
  MagTile& mutable_tile(const HexIndex& idx);

  /// Replaces a tile (used to seed maps).
  void set_tile(MagTile tile);

  bool shares_storage(const MagMap& other, const HexIndex& idx) const;

  template <class F>
  void for_each(F&& f) const {
    for (const auto& [idx, tile] : tiles_) f(*tile);
  }

 private:
  struct Context {
    MagHyperparams hp;
    HexGridSpec grid;
    std::shared_ptr<const TileBasis> basis;
  };
  std::shared_ptr<const Context> ctx_;
  std::map<HexIndex, std::shared_ptr<MagTile>> tiles_;
};

}  // namespace pmslam
