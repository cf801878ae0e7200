#include "pmslam/magmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "pmslam/kernels.hpp"

namespace pmslam {
namespace {

struct GradientScratch {
  std::array<std::vector<double>, 3> sin_tab, dcos_tab;
  std::array<std::vector<double>, 3> g;
};

GradientScratch& scratch() {
  thread_local GradientScratch s;
  return s;
}

// Fills scratch().g with the SE-mode gradients at p (linear part excluded).
void mode_gradients(const Vec3& p, const MagTile& tile) {
  const TileBasis& basis = *tile.basis;
  auto& s = scratch();
  for (int i = 0; i < 3; ++i) {
    const double L = basis.half_lengths[i];
    const double k = M_PI / (2.0 * L);
    const double u = p[i] - tile.center[i] + L;
    const int nmax = basis.max_n[i];
    s.sin_tab[i].resize(nmax + 1);
    s.dcos_tab[i].resize(nmax + 1);
    s.sin_tab[i][0] = 0.0;
    s.dcos_tab[i][0] = 0.0;
    for (int n = 1; n <= nmax; ++n) {
      const double arg = k * n * u;
      s.sin_tab[i][n] = std::sin(arg);
      s.dcos_tab[i][n] = k * n * std::cos(arg);
    }
  }
  const std::size_t m = basis.modes.size();
  for (auto& g : s.g) g.resize(m);
  const kernels::AxisTables tab{{s.sin_tab[0].data(), s.sin_tab[1].data(), s.sin_tab[2].data()},
                                {s.dcos_tab[0].data(), s.dcos_tab[1].data(),
                                 s.dcos_tab[2].data()}};
  const kernels::ModeIndices idx{
      {basis.mode_n[0].data(), basis.mode_n[1].data(), basis.mode_n[2].data()}, m};
  const double norm = 1.0 / std::sqrt(basis.half_lengths.prod());
  kernels::active_kernels().mode_gradients(tab, idx, norm, s.g[0].data(), s.g[1].data(),
                                           s.g[2].data());
}

void check_domain(const MagTile& tile, const Vec3& p) {
  if (!tile.domain_contains(p, 1e-9)) {
    throw std::out_of_range("position outside magnetic tile domain");
  }
}

void symmetrize(Eigen::MatrixXd& P) {
  const Eigen::Index n = P.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      const double a = 0.5 * (P(i, j) + P(j, i));
      P(i, j) = a;
      P(j, i) = a;
    }
  }
}

}  // namespace

bool MagHyperparams::valid() const {
  if (!(lengthscale > 0.0 && sigma_se > 0.0 && sigma_lin > 0.0)) return false;
  if (num_basis < 1 || !(margin >= 1.0)) return false;
  if (!noise.isApprox(noise.transpose())) return false;
  return Eigen::LLT<Mat3>(noise).info() == Eigen::Success;
}

double spectral_density_se(double lambda, const MagHyperparams& hp) {
  const double l2 = hp.lengthscale * hp.lengthscale;
  return hp.sigma_se * hp.sigma_se * std::pow(2.0 * M_PI * l2, 1.5) *
         std::exp(-0.5 * lambda * lambda * l2);
}

std::shared_ptr<const TileBasis> make_tile_basis(const MagHyperparams& hp,
                                                 const HexGridSpec& grid) {
  if (!hp.valid()) throw std::invalid_argument("invalid magnetic hyperparameters");
  if (!grid.valid()) throw std::invalid_argument("invalid magnetic grid");
  auto basis = std::make_shared<TileBasis>();
  basis->half_lengths = Vec3(hp.margin * grid.radius, hp.margin * grid.radius,
                             hp.margin * grid.half_height);
  Vec3 k;
  for (int i = 0; i < 3; ++i) k[i] = M_PI / (2.0 * basis->half_lengths[i]);

  const std::size_t m = static_cast<std::size_t>(hp.num_basis);
  // Grow a spherical cutoff in frequency until it holds at least m modes.
  double cut = k.maxCoeff() * 2.0;
  std::vector<BasisMode> cand;
  for (;;) {
    cand.clear();
    std::array<int, 3> nmax;
    for (int i = 0; i < 3; ++i) nmax[i] = static_cast<int>(std::floor(cut / k[i]));
    for (int a = 1; a <= nmax[0]; ++a) {
      for (int b = 1; b <= nmax[1]; ++b) {
        for (int c = 1; c <= nmax[2]; ++c) {
          const double l2 = (k[0] * a) * (k[0] * a) + (k[1] * b) * (k[1] * b) +
                            (k[2] * c) * (k[2] * c);
          if (l2 <= cut * cut) cand.push_back({{a, b, c}, l2});
        }
      }
    }
    if (cand.size() >= m) break;
    cut *= 1.25;
  }
  std::sort(cand.begin(), cand.end(), [](const BasisMode& x, const BasisMode& y) {
    if (x.lambda != y.lambda) return x.lambda < y.lambda;
    return x.n < y.n;
  });
  cand.resize(m);
  for (auto& mode : cand) mode.lambda = std::sqrt(mode.lambda);
  basis->modes = std::move(cand);

  basis->prior_variance.resize(static_cast<Eigen::Index>(m + 3));
  basis->prior_variance.head<3>().setConstant(hp.sigma_lin * hp.sigma_lin);
  for (std::size_t j = 0; j < m; ++j) {
    basis->prior_variance[static_cast<Eigen::Index>(j + 3)] =
        spectral_density_se(basis->modes[j].lambda, hp);
  }
  for (int i = 0; i < 3; ++i) {
    basis->mode_n[i].resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      basis->mode_n[i][j] = basis->modes[j].n[i];
      basis->max_n[i] = std::max(basis->max_n[i], basis->modes[j].n[i]);
    }
  }
  return basis;
}

bool MagTile::domain_contains(const Vec3& p, double tol) const {
  return ((p - center).cwiseAbs() - half_lengths()).maxCoeff() <= tol;
}

MagTile build_basis(const HexIndex& idx, const HexGridSpec& grid,
                    std::shared_ptr<const TileBasis> basis) {
  MagTile t;
  t.idx = idx;
  t.center = pmslam::center(idx, grid);
  t.basis = std::move(basis);
  const auto n = static_cast<Eigen::Index>(t.basis->state_dim());
  t.mean = Eigen::VectorXd::Zero(n);
  t.cov = t.basis->prior_variance.asDiagonal();
  return t;
}

MagTile build_basis(const HexIndex& idx, const MagHyperparams& hp, const HexGridSpec& grid) {
  return build_basis(idx, grid, make_tile_basis(hp, grid));
}

double eigenfunction(const MagTile& tile, std::size_t mode, const Vec3& p) {
  const auto& L = tile.half_lengths();
  const auto& n = tile.basis->modes.at(mode).n;
  double v = 1.0;
  for (int i = 0; i < 3; ++i) {
    v *= std::sin(M_PI * n[i] * (p[i] - tile.center[i] + L[i]) / (2.0 * L[i])) /
         std::sqrt(L[i]);
  }
  return v;
}

GradientMatrix basis_gradients(const Vec3& p, const MagTile& tile) {
  check_domain(tile, p);
  mode_gradients(p, tile);
  const auto& g = scratch().g;
  const std::size_t m = tile.basis->modes.size();
  GradientMatrix G(3, static_cast<Eigen::Index>(m + 3));
  G.leftCols<3>().setIdentity();
  for (int a = 0; a < 3; ++a) {
    G.row(a).tail(static_cast<Eigen::Index>(m)) =
        Eigen::Map<const Eigen::RowVectorXd>(g[a].data(), static_cast<Eigen::Index>(m));
  }
  return G;
}

MagInnovation make_innovation(const MagTile& tile, const Pose& pose, const MagHyperparams& hp) {
  check_domain(tile, pose.p);
  mode_gradients(pose.p, tile);
  const auto& g = scratch().g;
  const std::size_t m = tile.basis->modes.size();
  const auto n = static_cast<Eigen::Index>(m + 3);
  const Mat3 R = to_rotation(pose.q);

  MagInnovation out;
  // Ct = (R^T grad Phi)^T, one contiguous column per measurement axis.
  Eigen::Matrix<double, Eigen::Dynamic, 3> Ct(n, 3);
  Ct.topRows<3>() = R;
  using Arr = Eigen::Map<const Eigen::ArrayXd>;
  const auto mm = static_cast<Eigen::Index>(m);
  const Arr gx(g[0].data(), mm), gy(g[1].data(), mm), gz(g[2].data(), mm);
  for (int a = 0; a < 3; ++a) {
    Ct.col(a).tail(mm).array() = R(0, a) * gx + R(1, a) * gy + R(2, a) * gz;
  }

  out.PCt.resize(n, 3);
  const double* C[3] = {Ct.col(0).data(), Ct.col(1).data(), Ct.col(2).data()};
  double* W[3] = {out.PCt.col(0).data(), out.PCt.col(1).data(), out.PCt.col(2).data()};
  kernels::active_kernels().accumulate_pct(tile.cov.data(), static_cast<std::size_t>(n),
                                           static_cast<std::size_t>(tile.cov.rows()), C, W);

  out.pred.zhat = Ct.transpose() * tile.mean;
  out.pred.S = Ct.transpose() * out.PCt + hp.noise;
  out.pred.S = 0.5 * (out.pred.S + out.pred.S.transpose()).eval();
  out.C = Ct.transpose();
  return out;
}

MagPrediction predict_measurement(const MagTile& tile, const Pose& pose,
                                  const MagHyperparams& hp) {
  return make_innovation(tile, pose, hp).pred;
}

double log_likelihood(const MagInnovation& innov, const Vec3& z) {
  const Eigen::LLT<Mat3> llt(innov.pred.S);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("magnetic innovation covariance is not positive definite");
  }
  const Vec3 e = z - innov.pred.zhat;
  const Vec3 y = llt.matrixL().solve(e);
  const Mat3 L = llt.matrixL();
  const double logdet = 2.0 * std::log(L.diagonal().prod());
  return -0.5 * (3.0 * std::log(2.0 * M_PI) + logdet + y.squaredNorm());
}

double log_likelihood(const MagTile& tile, const Pose& pose, const Vec3& z,
                      const MagHyperparams& hp) {
  return log_likelihood(make_innovation(tile, pose, hp), z);
}

void kalman_update_inplace(MagTile& tile, const MagInnovation& innov, const Vec3& z) {
  const Eigen::LLT<Mat3> llt(innov.pred.S);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("magnetic innovation covariance is singular");
  }
  // K = P C^T S^-1 computed as (S^-1 (P C^T)^T)^T.
  const Eigen::Matrix<double, Eigen::Dynamic, 3> K =
      llt.solve(innov.PCt.transpose()).transpose();
  tile.mean += K * (z - innov.pred.zhat);

  const auto n = static_cast<std::size_t>(tile.cov.rows());
  const double* Kc[3] = {K.col(0).data(), K.col(1).data(), K.col(2).data()};
  const double* Wc[3] = {innov.PCt.col(0).data(), innov.PCt.col(1).data(),
                         innov.PCt.col(2).data()};
  kernels::active_kernels().rank3_downdate(tile.cov.data(), n, n, Kc, Wc);
  symmetrize(tile.cov);
}

MagTile kalman_update(const MagTile& tile, const Pose& pose, const Vec3& z,
                      const MagHyperparams& hp) {
  MagTile out = tile;
  kalman_update_inplace(out, make_innovation(tile, pose, hp), z);
  return out;
}

Vec3 predicted_field(const MagTile& tile, const Vec3& p) {
  return basis_gradients(p, tile) * tile.mean;
}

std::vector<HexIndex> tiles_containing(const Vec3& p, const HexGridSpec& grid,
                                       const MagHyperparams& hp) {
  const HexIndex base = locate(p, grid);
  const double Lxy = hp.margin * grid.radius;
  const double Lz = hp.margin * grid.half_height;
  const int h = static_cast<int>(std::ceil((grid.radius + std::sqrt(2.0) * Lxy) /
                                           (1.5 * grid.radius)));
  const int hz = static_cast<int>(std::ceil((grid.half_height + Lz) / (2.0 * grid.half_height)));

  struct Hit {
    double d2;
    HexIndex idx;
  };
  std::vector<Hit> hits;
  for (int da = -h; da <= h; ++da) {
    for (int db = std::max(-h, -da - h); db <= std::min(h, -da + h); ++db) {
      for (int dl = -hz; dl <= hz; ++dl) {
        const HexIndex idx{base.a + da, base.b + db, base.layer + dl};
        const Vec3 d = p - center(idx, grid);
        if (std::abs(d.x()) <= Lxy && std::abs(d.y()) <= Lxy && std::abs(d.z()) <= Lz) {
          hits.push_back({d.squaredNorm(), idx});
        }
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) {
    if (x.d2 != y.d2) return x.d2 < y.d2;
    return x.idx < y.idx;
  });
  std::vector<HexIndex> out;
  out.reserve(hits.size());
  for (const auto& hit : hits) out.push_back(hit.idx);
  return out;
}

MagMap::MagMap(const MagHyperparams& hp, const HexGridSpec& grid)
    : ctx_(std::make_shared<const Context>(Context{hp, grid, make_tile_basis(hp, grid)})) {}

const MagTile* MagMap::find(const HexIndex& idx) const {
  const auto it = tiles_.find(idx);
  return it == tiles_.end() ? nullptr : it->second.get();
}

const MagTile& MagMap::ensure(const HexIndex& idx) {
  auto it = tiles_.find(idx);
  if (it == tiles_.end()) {
    it = tiles_.emplace(idx, std::make_shared<MagTile>(build_basis(idx, ctx_->grid, ctx_->basis)))
             .first;
  }
  return *it->second;
}

MagTile& MagMap::mutable_tile(const HexIndex& idx) {
  ensure(idx);
  auto& ptr = tiles_.at(idx);
  if (ptr.use_count() > 1) ptr = std::make_shared<MagTile>(*ptr);
  return *ptr;
}

void MagMap::set_tile(MagTile tile) {
  const HexIndex idx = tile.idx;
  tiles_[idx] = std::make_shared<MagTile>(std::move(tile));
}

bool MagMap::shares_storage(const MagMap& other, const HexIndex& idx) const {
  const auto a = tiles_.find(idx);
  const auto b = other.tiles_.find(idx);
  return a != tiles_.end() && b != other.tiles_.end() && a->second == b->second;
}

}  // namespace pmslam
