#include "efgeo/ef_geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "efgeo/error.hpp"

namespace efgeo {

namespace {

constexpr cplx I{0.0, 1.0};

CMatrix apply_columns(const FiniteDifference &fd, const CMatrix &m, int axis, int derivative, EdgeRule rule) {
  CMatrix out(m.rows(), m.cols());
  for (Eigen::Index l = 0; l < m.cols(); ++l) out.col(l) = fd.apply(m.col(l), axis, derivative, rule);
  return out;
}

CMatrix second_columns(const FiniteDifference &fd, const CMatrix &m, int mu, int nu, EdgeRule rule) {
  CMatrix out(m.rows(), m.cols());
  for (Eigen::Index l = 0; l < m.cols(); ++l) out.col(l) = fd.second_derivative(m.col(l), mu, nu, rule);
  return out;
}

void check_grid(const Grid &a, const Grid &b) {
  if (!(a == b)) throw ShapeMismatchError("fields live on different grids");
}

//! D_μD_ν f = ∂∂f + s·i(A_ν∂_μf + (∂_μA_ν)f + A_μ∂_νf) − A_μA_ν f, column-wise.
CMatrix expanded_second(const CMatrix &f, const CMatrix &ddf, const CMatrix &df_mu, const CMatrix &df_nu,
                        const RVector &a_mu, const RVector &a_nu, const RVector &da, int sign) {
  CMatrix out = ddf;
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    out.row(i) += static_cast<double>(sign) * I *
                      (a_nu[i] * df_mu.row(i) + da[i] * f.row(i) + a_mu[i] * df_nu.row(i)) -
                  a_mu[i] * a_nu[i] * f.row(i);
  return out;
}

RVector real_part(const CVector &v) { return v.real(); }

} // namespace

TensorField covariant_derivative(const ScalarField &f, const CovectorField &a, int sign,
                                 const FiniteDifference &fd, EdgeRule rule) {
  check_grid(f.grid, a.grid());
  check_grid(f.grid, fd.grid());
  TensorField out(f.grid, 1);
  for (int mu = 0; mu < f.grid.dim(); ++mu)
    out[{mu}] = fd.apply(f.values, mu, 1, rule) + static_cast<double>(sign) * I * a[{mu}].cwiseProduct(f.values);
  return out;
}

std::vector<ElectronicField> covariant_derivative(const ElectronicField &f, const CovectorField &a, int sign,
                                                  const FiniteDifference &fd, EdgeRule rule) {
  check_grid(f.grid, a.grid());
  check_grid(f.grid, fd.grid());
  std::vector<ElectronicField> out;
  for (int mu = 0; mu < f.grid.dim(); ++mu) {
    ElectronicField d(f.grid, f.levels);
    d.values = apply_columns(fd, f.values, mu, 1, rule);
    d.values += static_cast<double>(sign) * I * (a[{mu}].asDiagonal() * f.values);
    out.push_back(std::move(d));
  }
  return out;
}

TensorField second_covariant_derivative(const ScalarField &f, const CovectorField &a, const MetricOnGrid &metric,
                                        int sign, const FiniteDifference &fd, EdgeRule rule) {
  check_grid(f.grid, metric.grid);
  const int d = f.grid.dim();
  const TensorField df = covariant_derivative(f, a, 0, fd, rule); // plain ∂f
  const TensorField cov = covariant_derivative(f, a, sign, fd, rule);
  TensorField out(f.grid, 2);
  for (int mu = 0; mu < d; ++mu)
    for (int nu = 0; nu < d; ++nu) {
      const RVector da = real_part(fd.apply(a[{nu}], mu, 1, EdgeRule::OneSided));
      const CMatrix dd = expanded_second(f.values, fd.second_derivative(f.values, mu, nu, rule), df[{mu}],
                                         df[{nu}], real_part(a[{mu}]), real_part(a[{nu}]), da, sign);
      CVector v = dd.col(0);
      for (std::size_t node = 0; node < f.grid.size(); ++node)
        for (int lam = 0; lam < d; ++lam)
          v[static_cast<Eigen::Index>(node)] -= metric.pi[node](lam, mu, nu) * cov[{lam}][static_cast<Eigen::Index>(node)];
      out[{mu, nu}] = v;
    }
  return out;
}

CovariantCalculus::CovariantCalculus(const Factorization &fact, const FiniteDifference &fd)
    : dim_(fact.chi.grid.dim()), grid_(fact.chi.grid), phi_(fact.phi), chi_(fact.chi.values) {
  check_grid(grid_, fd.grid());
  if (fact.phi.normalization_defect() > 1e-10) throw NormalizationError("covariant calculus needs a normalized Φ");
  const CanonicalGauge cg(fact.phi);
  const CVector rot = cg.phase(); // Φ = rot·Φ_c, χ = conj(rot)·χ_c
  const CMatrix &pc = cg.phi().values;
  const CVector chic = rot.cwiseProduct(chi_);
  const auto nn = pc.rows();
  const int nl = fact.phi.levels;

  std::vector<CMatrix> dphi(static_cast<std::size_t>(dim_));
  std::vector<CVector> dchi(static_cast<std::size_t>(dim_));
  std::vector<RVector> ac(static_cast<std::size_t>(dim_));
  a_ = CovectorField(grid_, 1, true);
  for (int mu = 0; mu < dim_; ++mu) {
    dphi[mu] = apply_columns(fd, pc, mu, 1, EdgeRule::OneSided);
    dchi[mu] = fd.apply(chic, mu, 1, EdgeRule::Dirichlet);
    ac[mu].resize(nn);
    ElectronicField dp(grid_, nl), pa(grid_, nl);
    for (Eigen::Index i = 0; i < nn; ++i) {
      const cplx overlap = pc.row(i).dot(dphi[mu].row(i)); // ⟨Φ|∂Φ⟩
      const cplx a = -I * overlap;
      imaginary_residue_ = std::max(imaginary_residue_, std::abs(a.imag()));
      ac[mu][i] = a.real();
      dp.values.row(i) = rot[i] * (dphi[mu].row(i) - overlap * pc.row(i));
      pa.values.row(i) = -I * dp.values.row(i);
    }
    d_phi_.push_back(std::move(dp));
    pa_phi_.push_back(std::move(pa));
    CVector dc(nn);
    for (Eigen::Index i = 0; i < nn; ++i) dc[i] = std::conj(rot[i]) * (dchi[mu][i] + I * ac[mu][i] * chic[i]);
    d_chi_.push_back(std::move(dc));
    a_[{mu}] = (ac[mu] + fd.phase_derivative(cg.theta(), mu)).cast<cplx>();
  }
  const CMatrix chic_col = chic;
  for (int mu = 0; mu < dim_; ++mu)
    for (int nu = 0; nu < dim_; ++nu) {
      const RVector da = real_part(fd.apply(ac[nu].cast<cplx>(), mu, 1, EdgeRule::OneSided));
      const CMatrix ddp = expanded_second(pc, second_columns(fd, pc, mu, nu, EdgeRule::OneSided), dphi[mu],
                                          dphi[nu], ac[mu], ac[nu], da, -1);
      ElectronicField e(grid_, nl);
      e.values = rot.asDiagonal() * ddp;
      dd_phi_.push_back(std::move(e));
      const CMatrix ddc = expanded_second(chic_col, fd.second_derivative(chic, mu, nu, EdgeRule::Dirichlet),
                                          dchi[mu], dchi[nu], ac[mu], ac[nu], da, +1);
      dd_chi_.push_back(rot.conjugate().cwiseProduct(ddc.col(0)));
    }
}

TensorField quantum_geometric_tensor(const CovariantCalculus &calc) {
  const int d = calc.dim();
  TensorField h(calc.grid(), 2);
  for (int l = 0; l < d; ++l)
    for (int k = 0; k < d; ++k) {
      CVector &c = h[{l, k}];
      const CMatrix &a = calc.d_phi(l).values;
      const CMatrix &b = calc.d_phi(k).values;
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = a.row(i).dot(b.row(i));
    }
  return h;
}

TensorField quantum_metric(const CovariantCalculus &calc) {
  const int d = calc.dim();
  TensorField g(calc.grid(), 2, true);
  for (int mu = 0; mu < d; ++mu)
    for (int nu = 0; nu < d; ++nu) {
      CVector &c = g[{mu, nu}];
      const CMatrix &a = calc.p_minus_a_phi(mu).values;
      const CMatrix &b = calc.p_minus_a_phi(nu).values;
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = a.row(i).dot(b.row(i)).real();
    }
  return g;
}

ScalarField epsilon_geo(const MetricOnGrid &metric, const TensorField &g) {
  check_grid(metric.grid, g.grid());
  if (g.rank() != 2) throw ShapeMismatchError("ε_geo needs a rank-2 metric");
  ScalarField e = ScalarField::zeros(g.grid(), true);
  const int d = g.dim();
  for (std::size_t node = 0; node < g.grid().size(); ++node) {
    double s = 0.0;
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu)
        s += metric.inverse_mass[node](mu, nu) * g[{mu, nu}][static_cast<Eigen::Index>(node)].real();
    e.values[static_cast<Eigen::Index>(node)] = 0.5 * s;
  }
  return e;
}

ScalarField epsilon_bo(const ElectronicField &phi, const std::vector<CMatrix> &h_bo, double *imaginary) {
  if (h_bo.size() != phi.grid.size()) throw ShapeMismatchError("h_bo samples do not match the grid");
  ScalarField e = ScalarField::zeros(phi.grid, true);
  double worst = 0.0;
  for (std::size_t node = 0; node < h_bo.size(); ++node) {
    const CMatrix &h = h_bo[node];
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
      throw NotHermitianError("h_bo not Hermitian");
    const CVector v = phi.at(node);
    const cplx x = v.dot(h * v);
    worst = std::max(worst, std::abs(x.imag()));
    e.values[static_cast<Eigen::Index>(node)] = x.real();
  }
  if (imaginary) *imaginary = worst;
  return e;
}

TensorField quantum_christoffel_first(const CovariantCalculus &calc, double *asymmetry) {
  const int d = calc.dim();
  TensorField raw(calc.grid(), 3);
  for (int l = 0; l < d; ++l)
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        CVector &c = raw[{l, mu, nu}];
        const CMatrix &a = calc.d_phi(l).values;
        const CMatrix &b = calc.dd_phi(mu, nu).values;
        for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = a.row(i).dot(b.row(i));
      }
  TensorField sym(calc.grid(), 3);
  double asym = 0.0;
  for (int l = 0; l < d; ++l)
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        asym = std::max(asym, (raw[{l, mu, nu}] - raw[{l, nu, mu}]).cwiseAbs().maxCoeff());
        sym[{l, mu, nu}] = 0.5 * (raw[{l, mu, nu}] + raw[{l, nu, mu}]);
      }
  if (asymmetry) *asymmetry = asym;
  return sym;
}

TensorField christoffel_from_metric(const TensorField &g, const FiniteDifference &fd) {
  check_grid(g.grid(), fd.grid());
  const int d = g.dim();
  // dg[κ][(μ,ν)] = ∂_κ g_{μν}
  std::vector<std::vector<CVector>> dg(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k)
    for (std::size_t c = 0; c < g.components(); ++c) dg[k].push_back(fd.apply(g.component(c), k, 1, EdgeRule::OneSided));
  auto at = [&](int k, int mu, int nu) -> const CVector & { return dg[k][static_cast<std::size_t>(mu * d + nu)]; };
  TensorField out(g.grid(), 3, true);
  for (int l = 0; l < d; ++l)
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu)
        out[{l, mu, nu}] = (0.5 * (at(mu, l, nu) + at(nu, l, mu) - at(l, mu, nu))).real().cast<cplx>();
  return out;
}

ChristoffelSecond quantum_christoffel_second(const TensorField &h, const TensorField &upsilon_first,
                                             double cond_cap, double floor) {
  check_grid(h.grid(), upsilon_first.grid());
  const int d = h.dim();
  const std::size_t nn = h.grid().size();
  ChristoffelSecond out;
  out.upsilon = TensorField(h.grid(), 3);
  out.flagged.assign(nn, false);

  auto h_at = [&](std::size_t node) {
    CMatrix m(d, d);
    for (int l = 0; l < d; ++l)
      for (int k = 0; k < d; ++k) m(l, k) = h[{l, k}][static_cast<Eigen::Index>(node)];
    return CMatrix(0.5 * (m + m.adjoint()));
  };
  std::vector<RVector> eig(nn);
  double top = 0.0;
  for (std::size_t node = 0; node < nn; ++node) {
    eig[node] = Eigen::SelfAdjointEigenSolver<CMatrix>(h_at(node), Eigen::EigenvaluesOnly).eigenvalues();
    top = std::max(top, eig[node].maxCoeff());
  }
  for (std::size_t node = 0; node < nn; ++node) {
    const double lo = eig[node].minCoeff();
    const double hi = eig[node].maxCoeff();
    if (!(lo > top / cond_cap) || !(lo > floor) || !(hi < cond_cap * lo)) {
      out.flagged[node] = true;
      continue;
    }
    const CMatrix hm = h_at(node);
    const Eigen::PartialPivLU<CMatrix> lu(hm);
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        CVector rhs(d);
        for (int k = 0; k < d; ++k) rhs[k] = upsilon_first[{k, mu, nu}][static_cast<Eigen::Index>(node)];
        const CVector x = lu.solve(rhs);
        for (int l = 0; l < d; ++l) out.upsilon[{l, mu, nu}][static_cast<Eigen::Index>(node)] = x[l];
        // reconstruction with the unsymmetrized h as stored
        CMatrix hr(d, d);
        for (int l = 0; l < d; ++l)
          for (int k = 0; k < d; ++k) hr(l, k) = h[{l, k}][static_cast<Eigen::Index>(node)];
        out.reconstruction_error = std::max(out.reconstruction_error, (hr * x - rhs).cwiseAbs().maxCoeff());
      }
  }
  return out;
}

Frame tangent_frame(const CVector &phi, const std::vector<CVector> &d_phi, double rank_tolerance) {
  const Eigen::Index n = phi.size();
  std::vector<CVector> span{phi.normalized()};
  auto residual = [&](const CVector &v, const std::vector<CVector> &extra) {
    CVector r = v;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto &b : span) r -= b * b.dot(r);
      for (const auto &b : extra) r -= b * b.dot(r);
    }
    return r;
  };
  Frame f;
  for (const auto &v : d_phi) {
    const CVector r = residual(v, {});
    if (r.norm() > rank_tolerance) {
      span.push_back(r / r.norm());
      ++f.rank;
    }
  }
  const auto need = static_cast<std::size_t>(n) - span.size();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < n && f.vectors.size() < need; ++k) {
    const CVector r = residual(CVector::Unit(n, k), f.vectors);
    if (r.squaredNorm() > 0.5 / static_cast<double>(n)) {
      f.vectors.push_back(r / r.norm());
      used[static_cast<std::size_t>(k)] = true;
    }
  }
  while (f.vectors.size() < need) {
    // fall back to the strongest remaining seed
    Eigen::Index best = -1;
    CVector best_r;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (used[static_cast<std::size_t>(k)]) continue;
      const CVector r = residual(CVector::Unit(n, k), f.vectors);
      if (best < 0 || r.squaredNorm() > best_r.squaredNorm()) {
        best = k;
        best_r = r;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    f.vectors.push_back(best_r / best_r.norm());
  }
  return f;
}

std::vector<Frame> tangent_frames(const CovariantCalculus &calc, double rank_tolerance) {
  std::vector<Frame> out;
  for (std::size_t node = 0; node < calc.grid().size(); ++node) {
    std::vector<CVector> dp;
    for (int mu = 0; mu < calc.dim(); ++mu) dp.push_back(calc.d_phi(mu).at(node));
    out.push_back(tangent_frame(calc.phi().at(node), dp, rank_tolerance));
  }
  return out;
}

Decomposition decompose_second_derivative(const CovariantCalculus &calc, const std::vector<Frame> &frames) {
  const int d = calc.dim();
  const std::size_t nn = calc.grid().size();
  if (frames.size() != nn) throw ShapeMismatchError("one frame per node expected");
  Decomposition out;
  out.residual = RVector::Zero(static_cast<Eigen::Index>(nn));
  for (std::size_t node = 0; node < nn; ++node) {
    const Frame &fr = frames[node];
    const auto nb = static_cast<Eigen::Index>(1 + d + fr.vectors.size());
    CMatrix basis(calc.phi().levels, nb);
    basis.col(0) = calc.phi().at(node);
    for (int l = 0; l < d; ++l) basis.col(1 + l) = calc.d_phi(l).at(node);
    for (std::size_t a = 0; a < fr.vectors.size(); ++a) basis.col(static_cast<Eigen::Index>(1 + d + a)) = fr.vectors[a];
    const Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(basis);

    CMatrix phi_part(d, d);
    std::vector<CMatrix> ups(static_cast<std::size_t>(d), CMatrix(d, d));
    std::vector<CMatrix> om(fr.vectors.size(), CMatrix(d, d));
    double res = 0.0;
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        const CVector target = calc.dd_phi(mu, nu).at(node);
        const CVector c = cod.solve(target);
        phi_part(mu, nu) = c[0];
        for (int l = 0; l < d; ++l) ups[l](mu, nu) = c[1 + l];
        for (std::size_t a = 0; a < om.size(); ++a) om[a](mu, nu) = c[static_cast<Eigen::Index>(1 + d + a)];
        res = std::max(res, (basis * c - target).norm());
      }
    out.phi_part.push_back(phi_part);
    out.upsilon.push_back(std::move(ups));
    out.omega.push_back(std::move(om));
    out.residual[static_cast<Eigen::Index>(node)] = res;
  }
  return out;
}

EfGeometry compute_ef_geometry(const Factorization &fact, const CovariantCalculus &calc,
                               const MetricOnGrid &metric, const std::vector<CMatrix> &h_bo,
                               const EfGeometryOptions &opt) {
  EfGeometry g;
  g.h = quantum_geometric_tensor(calc);
  g.g = quantum_metric(calc);
  g.eps_geo = epsilon_geo(metric, g.g);
  g.eps_bo = epsilon_bo(fact.phi, h_bo, &g.eps_bo_imaginary);
  g.upsilon_first = quantum_christoffel_first(calc, &g.upsilon_asymmetry);
  g.gamma = TensorField(calc.grid(), 3, true);
  g.c_tensor = TensorField(calc.grid(), 3, true);
  for (std::size_t c = 0; c < g.upsilon_first.components(); ++c) {
    g.gamma.component(c) = g.upsilon_first.component(c).real().cast<cplx>();
    g.c_tensor.component(c) = g.upsilon_first.component(c).imag().cast<cplx>();
  }
  auto second = quantum_christoffel_second(g.h, g.upsilon_first, opt.cond_cap, opt.h_floor);
  g.upsilon_second = std::move(second.upsilon);
  g.flagged = std::move(second.flagged);
  for (std::size_t i = 0; i < g.flagged.size(); ++i) g.flagged[i] = g.flagged[i] || fact.mask[i];
  g.reconstruction_error = second.reconstruction_error;
  g.frame = tangent_frames(calc, opt.rank_tolerance);
  g.decomposition = decompose_second_derivative(calc, g.frame);
  return g;
}

} // namespace efgeo
