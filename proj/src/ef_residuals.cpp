#include "efgeo/ef_residuals.hpp"

#include "efgeo/error.hpp"

namespace efgeo {

namespace {

constexpr cplx I{0.0, 1.0};

const Dynamic *dynamic_of(const TimeMode &mode) { return std::get_if<Dynamic>(&mode); }

void check_dynamic(const Dynamic &dyn, const Grid &grid, int levels) {
  if (!(dyn.a0.grid == grid) || static_cast<std::size_t>(dyn.chi_t.size()) != grid.size() ||
      !(dyn.phi_t.grid == grid) || dyn.phi_t.levels != levels)
    throw ShapeMismatchError("time-derivative data do not match the factorization");
}

} // namespace

ScalarField nuclear_residual(const CovariantCalculus &calc, const MetricOnGrid &metric, const ScalarField &eps_bo,
                             const ScalarField &eps_geo, const TimeMode &mode) {
  const Grid &grid = calc.grid();
  if (!(metric.grid == grid)) throw ShapeMismatchError("metric sampled on another grid");
  const Dynamic *dyn = dynamic_of(mode);
  if (dyn) check_dynamic(*dyn, grid, calc.phi().levels);
  const int d = calc.dim();
  ScalarField r = ScalarField::zeros(grid);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto i = static_cast<Eigen::Index>(node);
    const RMatrix &minv = metric.inverse_mass[node];
    cplx lap = 0.0;
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        cplx nabla = calc.dd_chi(mu, nu)[i];
        for (int lam = 0; lam < d; ++lam) nabla -= metric.pi[node](lam, mu, nu) * calc.d_chi(lam)[i];
        lap += minv(mu, nu) * nabla;
      }
    const cplx chi = calc.chi()[i];
    cplx v = -0.5 * lap + (eps_bo.values[i].real() + eps_geo.values[i].real()) * chi;
    if (dyn)
      v -= I * (dyn->chi_t[i] + I * dyn->a0.values[i].real() * chi);
    else
      v -= std::get<Stationary>(mode).energy * chi;
    r.values[i] = v;
  }
  return r;
}

ElectronicField electronic_residual(const CovariantCalculus &calc, const std::vector<bool> &mask,
                                    const MetricOnGrid &metric, const std::vector<CMatrix> &h_bo,
                                    const ScalarField &eps_bo, const ScalarField &eps_geo, const TimeMode &mode,
                                    ElectronicForm form) {
  const Grid &grid = calc.grid();
  if (!(metric.grid == grid)) throw ShapeMismatchError("metric sampled on another grid");
  if (h_bo.size() != grid.size() || mask.size() != grid.size())
    throw ShapeMismatchError("h_bo samples or mask do not match the grid");
  const int nl = calc.phi().levels;
  const Dynamic *dyn = dynamic_of(mode);
  if (dyn) check_dynamic(*dyn, grid, nl);
  const int d = calc.dim();
  ElectronicField r(grid, nl);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    if (mask[node]) continue;
    const auto i = static_cast<Eigen::Index>(node);
    const RMatrix &minv = metric.inverse_mass[node];
    const CVector phi = calc.phi().at(node);
    const cplx chi = calc.chi()[i];
    CVector v = CVector::Zero(nl);
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        const CVector dd = calc.dd_phi(mu, nu).at(node);
        v -= 0.5 * minv(mu, nu) * dd;
        if (form == ElectronicForm::Nabla)
          for (int lam = 0; lam < d; ++lam)
            v += 0.5 * minv(mu, nu) * metric.pi[node](lam, mu, nu) * calc.d_phi(lam).at(node);
        v -= minv(mu, nu) * (calc.d_chi(mu)[i] / chi) * calc.d_phi(nu).at(node);
      }
    if (form == ElectronicForm::Divergence)
      for (int nu = 0; nu < d; ++nu) v -= 0.5 * metric.divergence[node][nu] * calc.d_phi(nu).at(node);
    v += h_bo[node] * phi - (eps_bo.values[i].real() + eps_geo.values[i].real()) * phi;
    if (dyn) v -= I * (dyn->phi_t.at(node) - I * dyn->a0.values[i].real() * phi);
    r.set(node, v);
  }
  return r;
}

double weighted_norm(const CVector &f, const RVector &weight, const std::vector<bool> &mask) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    if (!mask[static_cast<std::size_t>(i)]) s += weight[i] * std::norm(f[i]);
  return std::sqrt(s);
}

double density_weighted_norm(const ElectronicField &r, const Factorization &fact, const std::vector<bool> &mask) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.values.rows(); ++i)
    if (!mask[static_cast<std::size_t>(i)])
      s += fact.weight[i] * std::norm(fact.chi.values[i]) * r.values.row(i).squaredNorm();
  return std::sqrt(s);
}

double projection_identity_check(const Factorization &fact, const ElectronicField &residual) {
  CVector p(residual.values.rows());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    p[i] = fact.phi.values.row(i).dot(residual.values.row(i)) * std::abs(fact.chi.values[i]);
  return weighted_norm(p, fact.weight, fact.mask);
}

ProjectedResiduals projected_electronic_equations(const Factorization &fact, const CovariantCalculus &calc,
                                                  const EfGeometry &geo, const MetricOnGrid &metric,
                                                  const std::vector<CMatrix> &h_bo, const TimeMode &mode,
                                                  const ElectronicField *residual) {
  const Grid &grid = calc.grid();
  const int d = calc.dim();
  const std::size_t nn = grid.size();
  const Dynamic *dyn = dynamic_of(mode);

  ElectronicField own;
  if (!residual) {
    own = electronic_residual(calc, fact.mask, metric, h_bo, geo.eps_bo, geo.eps_geo, mode);
    residual = &own;
  }

  ProjectedResiduals out;
  out.tangent.assign(static_cast<std::size_t>(d), CVector::Zero(static_cast<Eigen::Index>(nn)));
  out.tangent_direct = out.tangent;
  out.normal.resize(nn);
  out.normal_direct.resize(nn);
  double full = 0.0, parts = 0.0, tn = 0.0, nnorm = 0.0;
  for (std::size_t node = 0; node < nn; ++node) {
    const auto i = static_cast<Eigen::Index>(node);
    const Frame &fr = geo.frame[node];
    const auto nb = static_cast<Eigen::Index>(fr.vectors.size());
    out.normal[node] = CVector::Zero(nb);
    out.normal_direct[node] = CVector::Zero(nb);
    if (geo.flagged[node]) continue;

    const RMatrix &minv = metric.inverse_mass[node];
    const CVector phi = calc.phi().at(node);
    const CVector hphi = h_bo[node] * phi;
    const cplx chi = calc.chi()[i];
    const CVector r = residual->at(node);
    CVector dt_phi = CVector::Zero(phi.size());
    if (dyn) dt_phi = dyn->phi_t.at(node) - I * dyn->a0.values[i].real() * phi;

    CMatrix h(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) h(a, b) = geo.h[{a, b}][i];
    CVector rt(d);
    for (int k = 0; k < d; ++k) {
      const CVector dk = calc.d_phi(k).at(node);
      cplx rhs = dk.dot(hphi);
      for (int mu = 0; mu < d; ++mu)
        for (int nu = 0; nu < d; ++nu) {
          for (int lam = 0; lam < d; ++lam)
            rhs += 0.5 * minv(mu, nu) *
                   (metric.pi[node](lam, mu, nu) - geo.upsilon_second[{lam, mu, nu}][i]) * h(k, lam);
          rhs -= minv(mu, nu) * (calc.d_chi(mu)[i] / chi) * h(k, nu);
        }
      const cplx lhs = I * dk.dot(dt_phi);
      out.tangent[k][i] = rhs - lhs;
      out.tangent_direct[k][i] = dk.dot(r);
      rt[k] = out.tangent_direct[k][i];
      out.tangent_mismatch = std::max(out.tangent_mismatch, std::abs(out.tangent[k][i] - rt[k]));
    }

    CMatrix gram(nb, nb);
    for (Eigen::Index a = 0; a < nb; ++a)
      for (Eigen::Index b = 0; b < nb; ++b) {
        gram(b, a) = fr.vectors[static_cast<std::size_t>(b)].dot(fr.vectors[static_cast<std::size_t>(a)]);
        out.gram_defect = std::max(out.gram_defect, std::abs(gram(b, a) - (a == b ? 1.0 : 0.0)));
      }
    double normal_sq = 0.0;
    for (Eigen::Index b = 0; b < nb; ++b) {
      const CVector &eb = fr.vectors[static_cast<std::size_t>(b)];
      cplx rhs = eb.dot(hphi);
      for (Eigen::Index a = 0; a < nb; ++a)
        for (int mu = 0; mu < d; ++mu)
          for (int nu = 0; nu < d; ++nu)
            rhs -= 0.5 * minv(mu, nu) * gram(b, a) * geo.decomposition.omega[node][static_cast<std::size_t>(a)](mu, nu);
      const cplx lhs = I * eb.dot(dt_phi);
      out.normal[node][b] = rhs - lhs;
      out.normal_direct[node][b] = eb.dot(r);
      normal_sq += std::norm(out.normal_direct[node][b]);
      out.normal_mismatch = std::max(out.normal_mismatch, std::abs(out.normal[node][b] - out.normal_direct[node][b]));
    }

    const double rho = fact.weight[i] * std::norm(chi);
    const double tangent_sq = h.ldlt().solve(rt).dot(rt).real();
    full += rho * r.squaredNorm();
    parts += rho * (std::norm(phi.dot(r)) + tangent_sq + normal_sq);
    double tk = 0.0;
    for (int k = 0; k < d; ++k) tk += std::norm(out.tangent[k][i]);
    tn += rho * tk;
    nnorm += rho * out.normal[node].squaredNorm();
  }
  out.completeness_defect = std::abs(std::sqrt(full) - std::sqrt(parts));
  out.tangent_norm = std::sqrt(tn);
  out.normal_norm = std::sqrt(nnorm);
  return out;
}

nlohmann::json ResidualReport::to_json() const {
  nlohmann::json j;
  j["nuclear_norm"] = nuclear_norm;
  j["electronic_norm"] = electronic_norm;
  j["phi_projection"] = phi_projection;
  j["projected"] = {{"tangent_norm", projected.tangent_norm},
                    {"normal_norm", projected.normal_norm},
                    {"tangent_mismatch", projected.tangent_mismatch},
                    {"normal_mismatch", projected.normal_mismatch},
                    {"gram_defect", projected.gram_defect},
                    {"completeness_defect", projected.completeness_defect}};
  j["form_mismatch"] = form_mismatch;
  j["masked_fraction"] = masked_fraction;
  j["grid"] = nuclear.grid.to_json();
  return j;
}

ResidualReport compute_residuals(const Factorization &fact, const CovariantCalculus &calc, const EfGeometry &geo,
                                 const MetricOnGrid &metric, const std::vector<CMatrix> &h_bo,
                                 const TimeMode &mode) {
  ResidualReport rep;
  rep.nuclear = nuclear_residual(calc, metric, geo.eps_bo, geo.eps_geo, mode);
  rep.electronic = electronic_residual(calc, fact.mask, metric, h_bo, geo.eps_bo, geo.eps_geo, mode,
                                       ElectronicForm::Nabla);
  const ElectronicField div = electronic_residual(calc, fact.mask, metric, h_bo, geo.eps_bo, geo.eps_geo, mode,
                                                  ElectronicForm::Divergence);
  for (std::size_t node = 0; node < fact.mask.size(); ++node)
    if (!fact.mask[node])
      rep.form_mismatch = std::max(rep.form_mismatch, (div.at(node) - rep.electronic.at(node)).cwiseAbs().maxCoeff());
  rep.nuclear_norm = weighted_norm(rep.nuclear.values, fact.weight, fact.mask);
  rep.electronic_norm = density_weighted_norm(rep.electronic, fact, fact.mask);
  rep.phi_projection = projection_identity_check(fact, rep.electronic);
  rep.projected = projected_electronic_equations(fact, calc, geo, metric, h_bo, mode, &rep.electronic);
  rep.masked_fraction = fact.masked_fraction();
  return rep;
}

} // namespace efgeo
