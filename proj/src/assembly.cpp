#include "cavitiga/assembly.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "cavitiga/errors.hpp"

namespace cavitiga {

double speed_of_light() { return 1.0 / std::sqrt(kMu0 * kEps0); }

int assembly_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("CAVITIGA_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
constexpr int kChunk = 32;

/// Runs fn(item, out) for items [0, n) in chunks; outputs are concatenated in
/// chunk order.
template <typename T, typename F>
std::vector<T> chunked(int n, F&& fn) {
  const int chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::vector<T>> parts(static_cast<std::size_t>(chunks));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int c = next++; c < chunks; c = next++)
      for (int i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) fn(i, parts[c]);
  };
  const int nt = std::min(assembly_threads(), std::max(chunks, 1));
  if (nt <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  std::vector<T> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

/// Univariate basis values and first derivatives at every quadrature point of
/// every element along one direction.
struct DirTable {
  int nq = 0;
  int ne = 0;
  std::vector<int> first;                  // [e * nq + q]
  std::vector<Eigen::MatrixXd> ders;       // [e * nq + q], 2 x (p+1)
  std::vector<double> points, weights;     // [e * nq + q]
};

DirTable make_table(const KnotVector& kv, const std::vector<double>& breaks, const GaussRule& rule) {
  DirTable t;
  t.nq = static_cast<int>(rule.points.size());
  t.ne = static_cast<int>(breaks.size()) - 1;
  for (int e = 0; e < t.ne; ++e) {
    const double h = breaks[e + 1] - breaks[e];
    for (int q = 0; q < t.nq; ++q) {
      const double x = breaks[e] + h * rule.points[q];
      Eigen::MatrixXd d(2, kv.degree() + 1);
      const int span = eval_basis_into(kv, x, 1, d);
      t.first.push_back(span - kv.degree());
      t.ders.push_back(std::move(d));
      t.points.push_back(x);
      t.weights.push_back(h * rule.weights[q]);
    }
  }
  return t;
}

/// Per-patch tables for the geometry and a set of component knot vectors.
struct PatchTables {
  std::array<DirTable, 3> geo;
  std::vector<std::array<DirTable, 3>> comp;
  int num_elements() const { return geo[0].ne * geo[1].ne * geo[2].ne; }
  std::array<int, 3> element(int e) const {
    return {e % geo[0].ne, (e / geo[0].ne) % geo[1].ne, e / (geo[0].ne * geo[1].ne)};
  }
};

PatchTables make_tables(const NurbsPatch& patch, const std::vector<std::array<KnotVector, 3>>& comps) {
  PatchTables t;
  for (int d = 0; d < 3; ++d) {
    const auto br = patch.knots[d].breaks();
    const auto rule = gauss_legendre(patch.knots[d].degree() + 1);
    t.geo[d] = make_table(patch.knots[d], br, rule);
  }
  for (const auto& kv : comps) {
    std::array<DirTable, 3> c;
    for (int d = 0; d < 3; ++d) {
      if (kv[d].breaks() != patch.knots[d].breaks()) throw SpaceError("space and geometry breakpoints differ");
      c[d] = make_table(kv[d], patch.knots[d].breaks(), gauss_legendre(patch.knots[d].degree() + 1));
    }
    t.comp.push_back(std::move(c));
  }
  return t;
}

/// Rational basis of the geometry at one tensor quadrature point: values and
/// reference gradients of the (p+1)^3 nonzero functions, plus F and DF.
struct GeoPoint {
  std::vector<int> local;
  Eigen::VectorXd R;
  Eigen::Matrix3Xd dR;  // reference gradients
  Vec3 x;
  Mat3 J;
  double det = 0.0;
  double weight = 0.0;
};

void eval_geo_point(const NurbsPatch& patch, const PatchTables& t, const std::array<int, 3>& e,
                    const std::array<int, 3>& q, GeoPoint& g) {
  const auto n = patch.counts();
  std::array<const Eigen::MatrixXd*, 3> D{};
  std::array<int, 3> first{};
  double w = 1.0;
  for (int d = 0; d < 3; ++d) {
    const int k = e[d] * t.geo[d].nq + q[d];
    D[d] = &t.geo[d].ders[k];
    first[d] = t.geo[d].first[k];
    w *= t.geo[d].weights[k];
  }
  const int m0 = static_cast<int>(D[0]->cols()), m1 = static_cast<int>(D[1]->cols()), m2 = static_cast<int>(D[2]->cols());
  const int m = m0 * m1 * m2;
  g.local.resize(m);
  g.R.resize(m);
  g.dR.resize(3, m);
  double W = 0.0;
  Vec3 dW = Vec3::Zero();
  int k = 0;
  for (int c = 0; c < m2; ++c)
    for (int b = 0; b < m1; ++b)
      for (int a = 0; a < m0; ++a, ++k) {
        const int l = (first[0] + a) + n[0] * ((first[1] + b) + n[1] * (first[2] + c));
        const double wl = patch.weights[l];
        g.local[k] = l;
        g.R[k] = wl * (*D[0])(0, a) * (*D[1])(0, b) * (*D[2])(0, c);
        g.dR.col(k) = wl * Vec3((*D[0])(1, a) * (*D[1])(0, b) * (*D[2])(0, c),
                                (*D[0])(0, a) * (*D[1])(1, b) * (*D[2])(0, c),
                                (*D[0])(0, a) * (*D[1])(0, b) * (*D[2])(1, c));
        W += g.R[k];
        dW += g.dR.col(k);
      }
  for (int i = 0; i < m; ++i) {
    g.R[i] /= W;
    g.dR.col(i) = (g.dR.col(i) - g.R[i] * dW) / W;
  }
  g.x.setZero();
  g.J.setZero();
  for (int i = 0; i < m; ++i) {
    g.x += g.R[i] * patch.points[g.local[i]];
    g.J += patch.points[g.local[i]] * g.dR.col(i).transpose();
  }
  g.det = g.J.determinant();
  g.weight = w;
  if (!(g.det > 0.0)) throw EvaluationError("non-positive Jacobian determinant at a quadrature point");
}

}  // namespace

MaxwellMatrices assemble_maxwell(const SplineSpace& hcurl, double mu, double eps) {
  if (hcurl.kind() != SpaceKind::Hcurl) throw SpaceError("assemble_maxwell needs an Hcurl space");
  const auto& geo = hcurl.geometry();
  struct Item {
    int patch, element;
  };
  std::vector<PatchTables> tables;
  std::vector<Item> items;
  for (int p = 0; p < geo.num_patches(); ++p) {
    tables.push_back(make_tables(geo.patches[p], {hcurl.knots(p, 0), hcurl.knots(p, 1), hcurl.knots(p, 2)}));
    for (int e = 0; e < tables.back().num_elements(); ++e) items.push_back({p, e});
  }
  using Pair = std::pair<Eigen::Triplet<double>, Eigen::Triplet<double>>;
  const auto entries = chunked<Pair>(static_cast<int>(items.size()), [&](int it, std::vector<Pair>& out) {
    const auto [p, el] = items[it];
    const auto& t = tables[p];
    const auto e = t.element(el);
    // Local DOFs of the element: per component, tensor product of the
    // nonzero univariate functions.
    std::vector<int> free_idx;
    std::vector<double> sign;
    std::vector<int> comp_start;
    for (int c = 0; c < 3; ++c) {
      comp_start.push_back(static_cast<int>(free_idx.size()));
      const auto n = hcurl.counts(p, c);
      std::array<int, 3> first{}, cnt{};
      for (int d = 0; d < 3; ++d) {
        first[d] = t.comp[c][d].first[e[d] * t.comp[c][d].nq];
        cnt[d] = static_cast<int>(t.comp[c][d].ders[0].cols());
      }
      for (int k2 = 0; k2 < cnt[2]; ++k2)
        for (int k1 = 0; k1 < cnt[1]; ++k1)
          for (int k0 = 0; k0 < cnt[0]; ++k0) {
            const int l = hcurl.component_offset(p, c) + (first[0] + k0) + n[0] * ((first[1] + k1) + n[1] * (first[2] + k2));
            const DofRef r = hcurl.dof(p, l);
            free_idx.push_back(hcurl.free_index(r.global));
            sign.push_back(r.sign);
          }
    }
    comp_start.push_back(static_cast<int>(free_idx.size()));
    const int nloc = comp_start.back();
    Eigen::MatrixXd Ke = Eigen::MatrixXd::Zero(nloc, nloc), Me = Eigen::MatrixXd::Zero(nloc, nloc);
    Eigen::Matrix3Xd BE(3, nloc), BC(3, nloc);
    GeoPoint g;
    for (int q2 = 0; q2 < t.geo[2].nq; ++q2)
      for (int q1 = 0; q1 < t.geo[1].nq; ++q1)
        for (int q0 = 0; q0 < t.geo[0].nq; ++q0) {
          const std::array<int, 3> q{q0, q1, q2};
          eval_geo_point(geo.patches[p], t, e, q, g);
          const Mat3 JinvT = g.J.inverse().transpose();
          for (int c = 0; c < 3; ++c) {
            std::array<const Eigen::MatrixXd*, 3> D{};
            for (int d = 0; d < 3; ++d) D[d] = &t.comp[c][d].ders[e[d] * t.comp[c][d].nq + q[d]];
            int k = comp_start[c];
            for (int k2 = 0; k2 < D[2]->cols(); ++k2)
              for (int k1 = 0; k1 < D[1]->cols(); ++k1)
                for (int k0 = 0; k0 < D[0]->cols(); ++k0, ++k) {
                  const double N = (*D[0])(0, k0) * (*D[1])(0, k1) * (*D[2])(0, k2);
                  const Vec3 dN((*D[0])(1, k0) * (*D[1])(0, k1) * (*D[2])(0, k2),
                                (*D[0])(0, k0) * (*D[1])(1, k1) * (*D[2])(0, k2),
                                (*D[0])(0, k0) * (*D[1])(0, k1) * (*D[2])(1, k2));
                  BE.col(k) = N * JinvT.col(c);
                  BC.col(k) = g.J * dN.cross(Vec3::Unit(c)) / g.det;
                }
          }
          const double dv = g.weight * g.det;
          Ke.noalias() += (dv / mu) * BC.transpose() * BC;
          Me.noalias() += (dv * eps) * BE.transpose() * BE;
        }
    for (int i = 0; i < nloc; ++i) {
      if (free_idx[i] < 0) continue;
      for (int j = 0; j < nloc; ++j) {
        if (free_idx[j] < 0) continue;
        const double s = sign[i] * sign[j];
        out.push_back({{free_idx[i], free_idx[j], s * Ke(i, j)}, {free_idx[i], free_idx[j], s * Me(i, j)}});
      }
    }
  });
  Triplets tk, tm;
  tk.reserve(entries.size());
  tm.reserve(entries.size());
  for (const auto& [a, b] : entries) {
    tk.push_back(a);
    tm.push_back(b);
  }
  MaxwellMatrices out;
  out.K.resize(hcurl.num_free(), hcurl.num_free());
  out.M.resize(hcurl.num_free(), hcurl.num_free());
  out.K.setFromTriplets(tk.begin(), tk.end());
  out.M.setFromTriplets(tm.begin(), tm.end());
  return out;
}

SparseMatrix assemble_elasticity(const SplineSpace& h1, double eta, double lambda) {
  if (h1.kind() != SpaceKind::H1) throw SpaceError("elasticity needs the isoparametric H1 space");
  const auto& geo = h1.geometry();
  struct Item {
    int patch, element;
  };
  std::vector<PatchTables> tables;
  std::vector<Item> items;
  for (int p = 0; p < geo.num_patches(); ++p) {
    tables.push_back(make_tables(geo.patches[p], {}));
    for (int e = 0; e < tables.back().num_elements(); ++e) items.push_back({p, e});
  }
  const auto trip = chunked<Eigen::Triplet<double>>(static_cast<int>(items.size()), [&](int it, Triplets& out) {
    const auto [p, el] = items[it];
    const auto& t = tables[p];
    const auto e = t.element(el);
    GeoPoint g;
    Eigen::MatrixXd Ke;
    std::vector<int> glob;
    for (int q2 = 0; q2 < t.geo[2].nq; ++q2)
      for (int q1 = 0; q1 < t.geo[1].nq; ++q1)
        for (int q0 = 0; q0 < t.geo[0].nq; ++q0) {
          eval_geo_point(geo.patches[p], t, e, {q0, q1, q2}, g);
          const int m = static_cast<int>(g.R.size());
          if (Ke.size() == 0) {
            Ke = Eigen::MatrixXd::Zero(3 * m, 3 * m);
            for (int a = 0; a < m; ++a) glob.push_back(h1.dof(p, g.local[a]).global);
          }
          const Eigen::Matrix3Xd grad = g.J.inverse().transpose() * g.dR;
          const double dv = g.weight * g.det;
          const Eigen::MatrixXd GG = grad.transpose() * grad;
          for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
              const Vec3 ga = grad.col(a), gb = grad.col(b);
              for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                  Ke(3 * a + i, 3 * b + j) +=
                      dv * ((i == j ? eta * GG(a, b) : 0.0) + eta * ga[j] * gb[i] + lambda * ga[i] * gb[j]);
            }
        }
    for (std::size_t a = 0; a < glob.size(); ++a)
      for (std::size_t b = 0; b < glob.size(); ++b)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            out.emplace_back(3 * glob[a] + i, 3 * glob[b] + j, Ke(3 * a + i, 3 * b + j));
  });
  SparseMatrix K(3 * h1.num_global(), 3 * h1.num_global());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

std::pair<Vec3, double> face_normal(const NurbsPatch& patch, int face, const Vec3& xh) {
  const Mat3 J = patch.eval_with_jacobian(xh).jacobian;
  const double det = J.determinant();
  const Vec3 g = J.inverse().transpose().col(face_direction(face));
  const double gn = g.norm();
  const double side = face_side(face) ? 1.0 : -1.0;
  return {side * (det > 0 ? 1.0 : -1.0) * g / gn, std::abs(det) * gn};
}

Eigen::VectorXd assemble_traction(const SplineSpace& h1, const std::vector<FaceRef>& faces,
                                  const std::function<Vec3(const SurfacePoint&)>& traction) {
  if (h1.kind() != SpaceKind::H1) throw SpaceError("traction load needs the isoparametric H1 space");
  const auto& geo = h1.geometry();
  Eigen::VectorXd F = Eigen::VectorXd::Zero(3 * h1.num_global());
  for (const auto& f : faces) {
    const auto& patch = geo.patches.at(f.patch);
    const auto tg = face_tangents(f.face);
    const auto n = patch.counts();
    std::array<std::vector<double>, 2> br;
    std::array<GaussRule, 2> rule;
    for (int k = 0; k < 2; ++k) {
      br[k] = patch.knots[tg[k]].breaks();
      rule[k] = gauss_legendre(patch.knots[tg[k]].degree() + 1);
    }
    for (std::size_t e1 = 0; e1 + 1 < br[1].size(); ++e1)
      for (std::size_t e0 = 0; e0 + 1 < br[0].size(); ++e0)
        for (std::size_t b = 0; b < rule[1].points.size(); ++b)
          for (std::size_t a = 0; a < rule[0].points.size(); ++a) {
            const double h0 = br[0][e0 + 1] - br[0][e0], h1w = br[1][e1 + 1] - br[1][e1];
            const double s = br[0][e0] + h0 * rule[0].points[a];
            const double t = br[1][e1] + h1w * rule[1].points[b];
            const Vec3 xh = face_point(f.face, s, t);
            const auto [normal, area] = face_normal(patch, f.face, xh);
            SurfacePoint sp{f.patch, f.face, xh, patch.eval(xh), normal};
            const Vec3 tr = traction(sp);
            const double w = rule[0].weights[a] * rule[1].weights[b] * h0 * h1w * area;
            // Rational basis functions at xh.
            std::array<BasisEvaluation, 3> be;
            for (int d = 0; d < 3; ++d) be[d] = eval_basis(patch.knots[d], xh[d], 0);
            double W = 0.0;
            std::vector<std::pair<int, double>> vals;
            for (int k2 = 0; k2 < be[2].ders.cols(); ++k2)
              for (int k1 = 0; k1 < be[1].ders.cols(); ++k1)
                for (int k0 = 0; k0 < be[0].ders.cols(); ++k0) {
                  const int i0 = be[0].span - patch.knots[0].degree() + k0;
                  const int i1 = be[1].span - patch.knots[1].degree() + k1;
                  const int i2 = be[2].span - patch.knots[2].degree() + k2;
                  const int l = i0 + n[0] * (i1 + n[1] * i2);
                  const double v = patch.weights[l] * be[0].ders(0, k0) * be[1].ders(0, k1) * be[2].ders(0, k2);
                  if (v == 0.0) continue;
                  vals.emplace_back(l, v);
                  W += v;
                }
            for (const auto& [l, v] : vals) {
              const int g = h1.dof(f.patch, l).global;
              F.segment<3>(3 * g) += (w * v / W) * tr;
            }
          }
  }
  return F;
}

}  // namespace cavitiga
