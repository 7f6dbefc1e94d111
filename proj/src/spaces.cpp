#include "cavitiga/spaces.hpp"

#include <algorithm>

#include "cavitiga/errors.hpp"

namespace cavitiga {

namespace {

// Union-find over local DOFs with a sign relation to the class root.
class SignedUnionFind {
 public:
  explicit SignedUnionFind(int n) : parent_(n), flip_(n, 0) {
    for (int i = 0; i < n; ++i) parent_[i] = i;
  }

  std::pair<int, int> find(int x) {
    int flip = 0;
    int r = x;
    while (parent_[r] != r) {
      flip ^= flip_[r];
      r = parent_[r];
    }
    // Path compression with parity bookkeeping.
    int acc = flip;
    while (parent_[x] != r) {
      const int next = parent_[x];
      const int f = flip_[x];
      parent_[x] = r;
      flip_[x] = acc;
      acc ^= f;
      x = next;
    }
    return {r, flip};
  }

  /// Function a equals `sign` times function b.
  void unite(int a, int b, int sign) {
    const auto [ra, fa] = find(a);
    const auto [rb, fb] = find(b);
    const int s = sign < 0 ? 1 : 0;
    if (ra == rb) {
      if ((fa ^ fb) != s) throw SpaceError("inconsistent orientation while gluing interface DOFs");
      return;
    }
    parent_[ra] = rb;
    flip_[ra] = fa ^ fb ^ s;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> flip_;
};

int flat_index(const std::array<int, 3>& n, const std::array<int, 3>& i) { return i[0] + n[0] * (i[1] + n[1] * i[2]); }

/// Flat index of face-local (i, j) within a component net of size n.
int face_index(const std::array<int, 3>& n, int face, int i, int j) {
  std::array<int, 3> idx{};
  const int d = face_direction(face);
  const auto tg = face_tangents(face);
  idx[d] = face_side(face) ? n[d] - 1 : 0;
  idx[tg[0]] = i;
  idx[tg[1]] = j;
  return flat_index(n, idx);
}

std::array<int, 3> counts_of(const std::array<KnotVector, 3>& kv) { return {kv[0].size(), kv[1].size(), kv[2].size()}; }

}  // namespace

std::array<int, 3> SplineSpace::counts(int patch, int component) const { return counts_of(knots_[patch][component]); }

int SplineSpace::local_index(int patch, int component, int i0, int i1, int i2) const {
  return offsets_[patch][component] + flat_index(counts(patch, component), {i0, i1, i2});
}

Eigen::VectorXd SplineSpace::expand(const Eigen::VectorXd& free) const {
  if (free.size() != num_free()) throw SpaceError("free coefficient vector has the wrong size");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(num_global_);
  for (int f = 0; f < num_free(); ++f) g[free_to_global_[f]] = free[f];
  return g;
}

namespace {

struct GluingInput {
  std::vector<std::vector<std::array<KnotVector, 3>>> knots;
  std::vector<std::vector<int>> offsets;
  std::vector<int> patch_base;
  int total = 0;
};

GluingInput layout(const MultipatchGeometry& g, SpaceKind kind) {
  GluingInput in;
  for (const auto& patch : g.patches) {
    std::vector<std::array<KnotVector, 3>> comps;
    if (kind == SpaceKind::Hcurl) {
      if (std::min({patch.knots[0].degree(), patch.knots[1].degree(), patch.knots[2].degree()}) < 1)
        throw SpaceError("Hcurl space needs degree >= 1 in every direction");
      for (int c = 0; c < 3; ++c) {
        auto kv = patch.knots;
        kv[c] = kv[c].reduced();
        comps.push_back(kv);
      }
    } else {
      comps.push_back(patch.knots);
    }
    std::vector<int> off;
    int size = 0;
    for (const auto& kv : comps) {
      off.push_back(size);
      const auto n = counts_of(kv);
      size += n[0] * n[1] * n[2];
    }
    in.patch_base.push_back(in.total);
    in.total += size;
    in.knots.push_back(std::move(comps));
    in.offsets.push_back(std::move(off));
  }
  return in;
}

void number_dofs(SignedUnionFind& uf, const GluingInput& in, std::vector<std::vector<DofRef>>& dofs, int& num_global) {
  std::vector<int> root_global(static_cast<std::size_t>(in.total), -1);
  num_global = 0;
  dofs.assign(in.knots.size(), {});
  for (std::size_t p = 0; p < in.knots.size(); ++p) {
    const int base = in.patch_base[p];
    const int size = (p + 1 < in.knots.size() ? in.patch_base[p + 1] : in.total) - base;
    dofs[p].resize(static_cast<std::size_t>(size));
    for (int l = 0; l < size; ++l) {
      const auto [root, flip] = uf.find(base + l);
      if (root_global[root] < 0) root_global[root] = num_global++;
      dofs[p][l] = {root_global[root], flip ? -1 : 1};
    }
  }
}

}  // namespace

SplineSpace make_h1_space(const MultipatchGeometry& geometry, bool rational) {
  SplineSpace s;
  s.kind_ = rational ? SpaceKind::H1 : SpaceKind::H1Polynomial;
  s.geometry_ = std::make_shared<const MultipatchGeometry>(geometry);
  auto in = layout(geometry, s.kind_);
  SignedUnionFind uf(in.total);
  for (const auto& itf : geometry.interfaces) {
    const auto na = counts_of(in.knots[itf.patch_a][0]);
    const auto nb = counts_of(in.knots[itf.patch_b][0]);
    const auto ta = face_tangents(itf.face_a);
    const FaceOrientation o{itf.orientation};
    for (int j = 0; j < na[ta[1]]; ++j)
      for (int i = 0; i < na[ta[0]]; ++i) {
        const auto m = o.map_index(i, j, na[ta[0]], na[ta[1]]);
        uf.unite(in.patch_base[itf.patch_a] + face_index(na, itf.face_a, i, j),
                 in.patch_base[itf.patch_b] + face_index(nb, itf.face_b, m[0], m[1]), 1);
      }
  }
  number_dofs(uf, in, s.dofs_, s.num_global_);
  s.knots_ = std::move(in.knots);
  s.offsets_ = std::move(in.offsets);
  s.free_index_.resize(static_cast<std::size_t>(s.num_global_));
  for (int g = 0; g < s.num_global_; ++g) {
    s.free_index_[g] = g;
    s.free_to_global_.push_back(g);
  }
  return s;
}

SplineSpace make_hcurl_space(const MultipatchGeometry& geometry, const std::vector<BoundaryLabel>& pec) {
  SplineSpace s;
  s.kind_ = SpaceKind::Hcurl;
  s.geometry_ = std::make_shared<const MultipatchGeometry>(geometry);
  auto in = layout(geometry, SpaceKind::Hcurl);
  SignedUnionFind uf(in.total);
  for (const auto& itf : geometry.interfaces) {
    const auto ta = face_tangents(itf.face_a);
    const auto tb = face_tangents(itf.face_b);
    const FaceOrientation o{itf.orientation};
    for (int k = 0; k < 2; ++k) {
      const int ca = ta[k];
      const int cb = tb[o.swap() ? 1 - k : k];
      const bool flipped = k == 0 ? o.flip_first() : o.flip_second();
      const auto na = counts_of(in.knots[itf.patch_a][ca]);
      const auto nb = counts_of(in.knots[itf.patch_b][cb]);
      const int base_a = in.patch_base[itf.patch_a] + in.offsets[itf.patch_a][ca];
      const int base_b = in.patch_base[itf.patch_b] + in.offsets[itf.patch_b][cb];
      for (int j = 0; j < na[ta[1]]; ++j)
        for (int i = 0; i < na[ta[0]]; ++i) {
          const auto m = o.map_index(i, j, na[ta[0]], na[ta[1]]);
          uf.unite(base_a + face_index(na, itf.face_a, i, j), base_b + face_index(nb, itf.face_b, m[0], m[1]),
                   flipped ? -1 : 1);
        }
    }
  }
  number_dofs(uf, in, s.dofs_, s.num_global_);
  std::vector<char> fixed(static_cast<std::size_t>(s.num_global_), 0);
  for (const auto& [face, label] : geometry.boundary_tags) {
    if (std::find(pec.begin(), pec.end(), label) == pec.end()) continue;
    for (int c : face_tangents(face.face)) {
      const auto n = counts_of(in.knots[face.patch][c]);
      const auto tg = face_tangents(face.face);
      for (int j = 0; j < n[tg[1]]; ++j)
        for (int i = 0; i < n[tg[0]]; ++i)
          fixed[s.dofs_[face.patch][in.offsets[face.patch][c] + face_index(n, face.face, i, j)].global] = 1;
    }
  }
  s.knots_ = std::move(in.knots);
  s.offsets_ = std::move(in.offsets);
  s.free_index_.assign(static_cast<std::size_t>(s.num_global_), -1);
  for (int g = 0; g < s.num_global_; ++g)
    if (!fixed[g]) {
      s.free_index_[g] = s.num_free();
      s.free_to_global_.push_back(g);
    }
  return s;
}

Eigen::SparseMatrix<double> discrete_gradient(const SplineSpace& h1, const SplineSpace& hcurl) {
  if (h1.kind() == SpaceKind::Hcurl || hcurl.kind() != SpaceKind::Hcurl)
    throw SpaceError("discrete_gradient expects an H1 and an Hcurl space");
  if (h1.num_patches() != hcurl.num_patches()) throw SpaceError("spaces live on different geometries");
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<char> done(static_cast<std::size_t>(hcurl.num_global()), 0);
  for (int p = 0; p < hcurl.num_patches(); ++p) {
    const auto& kv = h1.knots(p, 0);
    const auto nh = h1.counts(p, 0);
    for (int c = 0; c < 3; ++c) {
      const auto n = hcurl.counts(p, c);
      const int deg = kv[c].degree();
      for (int i2 = 0; i2 < n[2]; ++i2)
        for (int i1 = 0; i1 < n[1]; ++i1)
          for (int i0 = 0; i0 < n[0]; ++i0) {
            const DofRef row = hcurl.dof(p, hcurl.local_index(p, c, i0, i1, i2));
            if (done[row.global]) continue;
            done[row.global] = 1;
            std::array<int, 3> idx{i0, i1, i2};
            const int k = idx[c];
            const double alpha = deg / (kv[c][k + deg + 1] - kv[c][k + 1]);
            const int lo = h1.dof(p, flat_index(nh, idx)).global;
            idx[c] = k + 1;
            const int hi = h1.dof(p, flat_index(nh, idx)).global;
            trip.emplace_back(row.global, lo, -row.sign * alpha);
            trip.emplace_back(row.global, hi, row.sign * alpha);
          }
    }
  }
  Eigen::SparseMatrix<double> G(hcurl.num_global(), h1.num_global());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

namespace {

struct UnivariateAt {
  std::array<int, 3> first{};
  std::array<Eigen::MatrixXd, 3> ders;
};

UnivariateAt univariate(const std::array<KnotVector, 3>& kv, const Vec3& xh) {
  UnivariateAt u;
  for (int d = 0; d < 3; ++d) {
    if (xh[d] < -1e-12 || xh[d] > 1.0 + 1e-12) throw EvaluationError("parameter outside [0,1]^3");
    const auto b = eval_basis(kv[d], std::clamp(xh[d], 0.0, 1.0), 1);
    u.first[d] = b.span - kv[d].degree();
    u.ders[d] = b.ders;
  }
  return u;
}

}  // namespace

ScalarValue evaluate_h1(const SplineSpace& space, const Eigen::VectorXd& coefficients, int patch, const Vec3& xh) {
  if (space.kind() == SpaceKind::Hcurl) throw SpaceError("evaluate_h1 on an Hcurl space");
  if (coefficients.size() != space.num_global()) throw SpaceError("coefficient vector has the wrong size");
  const auto& geo = space.geometry().patches.at(patch);
  const auto pp = geo.eval_with_jacobian(xh);
  const auto u = univariate(space.knots(patch, 0), xh);
  const auto n = space.counts(patch, 0);
  const bool rational = space.kind() == SpaceKind::H1;
  double W = 0.0, f = 0.0;
  Vec3 dW = Vec3::Zero(), df = Vec3::Zero();
  for (int c = 0; c < u.ders[2].cols(); ++c)
    for (int b = 0; b < u.ders[1].cols(); ++b)
      for (int a = 0; a < u.ders[0].cols(); ++a) {
        const std::array<int, 3> idx{u.first[0] + a, u.first[1] + b, u.first[2] + c};
        const int l = flat_index(n, idx);
        const double w = rational ? geo.weights[l] : 1.0;
        const double N = u.ders[0](0, a) * u.ders[1](0, b) * u.ders[2](0, c);
        const Vec3 dN(u.ders[0](1, a) * u.ders[1](0, b) * u.ders[2](0, c),
                      u.ders[0](0, a) * u.ders[1](1, b) * u.ders[2](0, c),
                      u.ders[0](0, a) * u.ders[1](0, b) * u.ders[2](1, c));
        const DofRef d = space.dof(patch, l);
        const double coef = d.sign * coefficients[d.global];
        W += w * N;
        dW += w * dN;
        f += coef * w * N;
        df += coef * w * dN;
      }
  ScalarValue out;
  out.x = pp.x;
  out.value = f / W;
  const Vec3 grad_ref = (df * W - f * dW) / (W * W);
  out.gradient = pp.jacobian.transpose().partialPivLu().solve(grad_ref);
  return out;
}

VectorValue evaluate_hcurl(const SplineSpace& space, const Eigen::VectorXd& coefficients, int patch, const Vec3& xh) {
  if (space.kind() != SpaceKind::Hcurl) throw SpaceError("evaluate_hcurl on a scalar space");
  if (coefficients.size() != space.num_global()) throw SpaceError("coefficient vector has the wrong size");
  const auto pp = space.geometry().patches.at(patch).eval_with_jacobian(xh);
  Vec3 w = Vec3::Zero(), curl = Vec3::Zero();
  for (int comp = 0; comp < 3; ++comp) {
    const auto u = univariate(space.knots(patch, comp), xh);
    const auto n = space.counts(patch, comp);
    for (int c = 0; c < u.ders[2].cols(); ++c)
      for (int b = 0; b < u.ders[1].cols(); ++b)
        for (int a = 0; a < u.ders[0].cols(); ++a) {
          const std::array<int, 3> idx{u.first[0] + a, u.first[1] + b, u.first[2] + c};
          const DofRef d = space.dof(patch, space.component_offset(patch, comp) + flat_index(n, idx));
          const double coef = d.sign * coefficients[d.global];
          if (coef == 0.0) continue;
          const Vec3 dN(u.ders[0](1, a) * u.ders[1](0, b) * u.ders[2](0, c),
                        u.ders[0](0, a) * u.ders[1](1, b) * u.ders[2](0, c),
                        u.ders[0](0, a) * u.ders[1](0, b) * u.ders[2](1, c));
          w[comp] += coef * u.ders[0](0, a) * u.ders[1](0, b) * u.ders[2](0, c);
          curl += coef * dN.cross(Vec3::Unit(comp));
        }
  }
  const Mat3& J = pp.jacobian;
  const double det = J.determinant();
  if (!(std::abs(det) > 0.0)) throw EvaluationError("singular Jacobian");
  VectorValue out;
  out.x = pp.x;
  out.value = J.transpose().partialPivLu().solve(w);
  out.curl = J * curl / det;
  return out;
}

}  // namespace cavitiga
