#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles/delta_oracle.hpp"
#include "oracles/models.hpp"
#include "specaus/asymptotics.hpp"

using namespace specaus;
using oracle::M;
using oracle::U1;
using oracle::U2;
using oracle::V;
using oracle::W;

namespace {

constexpr double kOracleTol = 1e-12;

Path path(std::initializer_list<Vertex> v) { return Path{std::vector<Vertex>(v)}; }

Eigen::Matrix2d op(FreqValue x) { return x.op(); }

// Block matrix of the stacked (Re, Im) pairs of the link functions of v,
// ordered pa(v) then v, from the oracle.
std::vector<oracle::Dual> oracle_links(const oracle::DeltaOracle& o, const ModelFit& fit, Vertex v) {
  std::vector<oracle::Dual> qs;
  for (Vertex u : fit.graph.parents(v)) qs.push_back(o.link(u, v));
  qs.push_back(o.internal(v));
  return qs;
}

void expect_oracle_agreement(const ModelFit& fit, double theta) {
  const FreqValue z = frequency(theta);
  const oracle::DeltaOracle o(fit, theta);
  FreqAcov ac(fit, z);
  const auto& g = fit.graph;
  for (Vertex v = 0; v < g.size(); ++v) {
    EXPECT_LT(oracle::rel_diff(ac.links(v).matrix, o.acov(oracle_links(o, fit, v))), kOracleTol) << "links " << v;
    std::vector<oracle::Dual> polys;
    for (Vertex u : g.parents(v)) polys.push_back(o.phi(u, v));
    if (!polys.empty()) EXPECT_LT(oracle::rel_diff(ac.lag_polys(v).matrix, o.acov(polys)), kOracleTol) << "polys " << v;
  }
  for (Vertex a = 0; a < g.size(); ++a) {
    for (Vertex b = 0; b < g.size(); ++b) {
      const auto ps = enumerate_paths(g, a, b);
      if (ps.empty()) continue;
      for (const auto& p : ps)
        for (const auto& r : ps) {
          EXPECT_LT(oracle::rel_diff(ac.paths(p, r), o.cross(o.path(p, false), o.path(r, false))), kOracleTol);
          EXPECT_LT(oracle::rel_diff(ac.weighted_paths(p, r), o.cross(o.path(p, true), o.path(r, true))), kOracleTol);
        }
      std::vector<oracle::Dual> each;
      for (const auto& p : ps) each.push_back(o.path(p, false));
      EXPECT_LT(oracle::rel_diff(ac.path_set(ps).matrix, o.acov(each)), kOracleTol);
      const auto tot = o.sum_paths(ps, false);
      EXPECT_LT(oracle::rel_diff(ac.total(ps, ps), o.cross(tot, tot)), kOracleTol);
      EXPECT_LT(oracle::rel_diff(ac.contribution(a, b, ps).matrix, o.acov(o.contribution(a, ps))), kOracleTol)
          << to_string(g, ps[0]);
    }
  }
  // paths with different endpoints that share vertices
  const auto into = enumerate_paths(g, 0, static_cast<Vertex>(g.size() - 1));
  for (Vertex s = 0; s < g.size(); ++s)
    for (const auto& p : enumerate_paths(g, s, static_cast<Vertex>(g.size() - 1)))
      for (const auto& r : into)
        EXPECT_LT(oracle::rel_diff(ac.weighted_paths(p, r), o.cross(o.path(p, true), o.path(r, true))), kOracleTol);
}

void expect_psd_symmetric(const Eigen::MatrixXd& m) {
  EXPECT_LT((m - m.transpose()).norm(), 1e-14 * std::max(1.0, m.norm()));
  const double tr = m.trace();
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff(), -1e-10 * std::max(tr, 1e-300));
}

SvarModel perturbed(const SvarModel& m, Vertex driver, Vertex target, int lag, double eps) {
  auto cs = m.coefficients();
  bool found = false;
  for (auto& c : cs)
    if (c.driver == driver && c.target == target && c.lag == lag) {
      c.value += eps;
      found = true;
    }
  if (!found) cs.push_back({driver, target, lag, eps});
  return SvarModel::from_coefficients(m.graph(), m.contemp(), cs, m.noise());
}

}  // namespace

TEST(LinkJacobians, NoSelfDynamics) {
  ProcessGraph g({"u", "v"}, std::vector<std::pair<Vertex, Vertex>>{{0, 1}});
  const auto m = SvarModel::from_coefficients(g, ContempGraph(g), {{0, 1, 1, 0.4}}, Eigen::VectorXd::Ones(2));
  const auto j = link_jacobians(m, 1, frequency(0.9));
  EXPECT_NEAR(j.a_v, 1.0, 1e-15);
  EXPECT_LT((j.A - Eigen::Matrix2d::Identity()).norm(), 1e-15);
}

TEST(LinkJacobians, MatchFiniteDifferences) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> th(0.05, std::numbers::pi - 0.05);
  const double eps = 1e-6;
  for (int rep = 0; rep < 5; ++rep) {
    const auto c = oracle::random_case(rng, 4, 3);
    const auto& g = c.model.graph();
    for (int f = 0; f < 10; ++f) {
      const FreqValue z = frequency(th(rng));
      for (Vertex v = 0; v < g.size(); ++v) {
        const auto j = link_jacobians(c.model, v, z);
        for (int k = 1; k <= 3; ++k) {
          const Eigen::Vector2d zk = power(z, k).vec();
          // df_v / dphi_vv(k)
          const Eigen::Vector2d fd_f = (internal_function(perturbed(c.model, v, v, k, eps), v, z).vec() -
                                        internal_function(perturbed(c.model, v, v, k, -eps), v, z).vec()) /
                                       (2 * eps);
          const Eigen::Vector2d an_f = j.a_v * j.A_v * zk;
          EXPECT_LT((fd_f - an_f).norm(), 1e-5 * std::max(1.0, an_f.norm()));
          for (Vertex u : g.parents(v)) {
            const Eigen::Vector2d fd_u = (link_function(perturbed(c.model, u, v, k, eps), u, v, z).vec() -
                                          link_function(perturbed(c.model, u, v, k, -eps), u, v, z).vec()) /
                                         (2 * eps);
            const Eigen::Vector2d an_u = j.a_v * j.A * zk;
            EXPECT_LT((fd_u - an_u).norm(), 1e-5 * std::max(1.0, an_u.norm()));
            const Eigen::Vector2d fd_s = (link_function(perturbed(c.model, v, v, k, eps), u, v, z).vec() -
                                          link_function(perturbed(c.model, v, v, k, -eps), u, v, z).vec()) /
                                         (2 * eps);
            const Eigen::Vector2d an_s = j.a_v * j.A_u.at(u) * zk;
            EXPECT_LT((fd_s - an_s).norm(), 1e-5 * std::max(1.0, an_s.norm()));
          }
        }
      }
    }
  }
}

TEST(Acov, MatchesDeltaOracleOnExample) {
  const auto fit = population_fit(oracle::example_model(), oracle::example_lags(), 2000);
  for (double th : {0.13, 0.9, 1.7, 2.6}) expect_oracle_agreement(fit, th);
}

TEST(Acov, MatchesDeltaOracleOnRandomModels) {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 5; ++rep) {
    const auto c = oracle::random_case(rng, 5, 3, 0.6);
    const auto fit = population_fit(c.model, c.lags, 1000);
    expect_oracle_agreement(fit, 0.3 + 0.5 * rep);
  }
}

TEST(Acov, ClosedFormForPaths) {
  const auto model = oracle::example_model();
  const auto fit = population_fit(model, oracle::example_lags(), 500);
  const FreqValue z = frequency(0.7);
  FreqAcov ac(fit, z);
  const auto hvm = op(link_function(model, V, M, z));
  const auto hmw = op(link_function(model, M, W, z));
  const Path direct = path({V, W}), mediated = path({V, M, W});
  EXPECT_LT((ac.paths(direct, direct) - ac.link_block(W, V, V)).norm(), 1e-14);
  EXPECT_LT((ac.paths(direct, mediated) - ac.link_block(W, V, M) * hvm.transpose()).norm(), 1e-14);
  const Eigen::Matrix2d pp =
      hvm * ac.link_block(W, M, M) * hvm.transpose() + hmw * ac.link_block(M, V, V) * hmw.transpose();
  EXPECT_LT((ac.paths(mediated, mediated) - pp).norm(), 1e-13);
  const Eigen::Matrix2d four = ac.link_block(W, V, V) + pp + ac.link_block(W, V, M) * hvm.transpose() +
                               hvm * ac.link_block(W, M, V);
  EXPECT_LT((ac.total(enumerate_paths(model.graph(), V, W), enumerate_paths(model.graph(), V, W)) - four).norm(), 1e-13);
  // disjoint paths
  EXPECT_LT(ac.paths(path({U1, V}), path({M, W})).norm(), 1e-15);
}

TEST(Acov, ClosedFormForWeightedPaths) {
  const auto model = oracle::example_model();
  const auto fit = population_fit(model, oracle::example_lags(), 500);
  const FreqValue z = frequency(1.2);
  FreqAcov ac(fit, z);
  const auto f1 = op(internal_function(model, U1, z)), f2 = op(internal_function(model, U2, z));
  const auto h1 = op(link_function(model, U1, V, z)), h2 = op(link_function(model, U2, V, z));
  const Path e_v = path({V}), p1 = path({U1, V}), p2 = path({U2, V});
  EXPECT_LT((ac.weighted_paths(e_v, e_v) - ac.link_block(V, V, V)).norm(), 1e-14);
  // the displayed term plus the estimation error of the source's own internal function
  EXPECT_LT((ac.weighted_paths(p1, p1) -
             (f1 * ac.link_block(V, U1, U1) * f1.transpose() + h1 * ac.link_block(U1, U1, U1) * h1.transpose()))
                .norm(),
            1e-13);
  EXPECT_LT((ac.weighted_paths(p2, p2) -
             (f2 * ac.link_block(V, U2, U2) * f2.transpose() + h2 * ac.link_block(U2, U2, U2) * h2.transpose()))
                .norm(),
            1e-13);
  EXPECT_LT((ac.weighted_paths(p1, p2) - f1 * ac.link_block(V, U1, U2) * f2.transpose()).norm(), 1e-14);
  EXPECT_LT((ac.weighted_paths(p1, e_v) - f1 * ac.link_block(V, U1, V)).norm(), 1e-14);
}

TEST(Acov, ClosedFormForContribution) {
  const auto model = oracle::example_model();
  const auto fit = population_fit(model, oracle::example_lags(), 500);
  const FreqValue z = frequency(0.5);
  FreqAcov ac(fit, z);
  const auto ps = enumerate_paths(model.graph(), V, W);
  const FreqValue h = total_effect(model, ps, z);
  const FreqValue f1 = internal_function(model, U1, z), h1 = link_function(model, U1, V, z);
  const Eigen::Matrix2d want = op(h * f1) * ac.link_block(V, U1, U1) * op(h * f1).transpose() +
                               op(h1 * f1) * ac.total(ps, ps) * op(h1 * f1).transpose() +
                               op(h * h1) * ac.link_block(U1, U1, U1) * op(h * h1).transpose();
  const auto c = ac.contribution(V, W, ps);
  ASSERT_EQ(c.labels.front(), "u1");
  EXPECT_LT((c.block(0, 0) - want).norm(), 1e-13);
  EXPECT_EQ(ac.contribution(V, W, {}).matrix.norm(), 0.0);
}

TEST(Acov, ContributionRejectsPathsBackIntoAncestors) {
  ProcessGraph g({"a", "b"}, std::vector<std::pair<Vertex, Vertex>>{{0, 1}, {1, 0}});
  const auto model = SvarModel::from_coefficients(g, ContempGraph(g), {{0, 1, 1, 0.3}, {1, 0, 1, 0.2}, {0, 0, 1, 0.4}, {1, 1, 1, 0.1}},
                                                  Eigen::VectorXd::Ones(2));
  LagMap l;
  l.order = 2;
  l.sets = {LagSet(oracle::join({oracle::range(0, 1, 2), oracle::range(1, 1, 2)})),
            LagSet(oracle::join({oracle::range(0, 1, 2), oracle::range(1, 1, 2)}))};
  const auto fit = population_fit(model, l, 100);
  FreqAcov ac(fit, frequency(1.0));
  EXPECT_THROW(ac.contribution(0, 1, {path({0, 1})}), ValidationError);
}

TEST(Acov, LinearInNoiseVariance) {
  auto fit = population_fit(oracle::example_model(), oracle::example_lags(), 500);
  const FreqValue z = frequency(0.8);
  const auto before = acov_links(fit, V, z);
  fit.fits[V].precision *= 2.0;
  const auto after = acov_links(fit, V, z);
  EXPECT_LT((after.matrix - 2.0 * before.matrix).norm(), 1e-13 * before.matrix.norm());
}

TEST(Acov, SingleLagPolynomialVariance) {
  ProcessGraph g({"u", "v"}, std::vector<std::pair<Vertex, Vertex>>{{0, 1}});
  const auto model = SvarModel::from_coefficients(g, ContempGraph(g), {{0, 1, 2, 0.5}, {0, 0, 1, 0.5}}, Eigen::VectorXd::Ones(2));
  LagMap l;
  l.order = 2;
  l.sets = {LagSet({{0, 1}}), LagSet({{0, 2}})};
  const auto fit = population_fit(model, l, 100);
  const FreqValue z = frequency(0.6);
  const Eigen::Vector2d zk = power(z, 2).vec();
  const auto b = acov_lag_polys(fit, 1, z);
  EXPECT_LT((b.block(0, 0) - zk * fit.at(1).precision(0, 0) * zk.transpose()).norm(), 1e-14);
  EXPECT_GT(b.block(0, 0).trace(), 0.0);
}

TEST(Acov, BlocksAreSymmetricPsd) {
  const auto model = oracle::example_model();
  const auto fit = population_fit(model, oracle::example_lags(), 500);
  for (double th : {0.2, 1.4, 2.8}) {
    FreqAcov ac(fit, frequency(th));
    for (Vertex v = 0; v < 5; ++v) expect_psd_symmetric(ac.links(v).matrix);
    const auto ps = enumerate_paths(model.graph(), U1, W);
    expect_psd_symmetric(ac.path_set(ps).matrix);
    expect_psd_symmetric(ac.contribution(V, W, enumerate_paths(model.graph(), V, W)).matrix);
    expect_psd_symmetric(ac.lag_polys(W).matrix);
  }
}

TEST(Acov, Al2PolicyRequire) {
  const auto fit = population_fit(oracle::example_model(), oracle::example_true_lags(), 500);
  EXPECT_THROW(acov_links(fit, V, frequency(1.0), Al2Policy::kRequire), ValidationError);
  EXPECT_NO_THROW(acov_links(fit, V, frequency(1.0), Al2Policy::kWarn));
}

TEST(Genericity, Examples) {
  const auto model = oracle::example_model();
  const auto coarse = population_fit(model, oracle::example_lags(), 500);
  const auto r = genericity_check(coarse, V, frequency(1.0));
  EXPECT_TRUE(r.z_full_rank);
  EXPECT_TRUE(r.det_a_v_nonzero);
  EXPECT_GT(r.min_singular, 0.1);
  const auto exact = population_fit(model, oracle::example_true_lags(), 500);
  EXPECT_FALSE(genericity_check(exact, V, frequency(1.0)).z_full_rank);
  // z = 1 makes the columns of lags 1 and 2 identical
  EXPECT_FALSE(genericity_check(coarse, V, frequency(0.0)).z_full_rank);
}

TEST(Schur, Examples) {
  Eigen::Matrix2d m;
  m << 2, 1, 1, 2;
  EXPECT_NEAR(schur_complement(m, {0})(0, 0), 1.5, 1e-15);
  Eigen::MatrixXd bd = Eigen::MatrixXd::Zero(4, 4);
  bd.topLeftCorner(2, 2) << 3, 1, 1, 2;
  bd.bottomRightCorner(2, 2) << 5, 2, 2, 4;
  EXPECT_EQ(schur_complement(bd, {0, 1}), bd.bottomRightCorner(2, 2));
}

TEST(Schur, InverseIdentity) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd a(6, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    const Eigen::MatrixXd spd = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(6, 6);
    const Eigen::MatrixXd s = schur_complement(spd, {0, 2, 3});
    const Eigen::MatrixXd inv = spd.inverse();
    const std::vector<Eigen::Index> j{1, 4, 5};
    EXPECT_LT((s.inverse() - inv(j, j)).norm(), 1e-10 * inv.norm());
  }
}
