#include "glmm/baselines.hpp"
#include "glmm/em.hpp"
#include "glmm/metrics.hpp"
#include "glmm/sampling.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace glmm;
using glmm::test::path_graph;
using glmm::test::random_matrix;
using glmm::test::random_responsibilities;
using glmm::test::random_weighted_graph;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Laplacian lap(const Graph& g) { return Laplacian::from_weights(g); }

/// Connected random weighted graph (retries the seed stream until connected).
Laplacian random_connected_laplacian(Index n, std::uint64_t seed) {
  for (std::uint64_t s = seed;; s += 7919) {
    Laplacian l = lap(random_weighted_graph(n, 0.6, Seed{s}));
    if (is_connected(l)) return l;
  }
}

ModelState random_state(Index n, Index k, std::uint64_t seed) {
  ModelState s;
  Rng rng(Seed{seed});
  s.alpha = Vector(k);
  for (Index c = 0; c < k; ++c) s.alpha(c) = rng.uniform(0.2, 1.0);
  s.alpha /= s.alpha.sum();
  for (Index c = 0; c < k; ++c) {
    Vector mu(n);
    for (Index i = 0; i < n; ++i) mu(i) = rng.normal();
    s.means.push_back(mu);
    s.laplacians.push_back(random_connected_laplacian(n, seed * 31 + static_cast<std::uint64_t>(c)));
    s.graphs.push_back(s.laplacians.back().graph());
  }
  return s;
}

Dataset two_cluster_data(Index n, Index m, double separation, std::uint64_t seed) {
  MixtureModelSpec spec;
  spec.alpha = {0.5, 0.5};
  Vector mu = Vector::Zero(n);
  mu.head(n / 2).setConstant(separation);
  spec.means = {mu, -mu};
  spec.laplacians = {random_connected_laplacian(n, seed), random_connected_laplacian(n, seed + 1)};
  return sample_mixture(spec, m, Seed{seed + 2});
}

/// Dense density of the smooth model: precision Q = L + eps (I - 11^T / n)
/// on the complement of the constant vector, log pdet(Q) = log det(Q + 11^T / n).
double dense_smooth_log_density(const Vector& y, const Laplacian& l, double eps) {
  const Index n = l.size();
  const Matrix j = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  const Matrix q = l.matrix() + eps * (Matrix::Identity(n, n) - j);
  const double log_pdet = std::log((q + j).determinant());
  return -0.5 * static_cast<double>(n - 1) * kLog2Pi + 0.5 * log_pdet - 0.5 * y.dot(q * y);
}

/// Dense heat-kernel density with covariance exp(-2 tau L) = V diag(exp(-2 tau lambda)) V^T.
double dense_heat_log_density(const Vector& y, const Laplacian& l, double tau) {
  const Index n = l.size();
  Eigen::SelfAdjointEigenSolver<Matrix> es(l.matrix());
  const Matrix cov = es.eigenvectors() * (-2.0 * tau * es.eigenvalues()).array().exp().matrix().asDiagonal() *
                     es.eigenvectors().transpose();
  const Eigen::LLT<Matrix> llt(cov);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * log_det - 0.5 * y.dot(llt.solve(y));
}

double dense_objective(const ModelState& s, const Matrix& x, const KernelSpec& kernel, double eps) {
  double total = 0.0;
  for (Index m = 0; m < x.rows(); ++m) {
    double acc = 0.0;
    for (Index k = 0; k < s.k(); ++k) {
      const Vector y = x.row(m).transpose() - s.means[static_cast<std::size_t>(k)];
      const Laplacian& l = s.laplacians[static_cast<std::size_t>(k)];
      const double logp = kernel.kind() == KernelKind::Heat ? dense_heat_log_density(y, l, kernel.tau())
                                                              : dense_smooth_log_density(y, l, eps);
      acc += s.alpha(k) * std::exp(logp);
    }
    total += std::log(acc);
  }
  return total;
}

FitConfig small_config(Index k) {
  FitConfig c;
  c.k = k;
  c.smooth.beta1 = 1.0;
  c.smooth.beta2 = 0.05;
  c.max_iterations = 30;
  return c;
}

}  // namespace

// ---- initialize ----

TEST(Initialize, SingleClusterHasUnitWeight) {
  Dataset d{random_matrix(10, 4, Seed{1}), std::nullopt, std::nullopt};
  const ModelState s = initialize(d, small_config(1), Seed{3});
  ASSERT_EQ(s.k(), 1);
  EXPECT_DOUBLE_EQ(s.alpha(0), 1.0);
}

TEST(Initialize, UniformWeightsDistinctSignalMeansValidConnectedLaplacians) {
  Dataset d{random_matrix(20, 6, Seed{2}), std::nullopt, std::nullopt};
  const ModelState s = initialize(d, small_config(4), Seed{9});
  for (Index k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(s.alpha(k), 0.25);
    const Laplacian& l = s.laplacians[static_cast<std::size_t>(k)];
    EXPECT_TRUE(validate_laplacian(l.matrix()).passed());
    EXPECT_TRUE(is_connected(l));
    const Graph g = l.graph();
    for (Index j = 1; j < 6; ++j)
      for (Index i = 0; i < j; ++i)
        if (g.weight(i, j) > 0.0) {
          EXPECT_GE(g.weight(i, j), 0.1);
          EXPECT_LE(g.weight(i, j), 2.0);
        }
    bool is_row = false;
    for (Index m = 0; m < d.m(); ++m) is_row = is_row || d.signals.row(m).transpose() == s.means[static_cast<std::size_t>(k)];
    EXPECT_TRUE(is_row);
    for (Index other = 0; other < k; ++other)
      EXPECT_NE(s.means[static_cast<std::size_t>(k)], s.means[static_cast<std::size_t>(other)]);
  }
}

TEST(Initialize, DeterministicGivenSeed) {
  Dataset d{random_matrix(20, 5, Seed{2}), std::nullopt, std::nullopt};
  const ModelState a = initialize(d, small_config(3), Seed{11});
  const ModelState b = initialize(d, small_config(3), Seed{11});
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(a.means[k], b.means[k]);
    EXPECT_EQ(a.laplacians[k].matrix(), b.laplacians[k].matrix());
  }
}

TEST(Initialize, FewerSignalsThanClustersRejected) {
  Dataset d{random_matrix(2, 5, Seed{2}), std::nullopt, std::nullopt};
  EXPECT_THROW(initialize(d, small_config(3), Seed{1}), std::invalid_argument);
}

// ---- e_step ----

TEST(EStep, SingleClusterGivesOnes) {
  const ModelState s = random_state(5, 1, 4);
  const Responsibilities r = e_step(s, random_matrix(12, 5, Seed{1}), KernelSpec::smooth(), std::nullopt);
  EXPECT_TRUE(r.gamma.isOnes(0.0));
}

TEST(EStep, IdenticalClustersSplitEvenly) {
  ModelState s = random_state(5, 1, 4);
  s.alpha = Vector::Constant(2, 0.5);
  s.means.push_back(s.means[0]);
  s.laplacians.push_back(s.laplacians[0]);
  s.graphs.push_back(s.graphs[0]);
  const Responsibilities r = e_step(s, random_matrix(12, 5, Seed{1}), KernelSpec::smooth(), std::nullopt);
  EXPECT_TRUE(r.gamma.isApproxToConstant(0.5, 1e-15));
}

TEST(EStep, PathGraphSmoothDensityMatchesClosedForm) {
  // Path 0-1-2 with unit weights: eigenpairs (1, (1,0,-1)/sqrt2) and (3, (1,-2,1)/sqrt6).
  ModelState s;
  s.alpha = Vector::Ones(1);
  s.means = {Vector::Zero(3)};
  s.laplacians = {lap(path_graph(3))};
  s.graphs = {path_graph(3)};
  const double eps = 1e-3;
  Matrix x(1, 3);
  x << 0.7, -1.3, 2.1;
  const double a = (x(0, 0) - x(0, 2)) / std::sqrt(2.0);
  const double b = (x(0, 0) - 2.0 * x(0, 1) + x(0, 2)) / std::sqrt(6.0);
  const double expected =
      -kLog2Pi + 0.5 * std::log((1.0 + eps) * (3.0 + eps)) - 0.5 * ((1.0 + eps) * a * a + (3.0 + eps) * b * b);
  const double got = log_densities(s, x, KernelSpec::smooth(), eps)(0, 0);
  EXPECT_NEAR(got, expected, 1e-8 * std::abs(expected));
}

TEST(EStep, NonFiniteSignalsRejected) {
  const ModelState s = random_state(4, 2, 1);
  Matrix x = random_matrix(5, 4, Seed{2});
  x(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(e_step(s, x, KernelSpec::smooth(), std::nullopt), std::invalid_argument);
}

TEST(EStep, DimensionMismatchRejected) {
  const ModelState s = random_state(4, 2, 1);
  EXPECT_THROW(e_step(s, random_matrix(5, 3, Seed{2}), KernelSpec::smooth(), std::nullopt), std::invalid_argument);
}

TEST(EStep, RowStochasticOverRandomStates) {
  for (std::uint64_t t = 0; t < 50; ++t) {
    const ModelState s = random_state(6, 3, 100 + t);
    // Far-away signals push log-densities to extreme magnitudes.
    const Matrix x = 20.0 * random_matrix(15, 6, Seed{t});
    for (const KernelSpec& kernel : {KernelSpec::smooth(), KernelSpec::heat(0.4)}) {
      const Responsibilities r = e_step(s, x, kernel, std::nullopt);
      EXPECT_TRUE(r.is_row_stochastic(1e-9));
    }
  }
}

TEST(EStep, GroupPriorReplacesMixingWeights) {
  const ModelState s = random_state(4, 2, 3);
  const Matrix x = random_matrix(6, 4, Seed{5});
  GroupPrior prior;
  prior.group_of = {0, 0, 0, 1, 1, 1};
  prior.prior = Matrix(2, 2);
  prior.prior << 1.0, 0.0, 0.3, 0.7;
  const Responsibilities r = e_step(s, x, KernelSpec::smooth(), std::nullopt, &prior);
  const Matrix logd = log_densities(s, x, KernelSpec::smooth(), std::nullopt);
  for (Index m = 0; m < 3; ++m) EXPECT_DOUBLE_EQ(r.gamma(m, 0), 1.0);
  for (Index m = 3; m < 6; ++m) {
    const double a = std::log(0.3) + logd(m, 0);
    const double b = std::log(0.7) + logd(m, 1);
    EXPECT_NEAR(r.gamma(m, 0), 1.0 / (1.0 + std::exp(b - a)), 1e-12);
  }
}

// ---- m-step ----

TEST(MStepMeans, SingleClusterGivesSampleMean) {
  const Matrix x = random_matrix(9, 4, Seed{3});
  const auto mu = m_step_means(Responsibilities{Matrix::Ones(9, 1)}, x);
  EXPECT_TRUE(mu[0].isApprox(x.colwise().mean().transpose(), 1e-14));
}

TEST(MStepMeans, OneHotGivesClusterMeans) {
  const Matrix x = random_matrix(6, 3, Seed{3});
  const Labels labels{{0, 1, 0, 1, 1, 0}, 2};
  const auto mu = m_step_means(Responsibilities{labels.one_hot()}, x);
  const Vector m0 = (x.row(0) + x.row(2) + x.row(5)).transpose() / 3.0;
  const Vector m1 = (x.row(1) + x.row(3) + x.row(4)).transpose() / 3.0;
  EXPECT_TRUE(mu[0].isApprox(m0, 1e-14));
  EXPECT_TRUE(mu[1].isApprox(m1, 1e-14));
}

TEST(MStepMeans, MatchesDoubleLoop) {
  const Matrix x = random_matrix(25, 7, Seed{8});
  const Matrix g = random_responsibilities(25, 3, Seed{9});
  const auto mu = m_step_means(Responsibilities{g}, x);
  for (Index k = 0; k < 3; ++k) {
    for (Index i = 0; i < 7; ++i) {
      double num = 0.0;
      double den = 0.0;
      for (Index m = 0; m < 25; ++m) {
        num += g(m, k) * x(m, i);
        den += g(m, k);
      }
      EXPECT_NEAR(mu[static_cast<std::size_t>(k)](i), num / den, 1e-12);
    }
  }
}

TEST(MStepMeans, EmptyClusterRejected) {
  Matrix g = Matrix::Zero(4, 2);
  g.col(0).setOnes();
  EXPECT_THROW(m_step_means(Responsibilities{g}, random_matrix(4, 3, Seed{1})), std::domain_error);
}

TEST(MStepWeights, UniformOneHotAndRandom) {
  EXPECT_TRUE(m_step_weights(Responsibilities{Matrix::Constant(10, 4, 0.25)}).isApproxToConstant(0.25, 1e-15));
  const Labels labels{{0, 1, 1, 1, 2, 2}, 3};
  const Vector a = m_step_weights(Responsibilities{labels.one_hot()});
  EXPECT_NEAR(a(0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(a(1), 0.5, 1e-15);
  EXPECT_NEAR(a(2), 1.0 / 3.0, 1e-15);
  const Vector r = m_step_weights(Responsibilities{random_responsibilities(37, 5, Seed{4})});
  EXPECT_NEAR(r.sum(), 1.0, 1e-12);
  EXPECT_TRUE((r.array() >= 0.0).all());
}

TEST(MStepGroupPrior, GroupAveragesOfResponsibilities) {
  const Matrix g = random_responsibilities(6, 2, Seed{2});
  GroupPrior prior;
  prior.group_of = {0, 1, 0, 1, 1, 2};
  prior.prior = Matrix::Constant(3, 2, 0.5);
  const Matrix p = m_step_group_prior(Responsibilities{g}, prior);
  EXPECT_TRUE(p.row(0).isApprox((g.row(0) + g.row(2)) / 2.0, 1e-14));
  EXPECT_TRUE(p.row(1).isApprox((g.row(1) + g.row(3) + g.row(4)) / 3.0, 1e-14));
  EXPECT_TRUE(p.row(2).isApprox(g.row(5), 1e-14));
}

TEST(MStepGraphs, BlockResponsibilitiesMatchIndependentSolves) {
  const Dataset d = two_cluster_data(8, 60, 1.0, 3);
  const Labels& labels = *d.labels;
  const Responsibilities gamma{labels.one_hot()};
  FitConfig c = small_config(2);
  const auto means = m_step_means(gamma, d.signals);
  const auto graphs = m_step_graphs(gamma, d.signals, means, c);
  for (Index k = 0; k < 2; ++k) {
    std::vector<Index> rows;
    for (Index m = 0; m < d.m(); ++m)
      if (labels.cluster[static_cast<std::size_t>(m)] == k) rows.push_back(m);
    Matrix y(static_cast<Index>(rows.size()), d.n());
    for (std::size_t r = 0; r < rows.size(); ++r)
      y.row(static_cast<Index>(r)) = d.signals.row(rows[r]) - means[static_cast<std::size_t>(k)].transpose();
    SmoothSolverParams p = c.smooth;
    p.beta1 *= static_cast<double>(rows.size());
    p.beta2 *= static_cast<double>(rows.size());
    const GraphEstimate own = learn_graph_smooth({y, Vector::Ones(y.rows())}, p);
    EXPECT_TRUE(graphs[static_cast<std::size_t>(k)].graph.weights().isApprox(own.graph.weights(), 1e-10));
  }
}

TEST(MStepGraphs, PermutationEquivariant) {
  const Matrix x = random_matrix(30, 6, Seed{4});
  const Matrix g = random_responsibilities(30, 3, Seed{5});
  const FitConfig c = small_config(3);
  const auto means = m_step_means(Responsibilities{g}, x);
  const auto graphs = m_step_graphs(Responsibilities{g}, x, means, c);
  Matrix gp(30, 3);
  gp << g.col(2), g.col(0), g.col(1);
  const std::vector<Vector> mp{means[2], means[0], means[1]};
  const auto permuted = m_step_graphs(Responsibilities{gp}, x, mp, c);
  EXPECT_EQ(permuted[0].graph.weights(), graphs[2].graph.weights());
  EXPECT_EQ(permuted[1].graph.weights(), graphs[0].graph.weights());
  EXPECT_EQ(permuted[2].graph.weights(), graphs[1].graph.weights());
}

TEST(MStepGraphs, UniformResponsibilitiesGiveIdenticalGraphs) {
  const Matrix x = random_matrix(40, 6, Seed{6});
  const Responsibilities gamma{Matrix::Constant(40, 2, 0.5)};
  const auto means = m_step_means(gamma, x);
  const auto graphs = m_step_graphs(gamma, x, means, small_config(2));
  EXPECT_LE((graphs[0].graph.weights() - graphs[1].graph.weights()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(MStepGraphs, SolverErrorNamesCluster) {
  // Cluster 1 owns a single signal equal to its mean: all distances vanish.
  Matrix x = random_matrix(5, 4, Seed{1});
  Matrix g = Matrix::Zero(5, 2);
  g.col(0).setOnes();
  g(0, 0) = 0.0;
  g(0, 1) = 1.0;
  const auto means = m_step_means(Responsibilities{g}, x);
  try {
    m_step_graphs(Responsibilities{g}, x, means, small_config(2));
    FAIL() << "expected a solver error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("cluster 1"), std::string::npos) << e.what();
  }
}

// ---- surrogate objective ----

TEST(SurrogateObjective, HeatEmptyGraphIsStandardNormal) {
  ModelState s;
  s.alpha = Vector::Ones(1);
  s.means = {Vector::Zero(4)};
  s.laplacians = {lap(Graph::empty(4))};
  s.graphs = {Graph::empty(4)};
  const Matrix x = random_matrix(7, 4, Seed{3});
  const double expected = -0.5 * static_cast<double>(x.size()) * kLog2Pi - 0.5 * x.squaredNorm();
  EXPECT_NEAR(surrogate_objective(s, x, KernelSpec::heat(0.3), std::nullopt), expected, 1e-10);
}

TEST(SurrogateObjective, DuplicatingDataDoublesIt) {
  const ModelState s = random_state(5, 3, 7);
  const Matrix x = random_matrix(11, 5, Seed{8});
  Matrix twice(22, 5);
  twice << x, x;
  for (const KernelSpec& kernel : {KernelSpec::smooth(), KernelSpec::heat(0.5)}) {
    const double one = surrogate_objective(s, x, kernel, std::nullopt);
    EXPECT_NEAR(surrogate_objective(s, twice, kernel, std::nullopt), 2.0 * one, 1e-10 * std::abs(one));
  }
}

TEST(SurrogateObjective, MatchesDenseDensityOracle) {
  const ModelState s = random_state(4, 2, 12);
  const Matrix x = random_matrix(9, 4, Seed{13});
  const double eps = 1e-2;
  const double smooth = surrogate_objective(s, x, KernelSpec::smooth(), eps);
  EXPECT_NEAR(smooth, dense_objective(s, x, KernelSpec::smooth(), eps), 1e-9 * std::abs(smooth));
  const double heat = surrogate_objective(s, x, KernelSpec::heat(0.35), std::nullopt);
  EXPECT_NEAR(heat, dense_objective(s, x, KernelSpec::heat(0.35), 0.0), 1e-9 * std::abs(heat));
}

// Holding the Laplacians fixed, an (e_step, means, weights) round is an EM
// step of a Gaussian mixture with fixed covariances.
TEST(SurrogateObjective, FixedLaplacianEmRoundNeverDecreases) {
  int trials = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Index k = 2 + static_cast<Index>(t % 3);
    const ModelState s = random_state(5, k, 500 + t);
    const Matrix x = 1.5 * random_matrix(30, 5, Seed{900 + t});
    const KernelSpec kernel = t % 2 == 0 ? KernelSpec::smooth() : KernelSpec::heat(0.3);
    const double before = surrogate_objective(s, x, kernel, std::nullopt);
    const Responsibilities gamma = e_step(s, x, kernel, std::nullopt);
    ModelState next = s;
    next.means = m_step_means(gamma, x);
    next.alpha = m_step_weights(gamma);
    const double after = surrogate_objective(next, x, kernel, std::nullopt);
    EXPECT_GE(after, before - 1e-8) << "trial " << t;
    ++trials;
  }
  EXPECT_EQ(trials, 100);
}

// ---- fit ----

TEST(Fit, SeparatedClustersRecovered) {
  const Dataset d = two_cluster_data(8, 120, 2.0, 21);
  FitConfig c = small_config(2);
  c.restarts = 3;
  const FittedModel model = fit(d, c, Seed{4});
  EXPECT_LT(clustering_nmse(model.gamma.gamma, d.labels->one_hot()), 1.0);
}

TEST(Fit, SingleClusterIsSampleMeanAndOneSolve) {
  const Matrix x = random_matrix(40, 6, Seed{31});
  const Dataset d{x, std::nullopt, std::nullopt};
  FitConfig c = small_config(1);
  const FittedModel model = fit(d, c, Seed{1});
  EXPECT_DOUBLE_EQ(model.alpha(0), 1.0);
  EXPECT_TRUE(model.means[0].isApprox(x.colwise().mean().transpose(), 1e-12));
  const auto direct = graphs_for_labels(x, Labels{std::vector<Index>(40, 0), 1}, c.smooth);
  ASSERT_TRUE(direct[0].has_value());
  EXPECT_LE((model.graphs[0].weights() - direct[0]->graph.weights()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Fit, FrozenOneHotPriorReducesToPerGroupLearning) {
  const Dataset d = two_cluster_data(8, 80, 0.5, 41);
  const Labels& labels = *d.labels;
  FitConfig c = small_config(2);
  const FittedModel model = fit(d, c, Seed{2}, GroupPrior::from_labels(labels, 1.0, true));
  EXPECT_TRUE(model.gamma.gamma.isApprox(labels.one_hot(), 0.0));
  const auto direct = graphs_for_labels(d.signals, labels, c.smooth);
  for (std::size_t k = 0; k < 2; ++k) {
    ASSERT_TRUE(direct[k].has_value());
    const double scale = direct[k]->graph.weights().cwiseAbs().maxCoeff();
    EXPECT_LE((model.graphs[k].weights() - direct[k]->graph.weights()).cwiseAbs().maxCoeff(), 1e-5 * scale);
  }
}

TEST(Fit, DeterministicGivenSeed) {
  const Dataset d = two_cluster_data(7, 60, 0.7, 51);
  FitConfig c = small_config(2);
  c.restarts = 2;
  const FittedModel a = fit(d, c, Seed{8});
  const FittedModel b = fit(d, c, Seed{8});
  EXPECT_EQ(a.gamma.gamma, b.gamma.gamma);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a.graphs[k].weights(), b.graphs[k].weights());
}

TEST(Fit, OutputsSatisfyModelInvariants) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = two_cluster_data(6, 50, 0.4, 60 + seed);
    for (const KernelSpec& kernel : {KernelSpec::smooth(), KernelSpec::heat(0.5)}) {
      FitConfig c = small_config(3);
      c.kernel = kernel;
      const FittedModel model = fit(d, c, Seed{seed});
      EXPECT_NEAR(model.alpha.sum(), 1.0, 1e-9);
      EXPECT_TRUE((model.alpha.array() >= 0.0).all());
      EXPECT_TRUE(model.gamma.is_row_stochastic(1e-9));
      for (const auto& l : model.laplacians) EXPECT_TRUE(validate_laplacian(l.matrix(), 1e-8).passed());
    }
  }
}

TEST(Fit, DegenerateClusterIsRescued) {
  // Three clusters asked of single-cluster data: every fit must still finish
  // with three valid components.
  const Matrix x = random_matrix(30, 5, Seed{70});
  FitConfig c = small_config(3);
  c.min_cluster_mass = 5.0;
  const FittedModel model = fit(Dataset{x, std::nullopt, std::nullopt}, c, Seed{1});
  EXPECT_EQ(model.alpha.size(), 3);
  for (const auto& l : model.laplacians) EXPECT_TRUE(validate_laplacian(l.matrix()).passed());
}

TEST(Fit, AllRestartsFailingReportsDiagnostics) {
  // Constant signals: every centred deviation is zero and the solver rejects it.
  const Dataset d{Matrix::Constant(10, 4, 1.5), std::nullopt, std::nullopt};
  FitConfig c = small_config(1);
  c.restarts = 3;
  try {
    fit(d, c, Seed{1});
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    ASSERT_EQ(e.diagnostics().size(), 3u);
    for (const auto& diag : e.diagnostics()) EXPECT_FALSE(diag.ok);
  }
}

TEST(Fit, RestartScoreOverridesObjective) {
  const Dataset d = two_cluster_data(7, 60, 0.3, 81);
  FitConfig c = small_config(2);
  c.restarts = 4;
  const FittedModel by_objective = fit(d, c, Seed{3});
  const FittedModel worst = fit(d, c, Seed{3}, std::nullopt, [](const FittedModel& m) { return -m.final_objective(); });
  for (const auto& diag : by_objective.restarts) EXPECT_LE(diag.final_objective, by_objective.final_objective());
  for (const auto& diag : worst.restarts) EXPECT_GE(diag.final_objective, worst.final_objective());
}

TEST(Fit, InvalidConfigRejected) {
  const Dataset d{random_matrix(10, 4, Seed{1}), std::nullopt, std::nullopt};
  FitConfig c = small_config(2);
  c.epsilon = 0.0;
  EXPECT_THROW(fit(d, c, Seed{1}), std::invalid_argument);
  c = small_config(2);
  c.restarts = 0;
  EXPECT_THROW(fit(d, c, Seed{1}), std::invalid_argument);
  c = small_config(2);
  c.convergence_tol = 0.0;
  EXPECT_THROW(fit(d, c, Seed{1}), std::invalid_argument);
}

// ---- predict ----

TEST(Predict, TrainingSetReproducesFinalResponsibilities) {
  const Dataset d = two_cluster_data(7, 60, 0.6, 91);
  const FittedModel model = fit(d, small_config(2), Seed{5});
  EXPECT_LE((predict(model, d.signals).gamma - model.gamma.gamma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predict, SingleClusterGivesOnes) {
  const FittedModel model = fit(Dataset{random_matrix(20, 4, Seed{3}), std::nullopt, std::nullopt}, small_config(1), Seed{1});
  EXPECT_TRUE(predict(model, random_matrix(5, 4, Seed{4})).gamma.isOnes(0.0));
}

TEST(Predict, SignalAtClusterMeanGoesToThatCluster) {
  const Dataset d = two_cluster_data(8, 120, 2.0, 21);
  FitConfig c = small_config(2);
  c.restarts = 3;
  const FittedModel model = fit(d, c, Seed{4});
  Matrix at_means(2, 8);
  at_means.row(0) = model.means[0].transpose();
  at_means.row(1) = model.means[1].transpose();
  const Labels l = Labels::from_argmax(predict(model, at_means).gamma);
  EXPECT_EQ(l.cluster[0], 0);
  EXPECT_EQ(l.cluster[1], 1);
}

TEST(Predict, DimensionMismatchRejected) {
  const FittedModel model = fit(Dataset{random_matrix(20, 4, Seed{3}), std::nullopt, std::nullopt}, small_config(1), Seed{1});
  EXPECT_THROW(predict(model, random_matrix(5, 5, Seed{4})), std::invalid_argument);
}

// ---- group prior ----

TEST(GroupPrior, FromLabelsSpreadsRemainder) {
  const GroupPrior p = GroupPrior::from_labels(Labels{{0, 2, 1, 2}, 3}, 0.6, false);
  p.validate(4, 3);
  for (std::size_t m = 0; m < 4; ++m) {
    const Index g = p.group_of[m];
    EXPECT_NEAR(p.prior.row(g).sum(), 1.0, 1e-12);
  }
  const Index g1 = p.group_of[1];
  EXPECT_DOUBLE_EQ(p.prior(g1, 2), 0.6);
  EXPECT_DOUBLE_EQ(p.prior(g1, 0), 0.2);
}

TEST(GroupPrior, ValidationRejectsBadRows) {
  GroupPrior p;
  p.group_of = {0, 1};
  p.prior = Matrix(2, 2);
  p.prior << 0.5, 0.5, 0.9, 0.2;
  EXPECT_THROW(p.validate(2, 2), std::invalid_argument);
  p.prior << 0.5, 0.5, 1.2, -0.2;
  EXPECT_THROW(p.validate(2, 2), std::invalid_argument);
  p.prior << 0.5, 0.5, 0.5, 0.5;
  p.group_of = {0, 2};
  EXPECT_THROW(p.validate(2, 2), std::invalid_argument);
}
