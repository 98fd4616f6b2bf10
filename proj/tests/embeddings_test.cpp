#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "contsid/embeddings.hpp"
#include "contsid/synth.hpp"

namespace contsid {
namespace {

KernelConfig fixed_config(std::vector<double> bandwidths, double lambda = kDefaultLambda) {
    KernelConfig cfg;
    cfg.bandwidths = std::move(bandwidths);
    cfg.regularization = lambda;
    cfg.bandwidth_rule = BandwidthRule::fixed;
    return cfg;
}

GramMatrix self_gram_of(const Eigen::MatrixXd &m) { return {m, true}; }

double median(std::vector<double> v) {
    std::ranges::sort(v);
    return v[v.size() / 2];
}

TEST(FitRegressionWeights, ScalarCase) {
    const auto w = fit_regression_weights(self_gram_of(Eigen::MatrixXd::Ones(1, 1)), 1.0);
    EXPECT_NEAR(w.dense()(0, 0), 0.5, 1e-15);
    EXPECT_EQ(w.jitter(), 0.0);
}

TEST(FitRegressionWeights, IdentityGram) {
    const auto w = fit_regression_weights(self_gram_of(Eigen::MatrixXd::Identity(2, 2)), 0.5);
    EXPECT_TRUE(w.dense().isApprox(0.5 * Eigen::MatrixXd::Identity(2, 2), 1e-15));
}

TEST(FitRegressionWeights, ResidualAndSymmetryOnRandomGram) {
    const LinearScm scm = random_linear_scm(build_dag(1, {}), -1, 1, NoiseSpec::gaussian(0, 1), 3);
    const Dataset data = sample_observational(scm, 20, 3);
    const KernelConfig cfg = make_kernel_config(data);
    const GramMatrix k = column_gram(data, 0, cfg);
    const auto w = fit_regression_weights(k, 1e-2);
    const Eigen::MatrixXd dense = w.dense();
    Eigen::MatrixXd system = k.entries;
    system.diagonal().array() += 20 * 1e-2;
    EXPECT_LT((dense * system - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((dense - dense.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitRegressionWeights, Rejections) {
    EXPECT_THROW(fit_regression_weights(GramMatrix{Eigen::MatrixXd::Ones(2, 2), false}, 0.1), DomainError);
    EXPECT_THROW(fit_regression_weights(self_gram_of(Eigen::MatrixXd::Ones(2, 3)), 0.1), SizeMismatchError);
    EXPECT_THROW(fit_regression_weights(self_gram_of(Eigen::MatrixXd::Ones(2, 2)), 0.0), DomainError);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 2);
    bad(0, 1) = NAN;
    EXPECT_THROW(fit_regression_weights(self_gram_of(bad), 0.1), FactorizationError);
}

TEST(FitRegressionWeights, IndefiniteSystemRaisesFactorizationError) {
    Eigen::MatrixXd k(2, 2);
    k << 1.0, 5.0, 5.0, 1.0;  // eigenvalues 6 and -4
    EXPECT_THROW(fit_regression_weights(self_gram_of(k), 0.1), FactorizationError);
}

TEST(ImeCoefficients, SingleSample) {
    const double lambda = 0.3;
    const Dataset data(Eigen::MatrixXd::Constant(1, 1, 0.7));
    const auto cfg = fixed_config({1.0}, lambda);
    const auto w = fit_conditional_weights(data, 0, {}, cfg);
    const auto a = ime_coefficients(0.7, data, 0, {}, w, cfg);
    ASSERT_EQ(a.alpha.size(), 1);
    EXPECT_NEAR(a.alpha[0], 1.0 / (1.0 + lambda), 1e-15);
}

TEST(ImeCoefficients, ConstantKernelLimit) {
    const IntroExample ex = intro_example();
    const Dataset data = sample_observational(ex.scm, 50, 1);
    const double lambda = 1e-2;
    const auto cfg = fixed_config({1e6, 1e6, 1e6}, lambda);
    for (const NodeSet &adj : {NodeSet{}, NodeSet{1}}) {
        const auto w = fit_conditional_weights(data, 0, adj, cfg);
        const auto a = ime_coefficients(0.3, data, 0, adj, w, cfg);
        EXPECT_NEAR(a.alpha.sum(), 1.0 / (1.0 + lambda), 1e-6);
    }
}

TEST(ImeCoefficients, FiniteAndBounded) {
    const IntroExample ex = intro_example();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset data = sample_observational(ex.scm, 80, seed);
        const auto cfg = make_kernel_config(data);
        const auto w = fit_conditional_weights(data, 2, {0, 1}, cfg);
        const double w_max = w.dense().cwiseAbs().maxCoeff();
        for (double x : {-50.0, -1.0, 0.0, 3.0, 1e3}) {
            const auto a = ime_coefficients(x, data, 2, {0, 1}, w, cfg);
            EXPECT_TRUE(a.alpha.allFinite());
            EXPECT_LE(a.alpha.lpNorm<1>(), 80.0 * w_max);
        }
    }
}

TEST(ImeCoefficients, MatchesDirectDoubleSum) {
    const IntroExample ex = intro_example();
    const Dataset data = sample_observational(ex.scm, 25, 4);
    const auto cfg = make_kernel_config(data);
    const NodeSet adj{1, 2};
    const auto w = fit_conditional_weights(data, 0, adj, cfg);
    const Eigen::MatrixXd dense = w.dense();
    const std::size_t cols[] = {0, 1, 2};
    const double x_hat = 0.4;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(25);
    for (Eigen::Index n = 0; n < 25; ++n) {
        for (Eigen::Index m = 0; m < 25; ++m) {
            const double a[] = {data.values()(n, 0), data.values()(n, 1), data.values()(n, 2)};
            const double b[] = {x_hat, data.values()(m, 1), data.values()(m, 2)};
            v[n] += product_eval(a, b, cfg, cols);
        }
    }
    const Eigen::VectorXd expected = dense * v / 25.0;
    const auto got = ime_coefficients(x_hat, data, 0, adj, w, cfg);
    EXPECT_LT((got.alpha - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ImeCoefficients, SeparateMarginalSamples) {
    const IntroExample ex = intro_example();
    const Dataset data = sample_observational(ex.scm, 30, 5);
    const Dataset outer = sample_observational(ex.scm, 7, 6);
    const auto cfg = make_kernel_config(data);
    const auto w = fit_conditional_weights(data, 0, {1}, cfg);
    const std::size_t zc[] = {1};
    const GramMatrix kz = gram(data.select_columns(zc), outer.select_columns(zc), cfg, zc);
    const std::size_t ic[] = {0};
    Eigen::MatrixXd hat(1, 1);
    hat << -0.2;
    Eigen::VectorXd v = gram(data.select_columns(ic), hat, cfg, ic).entries.col(0);
    v.array() *= kz.entries.rowwise().mean().array();
    const auto got = ime_coefficients(-0.2, data, 0, {1}, w, cfg, &outer);
    EXPECT_LT((got.alpha - w.apply(v)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ImeCoefficients, EmptyAdjustmentEqualsConditionalEmbedding) {
    const IntroExample ex = intro_example();
    const Dataset data = sample_observational(ex.scm, 40, 8);
    const auto cfg = make_kernel_config(data);
    const auto w = fit_conditional_weights(data, 1, {}, cfg);
    const std::size_t c[] = {1};
    Eigen::MatrixXd q(1, 1);
    q << 0.9;
    const Eigen::MatrixXd cond = conditional_coefficient_matrix(data.select_columns(c), q, w, cfg);
    EXPECT_LT((ime_coefficients(0.9, data, 1, {}, w, cfg).alpha - cond.col(0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ImeCoefficients, MismatchedWeightsRejected) {
    const IntroExample ex = intro_example();
    const Dataset data = sample_observational(ex.scm, 10, 1);
    const auto cfg = make_kernel_config(data);
    const auto w = fit_conditional_weights(data, 0, {1}, cfg);
    EXPECT_THROW(ime_coefficients(0.0, data, 0, {}, w, cfg), ColumnMismatchError);
    const Dataset other = sample_observational(ex.scm, 12, 1);
    EXPECT_THROW(ime_coefficients(0.0, other, 0, {1}, w, cfg), ColumnMismatchError);
    EXPECT_THROW(ime_coefficients(NAN, data, 0, {1}, w, cfg), DomainError);
}

TEST(ObservationalCoefficients, Uniform) {
    EXPECT_EQ(observational_coefficients(1).alpha, Eigen::VectorXd::Ones(1));
    EXPECT_EQ(observational_coefficients(4).alpha, Eigen::VectorXd::Constant(4, 0.25));
    EXPECT_THROW(observational_coefficients(0), DomainError);
}

TEST(RkhsDistance, Examples) {
    const EmbeddingCoefficients a{Eigen::VectorXd::Ones(1), std::nullopt};
    const EmbeddingCoefficients b{Eigen::VectorXd::Zero(1), std::nullopt};
    const GramMatrix k{Eigen::MatrixXd::Ones(1, 1), true};
    EXPECT_DOUBLE_EQ(rkhs_distance(a, a, k), 0.0);
    EXPECT_DOUBLE_EQ(rkhs_distance(a, b, k), 1.0);
    EXPECT_THROW(rkhs_distance(a, EmbeddingCoefficients{Eigen::VectorXd::Ones(2), {}}, k), SizeMismatchError);
    EXPECT_THROW(rkhs_distance(EmbeddingCoefficients{Eigen::VectorXd::Ones(1), 0},
                               EmbeddingCoefficients{Eigen::VectorXd::Ones(1), 1}, k),
                 SizeMismatchError);
}

TEST(RkhsDistance, MatchesSpectralOracle) {
    Rng rng(2, RandomStream::kNoiseStream, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 15;
        Eigen::MatrixXd pts(n, 1);
        for (Eigen::Index r = 0; r < n; ++r) { pts(r, 0) = rng.standard_normal(); }
        const std::size_t c[] = {0};
        const GramMatrix k = self_gram(pts, fixed_config({0.8}), c);
        EmbeddingCoefficients a{Eigen::VectorXd(n), {}};
        EmbeddingCoefficients b{Eigen::VectorXd(n), {}};
        for (Eigen::Index r = 0; r < n; ++r) {
            a.alpha[r] = rng.standard_normal();
            b.alpha[r] = rng.standard_normal();
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k.entries);
        const Eigen::VectorXd proj = eig.eigenvectors().transpose() * (a.alpha - b.alpha);
        const double expected = std::sqrt((eig.eigenvalues().cwiseMax(0.0).array() * proj.array().square()).sum());
        EXPECT_NEAR(rkhs_distance(a, b, k), expected, 1e-8);
    }
}

TEST(RkhsDistance, TriangleInequality) {
    Rng rng(4, RandomStream::kNoiseStream, 3);
    const Eigen::Index n = 12;
    Eigen::MatrixXd pts(n, 1);
    for (Eigen::Index r = 0; r < n; ++r) { pts(r, 0) = rng.standard_normal(); }
    const std::size_t c[] = {0};
    const GramMatrix k = self_gram(pts, fixed_config({1.0}), c);
    for (int trial = 0; trial < 100; ++trial) {
        EmbeddingCoefficients e[3];
        for (auto &x : e) {
            x.alpha.resize(n);
            for (Eigen::Index r = 0; r < n; ++r) { x.alpha[r] = rng.standard_normal(); }
        }
        EXPECT_LE(rkhs_distance(e[0], e[2], k), rkhs_distance(e[0], e[1], k) + rkhs_distance(e[1], e[2], k) + 1e-12);
    }
}

TEST(RkhsDistance, CrossSampleOverloadAgreesWithSharedSamples) {
    const IntroExample ex = intro_example();
    const Dataset data = sample_observational(ex.scm, 20, 2);
    const auto cfg = make_kernel_config(data);
    const GramMatrix k = column_gram(data, 2, cfg);
    EmbeddingCoefficients a{Eigen::VectorXd::LinSpaced(20, -1, 1), {}};
    const auto b = observational_coefficients(20);
    EXPECT_NEAR(rkhs_distance(a, k, b, k, k), rkhs_distance(a, b, k), 1e-10);
}

TEST(RkhsDistance, JointRescalingOfColumnAndBandwidth) {
    const IntroExample ex = intro_example();
    const Dataset data = sample_observational(ex.scm, 30, 3);
    const auto cfg = make_kernel_config(data);
    Eigen::MatrixXd scaled = data.values();
    scaled.col(2) *= 1e3;
    auto cfg_scaled = cfg;
    cfg_scaled.bandwidths[2] *= 1e3;
    const GramMatrix k = column_gram(data, 2, cfg);
    const GramMatrix ks = column_gram(Dataset(scaled), 2, cfg_scaled);
    const EmbeddingCoefficients a{Eigen::VectorXd::LinSpaced(30, -0.2, 0.5), {}};
    const auto b = observational_coefficients(30);
    EXPECT_NEAR(rkhs_distance(a, b, ks), rkhs_distance(a, b, k), 1e-12);
}

TEST(EmbeddingNorm, Examples) {
    EXPECT_DOUBLE_EQ(embedding_norm({Eigen::VectorXd::Ones(1), {}}, {Eigen::MatrixXd::Ones(1, 1), true}), 1.0);
    EXPECT_DOUBLE_EQ(embedding_norm(observational_coefficients(2), {Eigen::MatrixXd::Ones(2, 2), true}), 1.0);
    for (Eigen::Index n : {1, 4, 9}) {
        EXPECT_NEAR(embedding_norm(observational_coefficients(static_cast<std::size_t>(n)),
                                   {Eigen::MatrixXd::Identity(n, n), true}),
                    1.0 / std::sqrt(static_cast<double>(n)), 1e-15);
    }
}

// Two independent draws from X = 2 Z + eps: the distance between the two
// fitted conditional embeddings on a fixed z grid shrinks with N.
TEST(ConditionalEmbedding, McmdOfSameLawShrinksWithN) {
    const Dag dag = build_dag(2, {{0, 1}});
    const LinearScm scm(dag, {{{0, 1}, 2.0}}, std::vector<NoiseSpec>(2, NoiseSpec::gaussian(0.0, 1.0)));
    const auto cfg = fixed_config({1.0, 2.0});
    Eigen::MatrixXd grid(9, 1);
    grid.col(0) = Eigen::VectorXd::LinSpaced(9, -1.5, 1.5);
    const std::size_t zc[] = {0};
    const std::size_t xc[] = {1};

    std::vector<double> medians;
    for (std::size_t n : {50, 100, 200}) {
        std::vector<double> per_seed;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Dataset d1 = sample_observational(scm, n, 2 * seed);
            const Dataset d2 = sample_observational(scm, n, 2 * seed + 1);
            const auto w1 = fit_conditional_weights(d1, 0, {}, cfg);
            const auto w2 = fit_conditional_weights(d2, 0, {}, cfg);
            const Eigen::MatrixXd a1 = conditional_coefficient_matrix(d1.select_columns(zc), grid, w1, cfg);
            const Eigen::MatrixXd a2 = conditional_coefficient_matrix(d2.select_columns(zc), grid, w2, cfg);
            const Eigen::MatrixXd x1 = d1.select_columns(xc);
            const Eigen::MatrixXd x2 = d2.select_columns(xc);
            const GramMatrix k11 = self_gram(x1, cfg, xc);
            const GramMatrix k22 = self_gram(x2, cfg, xc);
            const GramMatrix k12 = gram(x1, x2, cfg, xc);
            double total = 0.0;
            for (Eigen::Index q = 0; q < grid.rows(); ++q) {
                total += rkhs_distance({a1.col(q), {}}, k11, {a2.col(q), {}}, k22, k12);
            }
            per_seed.push_back(total / static_cast<double>(grid.rows()));
        }
        medians.push_back(median(per_seed));
    }
    EXPECT_GT(medians[0], medians[1]);
    EXPECT_GT(medians[1], medians[2]);
}

// IME for do(V1 = x) against the mean embedding of interventional samples
// of V3, normalized by the observational embedding norm.
TEST(ImeCoefficients, ConsistentWithInterventionalSamples) {
    const IntroExample ex = intro_example();
    int passing = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset data = sample_observational(ex.scm, 200, 5000 + seed);
        const auto cfg = make_kernel_config(data);
        const auto w = fit_conditional_weights(data, 0, {}, cfg);
        const GramMatrix kj = column_gram(data, 2, cfg);
        const double norm = embedding_norm(observational_coefficients(200), kj);
        const std::size_t c[] = {2};
        double worst = 0.0;
        for (double x : {-1.0, 0.0, 1.0}) {
            const auto a = ime_coefficients(x, data, 0, {}, w, cfg);
            const Dataset oracle = sample_interventional(ex.scm, 0, x, 2000, 9000 + seed);
            const Eigen::MatrixXd ys = oracle.select_columns(c);
            const GramMatrix kbb = self_gram(ys, cfg, c);
            const GramMatrix kab = gram(data.select_columns(c), ys, cfg, c);
            worst = std::max(worst, rkhs_distance(a, kj, observational_coefficients(2000), kbb, kab) / norm);
        }
        passing += worst < 0.15 ? 1 : 0;
    }
    EXPECT_GE(passing, 18);
}

}  // namespace
}  // namespace contsid
