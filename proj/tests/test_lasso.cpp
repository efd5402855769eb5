#include <cmath>
#include <vector>

#include <doctest.h>
#include <Eigen/Dense>

#include "errors.hpp"
#include "lasso.hpp"
#include "rng.hpp"

using namespace pisindy;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    }
    return m;
}

double objective(const Eigen::MatrixXd& theta, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& coef, double lambda,
                 const std::vector<std::size_t>& unpenalized = {}) {
    const double n = static_cast<double>(theta.rows());
    double value = (y - theta * coef).squaredNorm() / (2.0 * n);
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        bool exempt = false;
        for (std::size_t u : unpenalized) {
            exempt |= (static_cast<Eigen::Index>(u) == j);
        }
        if (!exempt) value += lambda * std::abs(coef[j]);
    }
    return value;
}

} // namespace

TEST_CASE("identity library with lambda 0 returns the target") {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd y(3);
    y << 1.0, -2.0, 0.0;
    LassoOptions opt;
    opt.lambda = 0.0;
    const LassoResult fit = lasso_fit(theta, y, opt);
    CHECK(fit.coef[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.coef[1] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(fit.coef[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.worst_violation <= 1e-8);
}

TEST_CASE("single column reduces to the scalar soft threshold") {
    // Column scaled so theta'theta/n = 1; then xi = S(theta'y/n, lambda).
    const Eigen::Index n = 64;
    Eigen::MatrixXd theta = Eigen::MatrixXd::Ones(n, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    y[0] = 19.2; // theta'y/n = 0.3

    for (double lambda : {0.0, 0.1, 0.25, 0.31}) {
        LassoOptions opt;
        opt.lambda = lambda;
        const LassoResult fit = lasso_fit(theta, y, opt);
        const double c = 0.3;
        const double want = c > lambda ? c - lambda : 0.0;
        CHECK(fit.coef[0] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("lambda 0 matches a dense least-squares oracle") {
    Rng rng(314);
    const Eigen::MatrixXd theta = random_matrix(rng, 200, 8);
    Eigen::VectorXd truth(8);
    truth << 1.5, -2.0, 0.0, 3.25, 0.5, 0.0, -1.0, 0.75;
    Eigen::VectorXd y = theta * truth;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.01 * rng.normal();

    LassoOptions opt;
    opt.lambda = 0.0;
    const LassoResult fit = lasso_fit(theta, y, opt);
    const Eigen::VectorXd lsq = theta.colPivHouseholderQr().solve(y);
    CHECK((fit.coef - lsq).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(kkt_violation(theta, y, fit.coef, 0.0) <= 1e-8);
}

TEST_CASE("large lambda drives every penalized coefficient to zero") {
    Rng rng(99);
    const Eigen::MatrixXd theta = random_matrix(rng, 100, 5);
    const Eigen::VectorXd y = random_matrix(rng, 100, 1);

    const double n = static_cast<double>(theta.rows());
    const double lambda_max = (theta.transpose() * y / n).cwiseAbs().maxCoeff();

    LassoOptions opt;
    opt.lambda = lambda_max * 1.001;
    const LassoResult fit = lasso_fit(theta, y, opt);
    CHECK(fit.coef.cwiseAbs().maxCoeff() == 0.0);
    CHECK(kkt_violation(theta, y, fit.coef, opt.lambda) <= 1e-10);
}

TEST_CASE("sparsity grows with lambda") {
    Rng rng(5);
    const Eigen::MatrixXd theta = random_matrix(rng, 150, 12);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
    truth[1] = 2.0;
    truth[7] = -1.0;
    Eigen::VectorXd y = theta * truth;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.05 * rng.normal();

    auto nonzeros = [&](double lambda) {
        LassoOptions opt;
        opt.lambda = lambda;
        const LassoResult fit = lasso_fit(theta, y, opt);
        int count = 0;
        for (Eigen::Index j = 0; j < fit.coef.size(); ++j) {
            if (fit.coef[j] != 0.0) ++count;
        }
        return count;
    };
    const int dense = nonzeros(0.01);
    const int sparse = nonzeros(1.0);
    CHECK(sparse <= dense);
    CHECK(sparse <= 2);
}

TEST_CASE("solution scales linearly with the problem") {
    Rng rng(77);
    const Eigen::MatrixXd theta = random_matrix(rng, 80, 6);
    const Eigen::VectorXd y = random_matrix(rng, 80, 1);

    LassoOptions opt;
    opt.lambda = 0.05;
    const LassoResult base = lasso_fit(theta, y, opt);
    opt.lambda = 0.10;
    const LassoResult doubled = lasso_fit(theta, 2.0 * y, opt);
    CHECK((doubled.coef - 2.0 * base.coef).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("repeated fits are bitwise deterministic") {
    Rng rng(123);
    const Eigen::MatrixXd theta = random_matrix(rng, 90, 7);
    const Eigen::VectorXd y = random_matrix(rng, 90, 1);
    LassoOptions opt;
    opt.lambda = 0.02;
    const LassoResult a = lasso_fit(theta, y, opt);
    const LassoResult b = lasso_fit(theta, y, opt);
    REQUIRE(a.coef.size() == b.coef.size());
    for (Eigen::Index j = 0; j < a.coef.size(); ++j) {
        CHECK(a.coef[j] == b.coef[j]);
    }
    CHECK(a.sweeps == b.sweeps);
}

TEST_CASE("kkt violation flags perturbed optima") {
    Rng rng(31);
    const Eigen::MatrixXd theta = random_matrix(rng, 120, 6);
    const Eigen::VectorXd y = random_matrix(rng, 120, 1);
    LassoOptions opt;
    opt.lambda = 0.03;
    const LassoResult fit = lasso_fit(theta, y, opt);
    CHECK(kkt_violation(theta, y, fit.coef, opt.lambda) <= 1e-8);

    Eigen::VectorXd off = fit.coef;
    off[2] += 0.1;
    CHECK(kkt_violation(theta, y, off, opt.lambda) > 1e-3);
}

TEST_CASE("duplicated column keeps its weight on the first copy") {
    Rng rng(8);
    Eigen::MatrixXd theta = random_matrix(rng, 60, 4);
    theta.col(3) = theta.col(1);
    Eigen::VectorXd y = 3.0 * theta.col(1);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.01 * rng.normal();

    LassoOptions opt;
    opt.lambda = 0.05;
    const LassoResult fit = lasso_fit(theta, y, opt);
    CHECK(fit.coef[1] != 0.0);
    CHECK(fit.coef[3] == 0.0);
}

TEST_CASE("all-zero column keeps a zero coefficient") {
    Rng rng(21);
    Eigen::MatrixXd theta = random_matrix(rng, 40, 3);
    theta.col(2).setZero();
    const Eigen::VectorXd y = random_matrix(rng, 40, 1);
    LassoOptions opt;
    opt.lambda = 0.01;
    const LassoResult fit = lasso_fit(theta, y, opt);
    CHECK(fit.coef[2] == 0.0);
}

TEST_CASE("unpenalized columns survive a crushing lambda") {
    Rng rng(64);
    const Eigen::Index n = 100;
    Eigen::MatrixXd theta(n, 2);
    theta.col(0) = random_matrix(rng, n, 1);
    theta.col(1).setOnes();
    const Eigen::VectorXd y = 3.0 * theta.col(0) + Eigen::VectorXd::Ones(n);

    LassoOptions opt;
    opt.lambda = 1e6;
    opt.unpenalized = {0, 1};
    const LassoResult fit = lasso_fit(theta, y, opt);
    CHECK(fit.coef[0] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(fit.coef[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("objective trace is non-increasing") {
    Rng rng(17);
    Eigen::MatrixXd theta = random_matrix(rng, 150, 20);
    // Correlated tail columns make the descent path long enough to see.
    for (Eigen::Index j = 10; j < 20; ++j) {
        theta.col(j) = theta.col(j - 10) + 0.01 * random_matrix(rng, 150, 1);
    }
    const Eigen::VectorXd y = random_matrix(rng, 150, 1);
    LassoOptions opt;
    opt.lambda = 0.01;
    opt.trace_objective = true;
    const LassoResult fit = lasso_fit(theta, y, opt);
    REQUIRE(fit.objective_trace.size() >= 1);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
        CHECK(fit.objective_trace[k] <=
              fit.objective_trace[k - 1] * (1.0 + 1e-12) + 1e-15);
    }
    CHECK(fit.objective ==
          doctest::Approx(objective(theta, y, fit.coef, opt.lambda))
              .epsilon(1e-9));
}

TEST_CASE("standardized and raw fits agree at lambda 0") {
    Rng rng(55);
    Eigen::MatrixXd theta = random_matrix(rng, 100, 5);
    theta.col(2) *= 40.0; // wildly different column scales
    theta.col(4) *= 0.01;
    const Eigen::VectorXd y = random_matrix(rng, 100, 1);

    LassoOptions opt;
    opt.lambda = 0.0;
    const LassoResult raw = lasso_fit(theta, y, opt);
    opt.standardize = true;
    const LassoResult scaled = lasso_fit(theta, y, opt);
    CHECK((raw.coef - scaled.coef).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("input validation") {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(4, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
    LassoOptions opt;

    opt.lambda = -1.0;
    CHECK_THROWS_AS(lasso_fit(theta, y, opt), Error);
    opt.lambda = 0.1;
    opt.tol = 0.0;
    CHECK_THROWS_AS(lasso_fit(theta, y, opt), Error);
    opt.tol = 1e-8;
    opt.max_sweeps = 0;
    CHECK_THROWS_AS(lasso_fit(theta, y, opt), Error);
    opt.max_sweeps = 100;

    Eigen::VectorXd short_y = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(lasso_fit(theta, short_y, opt), Error);

    opt.unpenalized = {7};
    CHECK_THROWS_AS(lasso_fit(theta, y, opt), Error);
}

TEST_CASE("unreachable tolerance raises non-convergence") {
    Rng rng(13);
    const Eigen::MatrixXd theta = random_matrix(rng, 50, 4);
    const Eigen::VectorXd y = random_matrix(rng, 50, 1);
    LassoOptions opt;
    opt.lambda = 0.01;
    opt.tol = 1e-300; // below attainable floating-point residual accuracy
    opt.max_sweeps = 50;
    try {
        lasso_fit(theta, y, opt);
        FAIL("expected NonConvergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::non_convergence);
    }
}
