#include <cmath>
#include <vector>

#include <doctest.h>

#include "errors.hpp"
#include "hysteresis.hpp"
#include "materials.hpp"
#include "rng.hpp"

using namespace pisindy;

namespace {

std::vector<double> sweep(ForceProvider& material,
                          const std::vector<double>& x) {
    std::vector<double> out;
    out.reserve(x.size());
    out.push_back(material.init(x[0]));
    for (std::size_t k = 1; k < x.size(); ++k) {
        out.push_back(material.step(x[k]));
    }
    return out;
}

std::vector<double> random_history(Rng& rng, std::size_t n, double span) {
    std::vector<double> x(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
        x[k] = x[k - 1] + rng.uniform(-span / 5.0, span / 5.0);
    }
    return x;
}

// Trapezoidal loop work integral of R dx.
double enclosed_work(const std::vector<double>& x,
                     const std::vector<double>& r) {
    double work = 0.0;
    for (std::size_t k = 1; k < x.size(); ++k) {
        work += 0.5 * (r[k] + r[k - 1]) * (x[k] - x[k - 1]);
    }
    return work;
}

} // namespace

TEST_CASE("bilinear branches match hand values") {
    BilinearMaterial mat(100.0, 10.0, 2.0);
    const std::vector<double> up = {0.0, 0.5, 1.0, 2.0, 3.0, 4.0};
    const std::vector<double> r = sweep(mat, up);
    CHECK(r[2] == doctest::Approx(100.0).epsilon(1e-15));   // elastic
    CHECK(r[3] == doctest::Approx(200.0).epsilon(1e-15));   // at yield
    CHECK(r[5] == doctest::Approx(220.0).epsilon(1e-15));   // post-yield
}

TEST_CASE("bilinear full cycle equals its two-term superposition") {
    BilinearMaterial mat(100.0, 10.0, 2.0);
    std::vector<double> x;
    for (double v = 0.0; v <= 4.0; v += 0.1) x.push_back(v);
    for (double v = 4.0; v >= -4.0; v -= 0.1) x.push_back(v);
    for (double v = -4.0; v <= 4.0; v += 0.1) x.push_back(v);

    const std::vector<double> got = sweep(mat, x);
    const std::vector<double> e2 = stop_response(x, 2.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        CHECK(got[k] ==
              doctest::Approx(10.0 * x[k] + 90.0 * e2[k]).epsilon(1e-12));
    }
}

TEST_CASE("bilinear equals its PI form on random histories") {
    Rng rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        const double k1 = rng.uniform(50.0, 400.0);
        const double k2 = rng.uniform(0.0, 0.2) * k1;
        const double dy = rng.uniform(0.5, 8.0);
        BilinearMaterial mat(k1, k2, dy);
        const std::vector<double> x = random_history(rng, 150, 4.0 * dy);

        const std::vector<double> got = sweep(mat, x);
        const std::vector<double> ref = stop_response(x, dy);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double want = k2 * x[k] + (k1 - k2) * ref[k];
            REQUIRE(std::abs(got[k] - want) <=
                    1e-10 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("smooth material follows its named parameters") {
    GmpMaterial mat(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    CHECK(mat.k0() == 180.0);
    CHECK(mat.fy() == 720.0);
    CHECK(mat.b() == 0.02);

    // Virgin loading: elastic slope at the origin, hardening far out.
    const double small = mat.init(1e-4);
    CHECK(small == doctest::Approx(180.0 * 1e-4).epsilon(1e-6));
    GmpMaterial far(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    far.init(0.0);
    const double deep = far.step(40.0);
    const double asymptote = 0.02 * 180.0 * 40.0 + 0.98 * 720.0;
    CHECK(deep == doctest::Approx(asymptote).epsilon(5e-3));
    CHECK(deep < asymptote); // approaches from below
}

TEST_CASE("material parameter validation") {
    CHECK_THROWS_AS(BilinearMaterial(100.0, 100.0, 2.0), Error); // k2 == k1
    CHECK_THROWS_AS(BilinearMaterial(100.0, -1.0, 2.0), Error);
    CHECK_THROWS_AS(BilinearMaterial(100.0, 10.0, 0.0), Error);
    CHECK_THROWS_AS(GmpMaterial(0.0, 720.0, 0.02, 20.0, 0.925, 0.15), Error);
    CHECK_THROWS_AS(GmpMaterial(180.0, 720.0, 1.0, 20.0, 0.925, 0.15), Error);
    CHECK_THROWS_AS(GmpMaterial(180.0, 720.0, 0.02, -5.0, 0.925, 0.15), Error);
    CHECK_THROWS_AS(GmpMaterial(180.0, 720.0, 0.02, 20.0, 0.925, 0.0), Error);
}

TEST_CASE("step before init is a protocol error") {
    BilinearMaterial bil(100.0, 10.0, 2.0);
    CHECK_THROWS_AS(bil.step(1.0), Error);
    GmpMaterial gmp(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    CHECK_THROWS_AS(gmp.step(1.0), Error);
    CHECK_THROWS_AS(gmp.restore(), Error);
}

TEST_CASE("odd symmetry of both materials") {
    Rng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> x = random_history(rng, 120, 12.0);
        std::vector<double> neg(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) neg[k] = -x[k];

        BilinearMaterial bil_a(180.0, 3.6, 4.0);
        BilinearMaterial bil_b(180.0, 3.6, 4.0);
        const std::vector<double> ra = sweep(bil_a, x);
        const std::vector<double> rb = sweep(bil_b, neg);
        for (std::size_t k = 0; k < x.size(); ++k) {
            REQUIRE(rb[k] == doctest::Approx(-ra[k]).epsilon(1e-12));
        }

        GmpMaterial gmp_a(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
        GmpMaterial gmp_b(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
        const std::vector<double> ga = sweep(gmp_a, x);
        const std::vector<double> gb = sweep(gmp_b, neg);
        for (std::size_t k = 0; k < x.size(); ++k) {
            REQUIRE(gb[k] == doctest::Approx(-ga[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("closed post-yield cycles dissipate energy") {
    LoadingProtocol protocol;
    protocol.amplitudes = {10.0};
    protocol.points_per_branch = 400;
    const SignalSeries cycle = generate_protocol(protocol);

    BilinearMaterial bil(180.0, 3.6, 4.0);
    SignalSeries bil_run = run_cyclic_pushover(bil, cycle);
    CHECK(enclosed_work(bil_run.x, bil_run.force) > 100.0);

    GmpMaterial gmp(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    SignalSeries gmp_run = run_cyclic_pushover(gmp, cycle);
    CHECK(enclosed_work(gmp_run.x, gmp_run.force) > 100.0);
}

TEST_CASE("sub-yield cycling stays inside the yield force") {
    GmpMaterial gmp(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    LoadingProtocol protocol;
    protocol.amplitudes = {1.0, 2.0, 3.0, 3.9};
    protocol.points_per_branch = 100;
    const SignalSeries run = run_cyclic_pushover(gmp, generate_protocol(protocol));
    for (double f : run.force) CHECK(std::abs(f) < 720.0);
}

TEST_CASE("sharp-transition limit approaches the bilinear envelope") {
    // Large R0 leaves only a thin rounded corner at the yield point;
    // cr1 = 0 switches the cyclic softening off so every branch keeps
    // that sharpness.
    GmpMaterial sharp(180.0, 720.0, 0.02, 50.0, 0.0, 0.15);
    BilinearMaterial bil(180.0, 3.6, 4.0);
    LoadingProtocol protocol;
    protocol.amplitudes = {12.0, 24.0, 40.0};
    protocol.points_per_branch = 300;
    const SignalSeries proto = generate_protocol(protocol);
    const SignalSeries got = run_cyclic_pushover(sharp, proto);
    const SignalSeries want = run_cyclic_pushover(bil, proto);

    double sq = 0.0;
    double lo = want.force[0];
    double hi = want.force[0];
    for (std::size_t k = 0; k < got.force.size(); ++k) {
        const double d = got.force[k] - want.force[k];
        sq += d * d;
        lo = std::min(lo, want.force[k]);
        hi = std::max(hi, want.force[k]);
    }
    const double nrmse = std::sqrt(sq / static_cast<double>(got.size())) /
                         (hi - lo);
    CHECK(nrmse <= 0.01);
}

TEST_CASE("elastic limit of the bilinear material") {
    BilinearMaterial elastic(180.0, 3.6, 1e9); // yield far beyond any sweep
    Rng rng(2);
    const std::vector<double> x = random_history(rng, 100, 10.0);
    const std::vector<double> r = sweep(elastic, x);
    for (std::size_t k = 0; k < x.size(); ++k) {
        CHECK(r[k] == doctest::Approx(180.0 * x[k]).epsilon(1e-12));
    }
}

TEST_CASE("snapshot/restore round trip mid-cycle") {
    GmpMaterial gmp(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    gmp.init(0.0);
    for (double v = 0.5; v <= 8.0; v += 0.5) gmp.step(v);
    gmp.snapshot();
    const double resumed_ref = gmp.step(7.0);
    gmp.step(-3.0);
    gmp.step(5.0);
    gmp.restore();
    CHECK(gmp.step(7.0) == resumed_ref);

    BilinearMaterial bil(100.0, 10.0, 2.0);
    bil.init(0.0);
    bil.step(3.0);
    bil.snapshot();
    const double want = bil.step(1.0);
    bil.step(-4.0);
    bil.restore();
    CHECK(bil.step(1.0) == want);
}

TEST_CASE("repeated cycles stabilise") {
    GmpMaterial gmp(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    LoadingProtocol protocol;
    protocol.amplitudes = {24.0, 24.0, 24.0, 24.0, 24.0, 24.0};
    protocol.points_per_branch = 200;
    const SignalSeries run = run_cyclic_pushover(gmp, generate_protocol(protocol));

    // Peak force of the later cycles settles to a fixed value. The +24
    // visits close the odd-numbered branches.
    auto branch_end = [&](std::size_t b) { return run.force[b * 199]; };
    const double cycle5 = branch_end(9);
    const double cycle6 = branch_end(11);
    CHECK(cycle6 == doctest::Approx(cycle5).epsilon(1e-6));
}

TEST_CASE("protocol generation") {
    LoadingProtocol coarse;
    coarse.amplitudes = {1.0};
    coarse.points_per_branch = 2;
    const SignalSeries run = generate_protocol(coarse);
    CHECK(run.x == std::vector<double>{0.0, 1.0, -1.0, 0.0});
    CHECK(run.t == std::vector<double>{0.0, 1.0, 2.0, 3.0});

    LoadingProtocol two;
    two.amplitudes = {1.0, 2.0};
    two.points_per_branch = 2;
    const SignalSeries peaks = generate_protocol(two);
    CHECK(peaks.x == std::vector<double>{0.0, 1.0, -1.0, 2.0, -2.0, 0.0});

    LoadingProtocol dense;
    dense.amplitudes = {1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 24.0, 32.0, 40.0, 48.0};
    dense.points_per_branch = 200;
    const SignalSeries full = generate_protocol(dense);
    double peak = 0.0;
    for (double v : full.x) peak = std::max(peak, std::abs(v));
    CHECK(peak == 48.0);
    CHECK(full.size() == 1 + (2 * dense.amplitudes.size() + 1) * 199);
}

TEST_CASE("protocol validation") {
    LoadingProtocol bad;
    bad.points_per_branch = 100;
    CHECK_THROWS_AS(generate_protocol(bad), Error); // no amplitudes

    bad.amplitudes = {2.0, 1.0}; // decreasing
    CHECK_THROWS_AS(generate_protocol(bad), Error);

    bad.amplitudes = {-1.0};
    CHECK_THROWS_AS(generate_protocol(bad), Error);

    bad.amplitudes = {1.0};
    bad.points_per_branch = 1;
    CHECK_THROWS_AS(generate_protocol(bad), Error);
}

TEST_CASE("pushover pairs displacements with forces") {
    BilinearMaterial bil(100.0, 10.0, 2.0);
    LoadingProtocol protocol;
    protocol.amplitudes = {4.0};
    protocol.points_per_branch = 5;
    const SignalSeries run = run_cyclic_pushover(bil, generate_protocol(protocol));
    REQUIRE(run.has_force());
    REQUIRE(run.force.size() == run.x.size());

    // Hand-computed branch sequence at the sampled points.
    // Up branch: 0, 1, 2, 3, 4 -> 0, 100, 200, 210, 220.
    CHECK(run.force[0] == 0.0);
    CHECK(run.force[1] == doctest::Approx(100.0));
    CHECK(run.force[2] == doctest::Approx(200.0));
    CHECK(run.force[3] == doctest::Approx(210.0));
    CHECK(run.force[4] == doctest::Approx(220.0));
    // First unload sample: elastic drop of k1 * dx from the peak.
    CHECK(run.force[5] == doctest::Approx(220.0 - 100.0 * 2.0));
}