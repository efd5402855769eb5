#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "errors.hpp"
#include "hysteresis.hpp"
#include "materials.hpp"
#include "pi_sindy.hpp"
#include "rng.hpp"
#include "series.hpp"

using namespace pisindy;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

SignalSeries series_from(const std::vector<double>& x) {
    SignalSeries s;
    s.x = x;
    s.t.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        s.t[k] = static_cast<double>(k);
    }
    return s;
}

// Hand superposition of the model definition, independent of predict().
std::vector<double> brute_force(const PiModel& model,
                                const std::vector<double>& x) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 0; i < model.thresholds.size(); ++i) {
        const std::vector<double> y = stop_response(x, model.thresholds[i]);
        for (std::size_t k = 0; k < x.size(); ++k) {
            out[k] += model.weights[i] * y[k];
        }
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] += model.linear * x[k] + model.constant;
    }
    return out;
}

std::vector<double> random_walk(Rng& rng, std::size_t n, double span) {
    std::vector<double> x(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
        x[k] = x[k - 1] + rng.uniform(-span, span);
    }
    return x;
}

} // namespace

TEST_CASE("library columns are stop responses plus affine terms") {
    const std::vector<double> x = {0.0, 1.0, 2.0};
    const Library lib = build_library(x, {0.5});
    REQUIRE(lib.theta.rows() == 3);
    REQUIRE(lib.theta.cols() == 3);

    const double want[3][3] = {{0.0, 0.0, 1.0},
                               {0.5, 1.0, 1.0},
                               {0.5, 2.0, 1.0}};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(lib.theta(i, j) == want[i][j]);
        }
    }
    REQUIRE(lib.labels.size() == 3);
    CHECK(lib.labels[0] == "stop:r=0.5");
    CHECK(lib.labels[1] == "linear");
    CHECK(lib.labels[2] == "const");
    CHECK(lib.affine_columns == std::vector<std::size_t>{1, 2});
}

TEST_CASE("library stop columns match the operator module") {
    Rng rng(3);
    const std::vector<double> x = random_walk(rng, 80, 0.7);
    const std::vector<double> thresholds = threshold_grid(5, 2.0);
    const Library lib = build_library(x, thresholds, false, false);
    REQUIRE(lib.theta.cols() == 5);
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
        const std::vector<double> want = stop_response(x, thresholds[j]);
        for (std::size_t k = 0; k < x.size(); ++k) {
            CHECK(lib.theta(static_cast<Eigen::Index>(k),
                            static_cast<Eigen::Index>(j)) == want[k]);
        }
    }
}

TEST_CASE("training recovers a planted two-operator model") {
    // Thresholds 2 and 4 sit exactly on the m=5 grid of x_max=6.
    PiModel truth;
    truth.thresholds = {2.0, 4.0};
    truth.weights = {2.0, 5.0};
    truth.linear = 0.5;
    truth.constant = 1.0;

    LoadingProtocol protocol;
    protocol.amplitudes = {1.5, 3.0, 4.5, 6.0};
    protocol.points_per_branch = 60;
    SignalSeries data = generate_protocol(protocol);
    data.force = brute_force(truth, data.x);

    TrainOptions opt;
    opt.m = 5;
    opt.lambda = 1e-9;
    TrainReport report;
    const PiModel model = train(data, opt, &report);

    REQUIRE(model.thresholds.size() == 5);
    CHECK(model.weights[0] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(model.weights[1] == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(model.weights[2] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(model.weights[3] == doctest::Approx(5.0).epsilon(1e-4));
    CHECK(model.weights[4] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(model.linear == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(model.constant == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(model.nrmse_train <= 1e-6);
    CHECK(model.x_max_train == doctest::Approx(6.0));
    CHECK(report.worst_violation <= 1e-8);
}

TEST_CASE("prediction equals the brute-force superposition") {
    Rng rng(9);
    PiModel model;
    model.thresholds = {0.4, 1.1, 2.7};
    model.weights = {12.0, -3.0, 7.5};
    model.linear = 2.0;
    model.constant = -0.75;
    const std::vector<double> x = random_walk(rng, 300, 0.5);

    const std::vector<double> got = predict(model, x);
    const std::vector<double> want = brute_force(model, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
        CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
    }
}

TEST_CASE("predict on all zeros returns the constant term") {
    PiModel model;
    model.thresholds = {1.0};
    model.weights = {4.0};
    model.linear = 3.0;
    model.constant = -2.5;
    const std::vector<double> x(10, 0.0);
    for (double f : predict(model, x)) CHECK(f == -2.5);
}

TEST_CASE("zero-weight model is a pure linear spring") {
    PiModel model;
    model.thresholds = {1.0, 2.0};
    model.weights = {0.0, 0.0};
    model.linear = 7.0;
    const std::vector<double> x = {0.0, 0.5, -1.2, 3.0};
    const std::vector<double> got = predict(model, x);
    for (std::size_t k = 0; k < x.size(); ++k) {
        CHECK(got[k] == doctest::Approx(7.0 * x[k]).epsilon(1e-15));
    }
}

TEST_CASE("saturation fraction counts samples beyond the trained peak") {
    PiModel model;
    model.thresholds = {1.0};
    model.weights = {1.0};
    model.linear = 1.0;
    model.x_max_train = 2.0;
    const std::vector<double> x = {0.0, 1.0, 2.5, -3.0, 1.5};
    const Prediction pred = predict_detailed(model, x);
    CHECK(pred.saturated_fraction == doctest::Approx(2.0 / 5.0));

    // Monotone ramp past the peak: slope = linear + unsaturated weights.
    const std::vector<double> ramp = {0.0, 3.0, 4.0};
    const std::vector<double> forces = predict(model, ramp);
    CHECK(forces[2] - forces[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stateful session equals batch prediction bitwise") {
    Rng rng(4);
    PiModel model;
    model.thresholds = threshold_grid(8, 3.0);
    model.weights.assign(8, 0.0);
    for (double& w : model.weights) w = rng.uniform(-5.0, 15.0);
    model.linear = 1.2;
    model.constant = 0.3;

    const std::vector<double> x = random_walk(rng, 500, 0.4);
    const std::vector<double> batch = predict(model, x);

    ModelSession session(model);
    CHECK(session.init(x[0]) == batch[0]);
    for (std::size_t k = 1; k < x.size(); ++k) {
        CHECK(session.step(x[k]) == batch[k]);
    }
}

TEST_CASE("session snapshot/restore reproduces committed trajectory") {
    PiModel model;
    model.thresholds = {0.5, 1.5};
    model.weights = {10.0, 5.0};
    model.linear = 1.0;

    ModelSession session(model);
    session.init(0.0);
    session.step(1.0);
    session.snapshot();
    const double trial1 = session.step(1.4);
    const double trial2 = session.step(0.2);
    session.restore();

    // Replaying the same steps after a rollback gives the same forces.
    CHECK(session.step(1.4) == trial1);
    CHECK(session.step(0.2) == trial2);

    // Discarded trial excursions leave no trace on the committed path.
    session.restore();
    const double committed = session.step(-2.0);
    ModelSession replay(model);
    replay.init(0.0);
    replay.step(1.0);
    CHECK(replay.step(-2.0) == committed);
}

TEST_CASE("restore without snapshot is a protocol error") {
    PiModel model;
    model.thresholds = {1.0};
    model.weights = {1.0};
    ModelSession session(model);
    session.init(0.0);
    CHECK_THROWS_AS(session.restore(), Error);
}

TEST_CASE("nrmse hand values") {
    CHECK(nrmse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(nrmse({0.0, 1.0}, {0.0, 0.0}) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    // Scale invariance.
    Rng rng(6);
    std::vector<double> ref(50);
    std::vector<double> model(50);
    for (std::size_t k = 0; k < ref.size(); ++k) {
        ref[k] = rng.uniform(-3.0, 3.0);
        model[k] = ref[k] + rng.uniform(-0.2, 0.2);
    }
    const double base = nrmse(ref, model);
    for (auto* v : {&ref, &model}) {
        for (double& s : *v) s *= 3.5;
    }
    CHECK(nrmse(ref, model) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("nrmse input validation") {
    CHECK_THROWS_AS(nrmse({1.0}, {1.0, 2.0}), Error);
    try {
        nrmse({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0});
        FAIL("constant reference accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate_reference);
    }
}

TEST_CASE("reconstruction identity on the training record") {
    GmpMaterial gmp(180.0, 720.0, 0.02, 20.0, 0.925, 0.15);
    LoadingProtocol protocol;
    protocol.amplitudes = {8.0, 16.0, 24.0};
    protocol.points_per_branch = 50;
    SignalSeries data = run_cyclic_pushover(gmp, generate_protocol(protocol));

    TrainOptions opt;
    opt.m = 20;
    opt.lambda = 0.1;
    const PiModel model = train(data, opt);

    // predict() and the stored-library matrix product agree.
    const Library lib = build_library(data.x, model.thresholds);
    Eigen::VectorXd coef(static_cast<Eigen::Index>(model.weights.size()) + 2);
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        coef[static_cast<Eigen::Index>(i)] = model.weights[i];
    }
    coef[coef.size() - 2] = model.linear;
    coef[coef.size() - 1] = model.constant;
    const Eigen::VectorXd via_library = lib.theta * coef;
    const std::vector<double> via_predict = predict(model, data.x);
    for (std::size_t k = 0; k < via_predict.size(); ++k) {
        CHECK(via_predict[k] ==
              doctest::Approx(via_library[static_cast<Eigen::Index>(k)])
                  .epsilon(1e-12));
    }
    CHECK(model.nrmse_train ==
          doctest::Approx(nrmse(data.force, via_predict)).epsilon(1e-12));
}

TEST_CASE("model file round trip preserves exact values") {
    PiModel model;
    model.thresholds = threshold_grid(50, 48.0);
    model.weights.assign(50, 0.0);
    Rng rng(12);
    for (double& w : model.weights) w = rng.normal() * 11.0;
    model.linear = 3.6;
    model.constant = 1e-13;
    model.x_max_train = 48.0;
    model.lambda = 0.1;
    model.nrmse_train = 0.0123;

    const auto path = temp_file("pisindy_model_roundtrip.json");
    save_model(model, path.string());
    const PiModel back = load_model(path.string());
    CHECK(back.thresholds == model.thresholds);
    CHECK(back.weights == model.weights);
    CHECK(back.linear == model.linear);
    CHECK(back.constant == model.constant);
    CHECK(back.x_max_train == model.x_max_train);
    CHECK(back.lambda == model.lambda);
    CHECK(back.nrmse_train == model.nrmse_train);
    std::filesystem::remove(path);
}

TEST_CASE("model loader rejects malformed and mismatched files") {
    const auto path = temp_file("pisindy_model_bad.json");

    {
        std::ofstream out(path);
        out << "not json at all {";
    }
    CHECK_THROWS_AS(load_model(path.string()), Error);

    {
        std::ofstream out(path);
        out << R"({"format":"pi-model","schema_version":1,"weights":[1.0]})";
    }
    try {
        load_model(path.string());
        FAIL("missing thresholds accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::malformed_file);
    }

    {
        std::ofstream out(path);
        out << R"({"format":"pi-model","schema_version":99,)"
            << R"("thresholds":[1.0],"weights":[1.0],"linear":0,"const":0,)"
            << R"("x_max_train":1,"lambda":0,"nrmse_train":0})";
    }
    try {
        load_model(path.string());
        FAIL("future schema accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::schema_version_mismatch);
    }
    std::filesystem::remove(path);
}

TEST_CASE("training rejects unusable input") {
    TrainOptions opt;
    opt.m = 5;

    SignalSeries no_force = series_from({0.0, 1.0, 2.0});
    CHECK_THROWS_AS(train(no_force, opt), Error);

    SignalSeries flat = series_from({0.0, 0.0, 0.0});
    flat.force = {0.0, 0.0, 0.0};
    try {
        train(flat, opt);
        FAIL("constant displacement accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate_input);
    }

    SignalSeries ok = series_from({0.0, 1.0, -1.0});
    ok.force = {0.0, 10.0, -10.0};
    opt.m = 0;
    CHECK_THROWS_AS(train(ok, opt), Error);
}
