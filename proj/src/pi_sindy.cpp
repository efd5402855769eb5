#include "pi_sindy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "errors.hpp"
#include "lasso.hpp"

namespace pisindy {

namespace {

void check_model(const PiModel& model) {
    if (model.thresholds.size() != model.weights.size()) {
        raise(ErrorCode::dimension_mismatch,
              "model has " + std::to_string(model.thresholds.size()) +
                  " thresholds but " + std::to_string(model.weights.size()) +
                  " weights");
    }
    double prev = 0.0;
    for (double r : model.thresholds) {
        if (!std::isfinite(r) || r <= prev) {
            raise(ErrorCode::non_positive_threshold,
                  "model thresholds must be finite, positive and strictly "
                  "increasing");
        }
        prev = r;
    }
    for (double w : model.weights) {
        if (!std::isfinite(w)) {
            raise(ErrorCode::invalid_argument, "model weights must be finite");
        }
    }
    if (!std::isfinite(model.linear) || !std::isfinite(model.constant) ||
        !std::isfinite(model.x_max_train) || !std::isfinite(model.lambda) ||
        !std::isfinite(model.nrmse_train)) {
        raise(ErrorCode::invalid_argument, "model scalars must be finite");
    }
}

void check_persisted(const PiModel& model) {
    check_model(model);
    if (model.x_max_train <= 0.0) {
        raise(ErrorCode::invalid_argument,
              "persisted model needs x_max_train > 0");
    }
}

} // namespace

Library build_library(const std::vector<double>& x,
                      const std::vector<double>& thresholds,
                      bool include_linear, bool include_const) {
    if (x.empty()) {
        raise(ErrorCode::empty_series, "library needs at least one sample");
    }
    const std::size_t m = thresholds.size();
    const std::size_t cols =
        m + (include_linear ? 1 : 0) + (include_const ? 1 : 0);
    if (cols == 0) {
        raise(ErrorCode::invalid_argument, "library has no candidate terms");
    }

    Library lib;
    lib.theta.resize(static_cast<Eigen::Index>(x.size()),
                     static_cast<Eigen::Index>(cols));
    lib.labels.reserve(cols);

    for (std::size_t i = 0; i < m; ++i) {
        const std::vector<double> y = stop_response(x, thresholds[i]);
        for (std::size_t k = 0; k < x.size(); ++k) {
            lib.theta(static_cast<Eigen::Index>(k),
                      static_cast<Eigen::Index>(i)) = y[k];
        }
        lib.labels.push_back("stop:r=" + format_double(thresholds[i]));
    }
    std::size_t col = m;
    if (include_linear) {
        for (std::size_t k = 0; k < x.size(); ++k) {
            lib.theta(static_cast<Eigen::Index>(k),
                      static_cast<Eigen::Index>(col)) = x[k];
        }
        lib.labels.push_back("linear");
        lib.affine_columns.push_back(col);
        ++col;
    }
    if (include_const) {
        lib.theta.col(static_cast<Eigen::Index>(col)).setOnes();
        lib.labels.push_back("const");
        lib.affine_columns.push_back(col);
    }
    return lib;
}

PiModel train(const SignalSeries& data, const TrainOptions& opt,
              TrainReport* report) {
    data.validate();
    if (!data.has_force()) {
        raise(ErrorCode::invalid_argument,
              "training needs a measured force column");
    }
    if (opt.m == 0) {
        raise(ErrorCode::invalid_argument, "library size m must be >= 1");
    }

    const double x_max = data.peak_displacement();
    const std::vector<double> thresholds = threshold_grid(opt.m, x_max);
    const Library lib =
        build_library(data.x, thresholds, opt.include_linear, opt.include_const);

    LassoOptions lopt;
    lopt.lambda = opt.lambda;
    lopt.tol = opt.tol;
    lopt.max_sweeps = opt.max_sweeps;
    lopt.standardize = opt.standardize;
    if (!opt.penalize_affine) lopt.unpenalized = lib.affine_columns;

    Eigen::VectorXd target(static_cast<Eigen::Index>(data.force.size()));
    for (std::size_t k = 0; k < data.force.size(); ++k) {
        target[static_cast<Eigen::Index>(k)] = data.force[k];
    }
    const LassoResult fit = lasso_fit(lib.theta, target, lopt);

    PiModel model;
    model.thresholds = thresholds;
    model.weights.resize(opt.m);
    for (std::size_t i = 0; i < opt.m; ++i) {
        model.weights[i] = fit.coef[static_cast<Eigen::Index>(i)];
    }
    std::size_t col = opt.m;
    if (opt.include_linear) {
        model.linear = fit.coef[static_cast<Eigen::Index>(col++)];
    }
    if (opt.include_const) {
        model.constant = fit.coef[static_cast<Eigen::Index>(col)];
    }
    model.x_max_train = x_max;
    model.lambda = opt.lambda;
    model.nrmse_train = nrmse(data.force, predict(model, data.x));

    if (report) {
        report->sweeps = fit.sweeps;
        report->worst_violation = fit.worst_violation;
        report->objective = fit.objective;
        report->nrmse_train = model.nrmse_train;
        report->active_terms = static_cast<std::size_t>(
            std::count_if(model.weights.begin(), model.weights.end(),
                          [](double w) { return w != 0.0; }));
        if (model.linear != 0.0) ++report->active_terms;
        if (model.constant != 0.0) ++report->active_terms;
        report->lambda = opt.lambda;
    }
    return model;
}

Prediction predict_detailed(const PiModel& model,
                            const std::vector<double>& x) {
    check_model(model);
    if (x.empty()) {
        raise(ErrorCode::empty_series, "prediction needs at least one sample");
    }
    Prediction out;
    out.forces.assign(x.size(), 0.0);
    for (std::size_t i = 0; i < model.thresholds.size(); ++i) {
        if (model.weights[i] == 0.0) continue;
        const std::vector<double> y = stop_response(x, model.thresholds[i]);
        for (std::size_t k = 0; k < x.size(); ++k) {
            out.forces[k] += model.weights[i] * y[k];
        }
    }
    std::size_t beyond = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k])) {
            raise(ErrorCode::invalid_argument,
                  "prediction input must be finite");
        }
        out.forces[k] += model.linear * x[k] + model.constant;
        if (model.x_max_train > 0.0 && std::abs(x[k]) > model.x_max_train) {
            ++beyond;
        }
    }
    out.saturated_fraction =
        static_cast<double>(beyond) / static_cast<double>(x.size());
    return out;
}

std::vector<double> predict(const PiModel& model, const std::vector<double>& x) {
    return predict_detailed(model, x).forces;
}

double nrmse(const std::vector<double>& ref, const std::vector<double>& model) {
    if (ref.empty() || model.empty()) {
        raise(ErrorCode::empty_series, "error metric needs nonempty series");
    }
    if (ref.size() != model.size()) {
        raise(ErrorCode::length_mismatch,
              "reference has " + std::to_string(ref.size()) +
                  " samples but model has " + std::to_string(model.size()));
    }
    double lo = ref[0];
    double hi = ref[0];
    double sq = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        if (!std::isfinite(ref[k]) || !std::isfinite(model[k])) {
            raise(ErrorCode::invalid_argument,
                  "error metric inputs must be finite");
        }
        lo = std::min(lo, ref[k]);
        hi = std::max(hi, ref[k]);
        const double d = ref[k] - model[k];
        sq += d * d;
    }
    const double range = hi - lo;
    if (range == 0.0) {
        raise(ErrorCode::degenerate_reference,
              "reference series has zero range");
    }
    return std::sqrt(sq / static_cast<double>(ref.size())) / range;
}

void save_model(const PiModel& model, const std::string& path,
                const TrainReport* report) {
    check_persisted(model);
    nlohmann::ordered_json j;
    j["format"] = "pi-model";
    j["schema_version"] = 1;
    j["units"] = {{"x", "mm"}, {"force", "kN"}};
    j["m"] = model.thresholds.size();
    j["x_max_train"] = model.x_max_train;
    j["thresholds"] = model.thresholds;
    j["weights"] = model.weights;
    j["linear"] = model.linear;
    j["constant"] = model.constant;
    j["lambda"] = model.lambda;
    j["nrmse_train"] = model.nrmse_train;
    if (report) {
        j["training"] = {{"sweeps", report->sweeps},
                         {"worst_violation", report->worst_violation},
                         {"objective", report->objective},
                         {"active_terms", report->active_terms}};
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorCode::io_error, "cannot open " + path + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        raise(ErrorCode::io_error, "failed writing " + path);
    }
}

PiModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCode::io_error, "cannot open " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::malformed_file,
              path + ": not valid JSON (" + e.what() + ")");
    }

    if (!j.is_object() || j.value("format", "") != "pi-model") {
        raise(ErrorCode::malformed_file, path + ": not a pi-model file");
    }
    if (!j.contains("schema_version") ||
        !j["schema_version"].is_number_integer()) {
        raise(ErrorCode::malformed_file, path + ": missing schema_version");
    }
    if (j["schema_version"].get<int>() != 1) {
        raise(ErrorCode::schema_version_mismatch,
              path + ": schema_version " +
                  std::to_string(j["schema_version"].get<int>()) +
                  " (expected 1)");
    }
    if (j.contains("units")) {
        const auto& u = j["units"];
        if (!u.is_object() || u.value("x", "") != "mm" ||
            u.value("force", "") != "kN") {
            raise(ErrorCode::unknown_units,
                  path + ": expected units x=mm, force=kN");
        }
    }

    PiModel model;
    try {
        model.thresholds = j.at("thresholds").get<std::vector<double>>();
        model.weights = j.at("weights").get<std::vector<double>>();
        model.linear = j.at("linear").get<double>();
        model.constant = j.at("constant").get<double>();
        model.x_max_train = j.at("x_max_train").get<double>();
        model.lambda = j.value("lambda", 0.0);
        model.nrmse_train = j.value("nrmse_train", 0.0);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::malformed_file,
              path + ": bad model fields (" + e.what() + ")");
    }
    try {
        check_persisted(model);
    } catch (const Error& e) {
        raise(ErrorCode::malformed_file, path + ": " + e.what());
    }
    return model;
}

ModelSession::ModelSession(PiModel model)
    : model_(std::move(model)),
      // A placeholder threshold keeps the bank machinery uniform for
      // affine-only models; combine() never reads it.
      bank_(model_.thresholds.empty() ? std::vector<double>{1.0}
                                      : model_.thresholds) {
    check_model(model_);
}

// Accumulation order matches predict_detailed() exactly, so streaming
// and batch evaluation of one model agree bitwise.
double ModelSession::combine(double x) const {
    double r = 0.0;
    if (!model_.thresholds.empty()) {
        const std::vector<double>& y = bank_.values();
        for (std::size_t i = 0; i < model_.weights.size(); ++i) {
            if (model_.weights[i] == 0.0) continue;
            r += model_.weights[i] * y[i];
        }
    }
    r += model_.linear * x + model_.constant;
    return r;
}

double ModelSession::init(double x0) {
    bank_.init(x0);
    return combine(x0);
}

double ModelSession::step(double x) {
    bank_.step(x);
    return combine(x);
}

void ModelSession::snapshot() { bank_.snapshot(); }

void ModelSession::restore() { bank_.restore(); }

} // namespace pisindy
