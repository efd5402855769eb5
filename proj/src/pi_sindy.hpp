#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hysteresis.hpp"
#include "provider.hpp"
#include "series.hpp"

namespace pisindy {

/// Learned restoring-force model: a weighted superposition of stop
/// operators plus an affine part,
///
///   R(x) = sum_i w_i * E_{r_i}[x] + a * x + c
///
/// Displacements are mm, forces kN. Thresholds are strictly increasing
/// and positive; weights has the same length.
struct PiModel {
    std::vector<double> thresholds;
    std::vector<double> weights;
    double linear = 0.0;
    double constant = 0.0;
    /// Peak |x| of the training record; the thresholds span (0, x_max).
    double x_max_train = 0.0;
    /// Regularization weight the model was trained with.
    double lambda = 0.0;
    /// Reconstruction error on the training record.
    double nrmse_train = 0.0;
};

struct TrainOptions {
    /// Number of stop operators in the candidate library.
    std::size_t m = 50;
    double lambda = 1e-3;
    double tol = 1e-8;
    std::size_t max_sweeps = 100000;
    bool include_linear = true;
    bool include_const = true;
    /// Affine columns are exempt from the l1 penalty unless set.
    bool penalize_affine = false;
    /// Column RMS rescaling before the fit (see LassoOptions).
    bool standardize = false;
};

struct TrainReport {
    std::size_t sweeps = 0;
    double worst_violation = 0.0;
    double objective = 0.0;
    double nrmse_train = 0.0;
    /// Library columns with a nonzero coefficient after the fit,
    /// counting the linear and constant terms alongside the operators.
    std::size_t active_terms = 0;
    double lambda = 0.0;
};

/// Candidate library evaluated on one displacement record: one column
/// per stop operator, then the optional linear and constant columns.
struct Library {
    Eigen::MatrixXd theta;
    std::vector<std::string> labels;
    /// Indices of the affine ("linear"/"const") columns.
    std::vector<std::size_t> affine_columns;
};

Library build_library(const std::vector<double>& x,
                      const std::vector<double>& thresholds,
                      bool include_linear = true, bool include_const = true);

/// Fits a PiModel to a measured displacement/force record.
PiModel train(const SignalSeries& data, const TrainOptions& opt,
              TrainReport* report = nullptr);

struct Prediction {
    std::vector<double> forces;
    /// Fraction of input samples with |x| beyond the training peak;
    /// nonzero means the model is extrapolating.
    double saturated_fraction = 0.0;
};

/// Model response over a displacement record, operators re-primed at
/// the first sample.
Prediction predict_detailed(const PiModel& model, const std::vector<double>& x);
std::vector<double> predict(const PiModel& model, const std::vector<double>& x);

/// Root-mean-square error normalised by the reference range:
/// sqrt(mean((ref - model)^2)) / (max(ref) - min(ref)).
double nrmse(const std::vector<double>& ref, const std::vector<double>& model);

void save_model(const PiModel& model, const std::string& path,
                const TrainReport* report = nullptr);
PiModel load_model(const std::string& path);

/// Sample-by-sample evaluator around a persistent operator bank, for
/// callers that feed displacements one at a time. One snapshot slot
/// supports trial steps of an outer iterative solver.
class ModelSession final : public ForceProvider {
public:
    explicit ModelSession(PiModel model);

    double init(double x0) override;
    double step(double x) override;
    void snapshot() override;
    void restore() override;

    const PiModel& model() const { return model_; }

private:
    double combine(double x) const;

    PiModel model_;
    StopBank bank_;
};

} // namespace pisindy
