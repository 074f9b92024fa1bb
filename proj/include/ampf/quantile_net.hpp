#pragma once

#include "ampf/rng.hpp"

#include <cstddef>
#include <vector>

namespace ampf {

// Two stacked gated recurrent cells, dropout in between, and a linear head of
// width d*|P|. The horizon is produced by iterative decoding: after the input
// window is consumed, each step's median slice is fed back as the metric part
// of the next input, with future calendar covariates alongside.
//
// Parameters live in one flat vector so the optimizer, gradient clipping,
// serialization and finite-difference checks all address the same storage.
struct NetShape {
    std::size_t input_dim = 0;    // metrics + covariates
    std::size_t metric_dim = 0;   // d, predicted columns (first in each input row)
    std::size_t hidden_dim = 0;   // H, both layers
    std::size_t quantile_dim = 0; // |P|
    std::size_t median_index = 0; // position of 0.5 in the quantile set

    std::size_t output_dim() const { return metric_dim * quantile_dim; }
    std::size_t param_count() const;

    bool operator==(const NetShape& o) const = default;
};

class QuantileNet {
public:
    explicit QuantileNet(NetShape shape);

    const NetShape& shape() const { return shape_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    // Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per weight matrix and bias.
    void init_params(Rng& rng);

    // Raw (unsorted) K x d x |P| outputs. enc is L rows x input_dim; dec_cov is
    // K rows x (input_dim - metric_dim) covariates for the horizon rows.
    std::vector<double> forecast(const double* enc, std::size_t input_len,
                                 const double* dec_cov, std::size_t horizon) const;

    // Mean pinball loss over K x d x |P| outputs against targets (K x d,
    // normalized metric rows). dropout_scale is null (inference path) or
    // hidden_dim entries in {0, 1/(1-p)} applied between the layers.
    double loss(const double* enc, std::size_t input_len, const double* dec_cov,
                const double* targets, std::size_t horizon,
                const std::vector<double>& quantiles, const double* dropout_scale) const;

    // Same forward arithmetic as loss(); accumulates dLoss/dparams into grad
    // (grad must be param_count() long; caller zeroes or accumulates).
    double loss_and_grad(const double* enc, std::size_t input_len, const double* dec_cov,
                         const double* targets, std::size_t horizon,
                         const std::vector<double>& quantiles, const double* dropout_scale,
                         std::vector<double>& grad) const;

private:
    struct Forward; // step caches for backpropagation

    void run_forward(Forward& f, const double* enc, std::size_t input_len, const double* dec_cov,
                     std::size_t horizon, const double* dropout_scale) const;

    NetShape shape_;
    std::vector<double> params_;
};

} // namespace ampf
