#pragma once

// Binary convolutional restricted Boltzmann machine.
//
// Energy of a joint state (v, h), with M filters W_m of size K x K over an
// N x N visible layer and M hidden maps of side H = N - K + 1:
//
//   E(v, h) = - sum_m sum_ij h_ij^m (W_m (x) v)_ij - b sum_ij v_ij - sum_m c_m sum_ij h_ij^m
//
// where (W (x) v)_ij = sum_rs W(r, s) v(i + r, j + s) is the valid
// cross-correlation (convolution with the flipped filter). The conditionals
// below are the exact conditionals of this energy: hidden units read a valid
// correlation, visible units receive a full convolution with the unflipped
// filter.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rcrbm/image.hpp"
#include "rcrbm/rng.hpp"

namespace rcrbm {

struct CrbmModel {
    std::size_t num_filters = 0;
    std::size_t kernel_size = 0;
    std::size_t input_size = 0;
    std::vector<double> filters;        // num_filters * K * K, filter-major, row-major within a filter
    double visible_bias = 0.0;          // shared by every visible pixel
    std::vector<double> hidden_biases;  // one per feature map

    std::size_t hidden_side() const { return input_size - kernel_size + 1; }
    std::size_t filter_area() const { return kernel_size * kernel_size; }

    std::span<const double> filter(std::size_t m) const { return {filters.data() + m * filter_area(), filter_area()}; }
    double& weight(std::size_t m, std::size_t r, std::size_t s) { return filters[(m * kernel_size + r) * kernel_size + s]; }
    double weight(std::size_t m, std::size_t r, std::size_t s) const {
        return filters[(m * kernel_size + r) * kernel_size + s];
    }

    // Throws Error when geometry is invalid or a parameter is non-finite.
    void validate() const;

    bool operator==(const CrbmModel&) const = default;
};

// Zero-parameter model.
CrbmModel make_crbm(std::size_t num_filters, std::size_t kernel_size, std::size_t input_size);

// Gaussian N(0, sigma^2) filters, zero biases.
CrbmModel init_crbm(std::size_t num_filters, std::size_t kernel_size, std::size_t input_size, double sigma,
                    std::uint64_t seed);

enum class HiddenKind { probabilities, samples };

struct HiddenState {
    std::size_t num_maps = 0;
    std::size_t side = 0;
    std::vector<double> values;  // num_maps * side * side
    HiddenKind kind = HiddenKind::probabilities;

    HiddenState() = default;
    HiddenState(std::size_t maps, std::size_t side_, HiddenKind k)
        : num_maps(maps), side(side_), values(maps * side_ * side_, 0.0), kind(k) {}

    std::size_t map_area() const { return side * side; }
    double& at(std::size_t m, std::size_t i, std::size_t j) { return values[(m * side + i) * side + j]; }
    double at(std::size_t m, std::size_t i, std::size_t j) const { return values[(m * side + i) * side + j]; }
    std::span<const double> map(std::size_t m) const { return {values.data() + m * map_area(), map_area()}; }
};

struct CrbmTrainConfig {
    double learning_rate = 1e-4;
    std::size_t cd_steps = 1;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    std::uint64_t rng_seed = 0;
    double weight_init_sigma = 0.01;
    // Threshold v^0 at 0.5 instead of using real-valued pixels as mean-field inputs.
    bool binary_visible = false;

    void validate() const;
};

struct EpochStats {
    double reconstruction_cross_entropy = 0.0;  // mean over pixels and images, nats
    double mean_abs_weight_delta = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

double sigmoid(double x);

// P(h_ij^m = 1 | v) = sigm((W_m (x) v)_ij + c_m)
HiddenState hidden_probabilities(const CrbmModel& model, const Image2D& v);

// P(v_ij = 1 | h) = sigm(sum_m (W_m * h^m)_ij + b), full convolution.
Image2D visible_probabilities(const CrbmModel& model, const HiddenState& h);

std::vector<double> sample_bernoulli(std::span<const double> probs, Rng& rng);
Image2D sample_bernoulli(const Image2D& probs, Rng& rng);
HiddenState sample_bernoulli(const HiddenState& probs, Rng& rng);

struct GibbsResult {
    Image2D v_k;                   // final visible sample
    HiddenState h0_probs;          // P(h | v^0)
    HiddenState hk_probs;          // P(h | v^k)
    Image2D first_reconstruction;  // P(v | h^1 sample), used for reconstruction error
    std::size_t hidden_draws = 0;
    std::size_t visible_draws = 0;
};

// k full rounds of h-sample / v-sample starting from v0.
GibbsResult gibbs_chain(const CrbmModel& model, const Image2D& v0, std::size_t k, Rng& rng);

// Joint energy; v and h must be binary.
double energy(const CrbmModel& model, const Image2D& v, const HiddenState& h);

// F(v) = -b sum v - sum_m sum_ij log(1 + exp((W_m (x) v)_ij + c_m)); exp(-F(v)) = sum_h exp(-E(v, h)).
double free_energy(const CrbmModel& model, const Image2D& v);

// Gradient (or update) shaped like the model parameters.
struct CrbmGradient {
    std::vector<double> filters;
    double visible_bias = 0.0;
    std::vector<double> hidden_biases;

    static CrbmGradient zeros_like(const CrbmModel& model);
    std::vector<double> flatten() const;
    CrbmGradient& operator+=(const CrbmGradient& other);
    CrbmGradient& operator*=(double s);
};

// Sufficient statistics -dF/dtheta evaluated with the hidden probabilities
// `hp` that belong to `v`: sum_ij hp_m(i,j) v(i+r, j+s), sum v, sum_ij hp_m(i,j).
CrbmGradient phase_statistics(const CrbmModel& model, const Image2D& v, const HiddenState& hp);

// Raw CD-k log-likelihood gradient estimate for a single image:
// statistics(v^0, P(h|v^0)) - statistics(v^k, P(h|v^k)). Same scaling as
// exact_log_likelihood_grad for one data point.
CrbmGradient cd_gradient(const CrbmModel& model, const Image2D& v0, std::size_t k, Rng& rng);

struct BatchDiagnostics {
    double reconstruction_cross_entropy = 0.0;
    double mean_abs_weight_delta = 0.0;
};

struct CdUpdateResult {
    CrbmModel model;
    BatchDiagnostics diagnostics;
};

// One stochastic CD-k update averaged over the batch:
//   dW_m = eta * (corr(v^0, P(h^m|v^0)) - corr(v^k, P(h^m|v^k)))
//   db   = eta * mean(v^0 - v^k)
//   dc_m = eta * mean over positions (P(h^m|v^0) - P(h^m|v^k))
// Image i of the batch draws from the stream derive_seed(seed, "chain", i).
CdUpdateResult cd_update(const CrbmModel& model, std::span<const Image2D> batch, const CrbmTrainConfig& cfg,
                         std::uint64_t seed);

struct TrainResult {
    CrbmModel model;
    TrainHistory history;
};

// epochs x shuffled batches of cd_update. Throws Error when a parameter turns
// non-finite, naming the epoch and batch.
TrainResult train(const CrbmModel& model, std::span<const Image2D> data, const CrbmTrainConfig& cfg);

// Exhaustive-enumeration oracles, limited to tiny visible layers.
inline constexpr std::size_t kMaxEnumeratedVisible = 20;

double log_partition(const CrbmModel& model);
double exact_log_likelihood(const CrbmModel& model, std::span<const Image2D> data);
CrbmGradient exact_log_likelihood_grad(const CrbmModel& model, std::span<const Image2D> data);

// Binary visible configuration number `code` (bit i = pixel i, row-major).
Image2D visible_configuration(std::size_t side, std::uint64_t code);

// Deterministic features: hidden probabilities of an input of the model's size.
HiddenState extract_feature_map(const CrbmModel& model, const Image2D& img);

// out(i,j) = sum_m weights[m] * maps_m(i,j)
Image2D reduce_1x1(const HiddenState& maps, std::span<const double> weights);

enum class ReductionMode { uniform, random_projection };

std::vector<double> reduction_weights(std::size_t num_filters, ReductionMode mode, std::uint64_t seed);

// Structured-text (JSON) persistence with round-trip exact decimals.
std::string crbm_to_json(const CrbmModel& model);
CrbmModel crbm_from_json(const std::string& text);
void save_crbm(const std::filesystem::path& path, const CrbmModel& model);
CrbmModel load_crbm(const std::filesystem::path& path);

}  // namespace rcrbm
