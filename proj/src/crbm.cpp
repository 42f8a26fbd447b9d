#include "rcrbm/crbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "rcrbm/error.hpp"

namespace rcrbm {

namespace {

constexpr int kModelFormatVersion = 1;

void require_binary(std::span<const double> xs, const char* what) {
    for (double x : xs)
        if (x != 0.0 && x != 1.0) throw Error(std::string(what) + " must be binary");
}

void require_visible(const CrbmModel& model, const Image2D& v) {
    if (v.width() != model.input_size || v.height() != model.input_size) {
        throw Error("visible layer is " + std::to_string(v.width()) + "x" + std::to_string(v.height()) +
                    ", model expects " + std::to_string(model.input_size) + "x" + std::to_string(model.input_size));
    }
}

void require_hidden(const CrbmModel& model, const HiddenState& h) {
    if (h.num_maps != model.num_filters || h.side != model.hidden_side() ||
        h.values.size() != h.num_maps * h.map_area()) {
        throw Error("hidden state shape does not match the model");
    }
}

// pre_m(i,j) = c_m + sum_rs W_m(r,s) v(i+r, j+s)
std::vector<double> hidden_preactivations(const CrbmModel& model, const Image2D& v) {
    const std::size_t n = model.input_size, k = model.kernel_size, h = model.hidden_side();
    const double* vp = v.values().data();
    std::vector<double> pre(model.num_filters * h * h);
    for (std::size_t m = 0; m < model.num_filters; ++m) {
        double* out = pre.data() + m * h * h;
        std::fill(out, out + h * h, model.hidden_biases[m]);
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t s = 0; s < k; ++s) {
                const double w = model.weight(m, r, s);
                for (std::size_t i = 0; i < h; ++i) {
                    const double* row = vp + (i + r) * n + s;
                    double* o = out + i * h;
                    for (std::size_t j = 0; j < h; ++j) o[j] += w * row[j];
                }
            }
        }
    }
    return pre;
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double log_sum_exp(std::span<const double> xs) {
    const double mx = *std::max_element(xs.begin(), xs.end());
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

void check_finite(const CrbmModel& model, std::size_t epoch, std::size_t batch) {
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(model.filters.begin(), model.filters.end(), finite) || !std::isfinite(model.visible_bias) ||
        !std::all_of(model.hidden_biases.begin(), model.hidden_biases.end(), finite)) {
        throw Error("non-finite CRBM parameter after epoch " + std::to_string(epoch + 1) + ", batch " +
                    std::to_string(batch + 1) + "; lower the learning rate");
    }
}

void require_enumerable(const CrbmModel& model) {
    const auto nv = model.input_size * model.input_size;
    if (nv > kMaxEnumeratedVisible) {
        throw Error("exact enumeration needs at most " + std::to_string(kMaxEnumeratedVisible) +
                    " visible units, model has " + std::to_string(nv));
    }
}

}  // namespace

void CrbmModel::validate() const {
    if (num_filters == 0) throw Error("CRBM needs at least one filter");
    if (kernel_size == 0) throw Error("CRBM kernel size must be >= 1");
    if (input_size < kernel_size) {
        throw Error("input size " + std::to_string(input_size) + " is smaller than kernel size " +
                    std::to_string(kernel_size));
    }
    if (filters.size() != num_filters * filter_area()) throw Error("CRBM filter array has the wrong length");
    if (hidden_biases.size() != num_filters) throw Error("CRBM hidden bias array has the wrong length");
    check_finite(*this, 0, 0);
}

CrbmModel make_crbm(std::size_t num_filters, std::size_t kernel_size, std::size_t input_size) {
    CrbmModel m;
    m.num_filters = num_filters;
    m.kernel_size = kernel_size;
    m.input_size = input_size;
    m.filters.assign(num_filters * kernel_size * kernel_size, 0.0);
    m.hidden_biases.assign(num_filters, 0.0);
    m.validate();
    return m;
}

CrbmModel init_crbm(std::size_t num_filters, std::size_t kernel_size, std::size_t input_size, double sigma,
                    std::uint64_t seed) {
    if (!(sigma > 0)) throw Error("weight_init_sigma must be > 0");
    auto m = make_crbm(num_filters, kernel_size, input_size);
    Rng rng(derive_seed(seed, "crbm-init"));
    for (auto& w : m.filters) w = sigma * rng.normal();
    return m;
}

void CrbmTrainConfig::validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (cd_steps < 1) throw ConfigError("cd_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(weight_init_sigma > 0)) throw ConfigError("weight_init_sigma must be > 0");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

HiddenState hidden_probabilities(const CrbmModel& model, const Image2D& v) {
    require_visible(model, v);
    const auto h = model.hidden_side();
    HiddenState out(model.num_filters, h, HiddenKind::probabilities);
    out.values = hidden_preactivations(model, v);
    for (auto& x : out.values) x = sigmoid(x);
    return out;
}

Image2D visible_probabilities(const CrbmModel& model, const HiddenState& hs) {
    require_hidden(model, hs);
    const std::size_t n = model.input_size, k = model.kernel_size, h = model.hidden_side();
    Image2D out(n, n, model.visible_bias);
    double* op = out.values().data();
    for (std::size_t m = 0; m < model.num_filters; ++m) {
        const double* hm = hs.values.data() + m * h * h;
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t s = 0; s < k; ++s) {
                const double w = model.weight(m, r, s);
                for (std::size_t i = 0; i < h; ++i) {
                    double* row = op + (i + r) * n + s;
                    const double* hr = hm + i * h;
                    for (std::size_t j = 0; j < h; ++j) row[j] += w * hr[j];
                }
            }
        }
    }
    for (auto& x : out.values()) x = sigmoid(x);
    return out;
}

std::vector<double> sample_bernoulli(std::span<const double> probs, Rng& rng) {
    std::vector<double> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        if (!(p >= 0.0 && p <= 1.0)) throw Error("Bernoulli probability outside [0,1]");
        out[i] = rng.uniform() < p ? 1.0 : 0.0;
    }
    return out;
}

Image2D sample_bernoulli(const Image2D& probs, Rng& rng) {
    return Image2D(probs.width(), probs.height(), sample_bernoulli(probs.values(), rng));
}

HiddenState sample_bernoulli(const HiddenState& probs, Rng& rng) {
    HiddenState out = probs;
    out.values = sample_bernoulli(probs.values, rng);
    out.kind = HiddenKind::samples;
    return out;
}

GibbsResult gibbs_chain(const CrbmModel& model, const Image2D& v0, std::size_t k, Rng& rng) {
    if (k < 1) throw Error("Gibbs chain needs k >= 1");
    GibbsResult res;
    res.h0_probs = hidden_probabilities(model, v0);
    const HiddenState* hp = &res.h0_probs;
    for (std::size_t step = 0; step < k; ++step) {
        const auto hs = sample_bernoulli(*hp, rng);
        ++res.hidden_draws;
        auto vp = visible_probabilities(model, hs);
        res.v_k = sample_bernoulli(vp, rng);
        ++res.visible_draws;
        if (step == 0) res.first_reconstruction = std::move(vp);
        res.hk_probs = hidden_probabilities(model, res.v_k);
        hp = &res.hk_probs;
    }
    return res;
}

double energy(const CrbmModel& model, const Image2D& v, const HiddenState& h) {
    require_visible(model, v);
    require_hidden(model, h);
    require_binary(v.values(), "visible state");
    require_binary(h.values, "hidden state");
    const auto pre = hidden_preactivations(model, v);
    const double vsum = std::accumulate(v.values().begin(), v.values().end(), 0.0);
    double e = -model.visible_bias * vsum;
    const auto area = h.map_area();
    for (std::size_t m = 0; m < model.num_filters; ++m) {
        for (std::size_t p = 0; p < area; ++p) {
            const double hv = h.values[m * area + p];
            // pre includes c_m, which yields exactly the - c_m h term.
            e -= hv * pre[m * area + p];
        }
    }
    return e;
}

double free_energy(const CrbmModel& model, const Image2D& v) {
    require_visible(model, v);
    const auto pre = hidden_preactivations(model, v);
    const double vsum = std::accumulate(v.values().begin(), v.values().end(), 0.0);
    double f = -model.visible_bias * vsum;
    for (double x : pre) f -= softplus(x);
    return f;
}

CrbmGradient CrbmGradient::zeros_like(const CrbmModel& model) {
    CrbmGradient g;
    g.filters.assign(model.filters.size(), 0.0);
    g.hidden_biases.assign(model.hidden_biases.size(), 0.0);
    return g;
}

std::vector<double> CrbmGradient::flatten() const {
    std::vector<double> out(filters);
    out.push_back(visible_bias);
    out.insert(out.end(), hidden_biases.begin(), hidden_biases.end());
    return out;
}

CrbmGradient& CrbmGradient::operator+=(const CrbmGradient& other) {
    for (std::size_t i = 0; i < filters.size(); ++i) filters[i] += other.filters[i];
    visible_bias += other.visible_bias;
    for (std::size_t i = 0; i < hidden_biases.size(); ++i) hidden_biases[i] += other.hidden_biases[i];
    return *this;
}

CrbmGradient& CrbmGradient::operator*=(double s) {
    for (auto& x : filters) x *= s;
    visible_bias *= s;
    for (auto& x : hidden_biases) x *= s;
    return *this;
}

CrbmGradient phase_statistics(const CrbmModel& model, const Image2D& v, const HiddenState& hp) {
    require_visible(model, v);
    require_hidden(model, hp);
    const std::size_t n = model.input_size, k = model.kernel_size, h = model.hidden_side();
    auto g = CrbmGradient::zeros_like(model);
    const double* vp = v.values().data();
    for (std::size_t m = 0; m < model.num_filters; ++m) {
        const double* hm = hp.values.data() + m * h * h;
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t s = 0; s < k; ++s) {
                double acc = 0.0;
                for (std::size_t i = 0; i < h; ++i) {
                    const double* row = vp + (i + r) * n + s;
                    const double* hr = hm + i * h;
                    for (std::size_t j = 0; j < h; ++j) acc += hr[j] * row[j];
                }
                g.filters[(m * k + r) * k + s] = acc;
            }
        }
        g.hidden_biases[m] = std::accumulate(hm, hm + h * h, 0.0);
    }
    g.visible_bias = std::accumulate(v.values().begin(), v.values().end(), 0.0);
    return g;
}

CrbmGradient cd_gradient(const CrbmModel& model, const Image2D& v0, std::size_t k, Rng& rng) {
    const auto chain = gibbs_chain(model, v0, k, rng);
    auto g = phase_statistics(model, v0, chain.h0_probs);
    auto neg = phase_statistics(model, chain.v_k, chain.hk_probs);
    neg *= -1.0;
    g += neg;
    return g;
}

CdUpdateResult cd_update(const CrbmModel& model, std::span<const Image2D> batch, const CrbmTrainConfig& cfg,
                         std::uint64_t seed) {
    if (batch.empty()) throw Error("CD update needs a non-empty batch");
    cfg.validate();
    const double n_visible = static_cast<double>(model.input_size * model.input_size);
    const double n_hidden = static_cast<double>(model.hidden_side() * model.hidden_side());

    auto grad = CrbmGradient::zeros_like(model);
    double cross_entropy = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        require_visible(model, batch[i]);
        const Image2D v0 = cfg.binary_visible ? binarize(batch[i], 0.5) : batch[i];
        if (!cfg.binary_visible && !is_unit_range(v0)) throw Error("CRBM inputs must lie in [0,1]");
        Rng rng(derive_seed(seed, "chain", i));
        const auto chain = gibbs_chain(model, v0, cfg.cd_steps, rng);
        grad += phase_statistics(model, v0, chain.h0_probs);
        auto neg = phase_statistics(model, chain.v_k, chain.hk_probs);
        neg *= -1.0;
        grad += neg;

        double ce = 0.0;
        const auto& rec = chain.first_reconstruction.values();
        const auto& orig = v0.values();
        for (std::size_t p = 0; p < rec.size(); ++p) {
            const double q = std::clamp(rec[p], 1e-12, 1.0 - 1e-12);
            ce -= orig[p] * std::log(q) + (1.0 - orig[p]) * std::log1p(-q);
        }
        cross_entropy += ce / n_visible;
    }

    const double scale = cfg.learning_rate / static_cast<double>(batch.size());
    CdUpdateResult res{model, {}};
    double abs_dw = 0.0;
    for (std::size_t i = 0; i < grad.filters.size(); ++i) {
        const double dw = scale * grad.filters[i];
        res.model.filters[i] += dw;
        abs_dw += std::abs(dw);
    }
    res.model.visible_bias += scale * grad.visible_bias / n_visible;
    for (std::size_t m = 0; m < grad.hidden_biases.size(); ++m) {
        res.model.hidden_biases[m] += scale * grad.hidden_biases[m] / n_hidden;
    }
    res.diagnostics.reconstruction_cross_entropy = cross_entropy / static_cast<double>(batch.size());
    res.diagnostics.mean_abs_weight_delta = abs_dw / static_cast<double>(grad.filters.size());
    return res;
}

TrainResult train(const CrbmModel& model, std::span<const Image2D> data, const CrbmTrainConfig& cfg) {
    if (data.empty()) throw Error("CRBM training needs at least one image");
    cfg.validate();
    model.validate();
    for (const auto& img : data) require_visible(model, img);

    TrainResult res{model, {}};
    const std::size_t n = data.size();
    const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<std::size_t> order(n);
    std::vector<Image2D> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng(derive_seed(cfg.rng_seed, "shuffle", epoch)).shuffle(order.begin(), order.end());
        EpochStats stats;
        double images_seen = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            const auto lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
            batch.clear();
            for (auto i = lo; i < hi; ++i) batch.push_back(data[order[i]]);
            auto upd = cd_update(res.model, batch, cfg, derive_seed(cfg.rng_seed, "batch", epoch * n_batches + b));
            check_finite(upd.model, epoch, b);
            res.model = std::move(upd.model);
            const auto w = static_cast<double>(hi - lo);
            stats.reconstruction_cross_entropy += w * upd.diagnostics.reconstruction_cross_entropy;
            stats.mean_abs_weight_delta += upd.diagnostics.mean_abs_weight_delta;
            images_seen += w;
        }
        stats.reconstruction_cross_entropy /= images_seen;
        stats.mean_abs_weight_delta /= static_cast<double>(n_batches);
        res.history.epochs.push_back(stats);
    }
    return res;
}

Image2D visible_configuration(std::size_t side, std::uint64_t code) {
    Image2D v(side, side);
    for (std::size_t p = 0; p < v.size(); ++p) v.values()[p] = (code >> p) & 1U ? 1.0 : 0.0;
    return v;
}

double log_partition(const CrbmModel& model) {
    require_enumerable(model);
    const auto nv = model.input_size * model.input_size;
    std::vector<double> neg_f(std::size_t{1} << nv);
    for (std::uint64_t code = 0; code < neg_f.size(); ++code) {
        neg_f[code] = -free_energy(model, visible_configuration(model.input_size, code));
    }
    return log_sum_exp(neg_f);
}

double exact_log_likelihood(const CrbmModel& model, std::span<const Image2D> data) {
    const double log_z = log_partition(model);
    double ll = 0.0;
    for (const auto& v : data) {
        require_binary(v.values(), "likelihood data");
        ll += -free_energy(model, v) - log_z;
    }
    return ll;
}

CrbmGradient exact_log_likelihood_grad(const CrbmModel& model, std::span<const Image2D> data) {
    require_enumerable(model);
    const auto nv = model.input_size * model.input_size;
    const std::size_t configs = std::size_t{1} << nv;

    std::vector<double> neg_f(configs);
    for (std::uint64_t code = 0; code < configs; ++code) {
        neg_f[code] = -free_energy(model, visible_configuration(model.input_size, code));
    }
    const double log_z = log_sum_exp(neg_f);

    auto model_term = CrbmGradient::zeros_like(model);
    for (std::uint64_t code = 0; code < configs; ++code) {
        const auto v = visible_configuration(model.input_size, code);
        auto s = phase_statistics(model, v, hidden_probabilities(model, v));
        s *= std::exp(neg_f[code] - log_z);
        model_term += s;
    }

    auto grad = CrbmGradient::zeros_like(model);
    for (const auto& v : data) {
        require_binary(v.values(), "likelihood data");
        grad += phase_statistics(model, v, hidden_probabilities(model, v));
    }
    model_term *= -static_cast<double>(data.size());
    grad += model_term;
    return grad;
}

HiddenState extract_feature_map(const CrbmModel& model, const Image2D& img) {
    return hidden_probabilities(model, img);
}

Image2D reduce_1x1(const HiddenState& maps, std::span<const double> weights) {
    if (weights.size() != maps.num_maps) {
        throw Error("1x1 reduction has " + std::to_string(weights.size()) + " weights for " +
                    std::to_string(maps.num_maps) + " maps");
    }
    Image2D out(maps.side, maps.side);
    auto o = out.values();
    for (std::size_t m = 0; m < maps.num_maps; ++m) {
        const auto mp = maps.map(m);
        for (std::size_t p = 0; p < o.size(); ++p) o[p] += weights[m] * mp[p];
    }
    return out;
}

std::vector<double> reduction_weights(std::size_t num_filters, ReductionMode mode, std::uint64_t seed) {
    if (num_filters == 0) throw Error("reduction needs at least one map");
    std::vector<double> w(num_filters, 1.0 / static_cast<double>(num_filters));
    if (mode == ReductionMode::random_projection) {
        Rng rng(derive_seed(seed, "reduction"));
        double norm = 0.0;
        do {
            for (auto& x : w) x = rng.normal();
            norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
        } while (norm == 0.0);
        for (auto& x : w) x /= norm;
    }
    return w;
}

std::string crbm_to_json(const CrbmModel& model) {
    model.validate();
    nlohmann::ordered_json j;
    j["version"] = kModelFormatVersion;
    j["num_filters"] = model.num_filters;
    j["kernel_size"] = model.kernel_size;
    j["input_size"] = model.input_size;
    j["visible_bias"] = model.visible_bias;
    j["hidden_biases"] = model.hidden_biases;
    auto filters = nlohmann::ordered_json::array();
    for (std::size_t m = 0; m < model.num_filters; ++m) {
        const auto f = model.filter(m);
        filters.push_back(std::vector<double>(f.begin(), f.end()));
    }
    j["filters"] = std::move(filters);
    return j.dump(1) + "\n";
}

CrbmModel crbm_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("version").get<int>() != kModelFormatVersion) throw Error("unsupported CRBM model version");
        CrbmModel m;
        m.num_filters = j.at("num_filters").get<std::size_t>();
        m.kernel_size = j.at("kernel_size").get<std::size_t>();
        m.input_size = j.at("input_size").get<std::size_t>();
        m.visible_bias = j.at("visible_bias").get<double>();
        m.hidden_biases = j.at("hidden_biases").get<std::vector<double>>();
        const auto& filters = j.at("filters");
        if (!filters.is_array() || filters.size() != m.num_filters) throw Error("CRBM model: filter count mismatch");
        for (const auto& f : filters) {
            const auto w = f.get<std::vector<double>>();
            if (w.size() != m.kernel_size * m.kernel_size) throw Error("CRBM model: filter size mismatch");
            m.filters.insert(m.filters.end(), w.begin(), w.end());
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed CRBM model: ") + e.what());
    }
}

void save_crbm(const std::filesystem::path& path, const CrbmModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << crbm_to_json(model);
    if (!out) throw Error("write failed: " + path.string());
}

CrbmModel load_crbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open CRBM model " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return crbm_from_json(ss.str());
}

}  // namespace rcrbm
