// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/harness/trainer.hpp"

#include "cei/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cei::harness {
namespace {

struct TensorRef {
    double* data;
    Eigen::Index size;
};

std::vector<TensorRef> tensors_of(DecoderWeights& w) {
    std::vector<TensorRef> out;
    w.for_each_tensor([&](std::string_view, double* data, Eigen::Index n) { out.push_back({data, n}); });
    return out;
}

void check_compatible(const DecoderWeights& weights, const TrainingExample& ex) {
    if (ex.prefix.rows() > 0 && ex.prefix.cols() != weights.config.dim) {
        throw InputError(fmt::format("scene rows have width {}, model expects {}", ex.prefix.cols(), weights.config.dim));
    }
    if (ex.target_begin < 1 || ex.target_begin > static_cast<int>(ex.tokens.size())) {
        throw InputError("training example target range is invalid");
    }
}

/// Back-propagates one example, accumulating into `g`; returns the summed
/// negative log-likelihood of its targets.
double backprop_example(const DecoderWeights& w, const TrainingExample& ex, double weight, DecoderWeights* g) {
    const ModelConfig& cfg = w.config;
    const int d = cfg.dim;
    const int hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const Matrix inputs = build_inputs(w, ex.prefix, ex.tokens);
    const auto acts = detail::forward_sequence(w, inputs, true);
    const Eigen::Index nv = ex.prefix.rows();
    const Eigen::Index T = inputs.rows();

    double nll = 0.0;
    Matrix dlogits = Matrix::Zero(T, cfg.vocab_size);
    for (std::size_t i = static_cast<std::size_t>(ex.target_begin); i < ex.tokens.size(); ++i) {
        const Eigen::Index pos = nv + static_cast<Eigen::Index>(i) - 1;
        const Vector p = softmax(acts.logits.row(pos).transpose());
        const TokenId target = ex.tokens[i];
        nll -= std::log(std::max(p[target], 1e-300));
        dlogits.row(pos) = p.transpose() * weight;
        dlogits(pos, target) -= weight;
    }
    if (g == nullptr) return nll;

    g->embedding.noalias() += dlogits.transpose() * acts.final_normed;
    Matrix dx = dlogits * w.embedding;
    const Matrix& x_last = acts.layers.empty() ? inputs : acts.layers.back().output;
    dx = ops::rms_norm_rows_backward(x_last, w.final_norm, acts.final_inv_rms, dx, g->final_norm);

    for (std::size_t l = w.layers.size(); l-- > 0;) {
        const LayerWeights& lw = w.layers[l];
        LayerWeights& gw = g->layers[l];
        const auto& a = acts.layers[l];

        // Feed-forward block.
        gw.w_down.noalias() += a.act.transpose() * dx;
        Matrix dup = dx * lw.w_down.transpose();
        for (Eigen::Index i = 0; i < dup.size(); ++i) dup.data()[i] *= ops::gelu_grad(a.up.data()[i]);
        gw.w_up.noalias() += a.ffn_in.transpose() * dup;
        const Matrix dffn_in = dup * lw.w_up.transpose();
        Matrix dmid = dx + ops::rms_norm_rows_backward(a.mid, lw.ffn_norm, a.ffn_inv_rms, dffn_in, gw.ffn_norm);

        // Attention block.
        gw.wo.noalias() += a.attn_out.transpose() * dmid;
        const Matrix dattn = dmid * lw.wo.transpose();
        Matrix dq = Matrix::Zero(T, d);
        Matrix dk = Matrix::Zero(T, d);
        Matrix dv = Matrix::Zero(T, d);
        for (int h = 0; h < cfg.num_heads; ++h) {
            const Matrix& p = a.probs[static_cast<std::size_t>(h)];
            const auto qh = a.q.middleCols(h * hd, hd);
            const auto kh = a.k.middleCols(h * hd, hd);
            const auto vh = a.v.middleCols(h * hd, hd);
            const auto dout = dattn.middleCols(h * hd, hd);
            const Matrix dp = dout * vh.transpose();
            dv.middleCols(h * hd, hd) += p.transpose() * dout;
            Matrix ds = Matrix::Zero(T, T);
            for (Eigen::Index i = 0; i < T; ++i) {
                const double inner = dp.row(i).head(i + 1).dot(p.row(i).head(i + 1));
                ds.row(i).head(i + 1) = (p.row(i).head(i + 1).array() * (dp.row(i).head(i + 1).array() - inner)).matrix();
            }
            ds *= scale;
            dq.middleCols(h * hd, hd) += ds * kh;
            dk.middleCols(h * hd, hd) += ds.transpose() * qh;
        }
        for (Eigen::Index t = 0; t < T; ++t) {
            ops::rope_in_place(dq.row(t).data(), d, hd, static_cast<int>(t), true);
            ops::rope_in_place(dk.row(t).data(), d, hd, static_cast<int>(t), true);
        }
        gw.wq.noalias() += a.attn_in.transpose() * dq;
        gw.wk.noalias() += a.attn_in.transpose() * dk;
        gw.wv.noalias() += a.attn_in.transpose() * dv;
        Matrix dattn_in = dq * lw.wq.transpose();
        dattn_in.noalias() += dk * lw.wk.transpose();
        dattn_in.noalias() += dv * lw.wv.transpose();
        dx = dmid + ops::rms_norm_rows_backward(a.input, lw.attn_norm, a.attn_inv_rms, dattn_in, gw.attn_norm);
    }

    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
        g->embedding.row(ex.tokens[i]) += dx.row(nv + static_cast<Eigen::Index>(i));
    }
    return nll;
}

}  // namespace

std::string to_string(Optimizer optimizer) { return optimizer == Optimizer::Adam ? "adam" : "gd"; }

Optimizer parse_optimizer(const std::string& text) {
    if (text == "adam") return Optimizer::Adam;
    if (text == "gd") return Optimizer::GradientDescent;
    throw ConfigError("unknown optimizer '" + text + "' (expected adam or gd)");
}

std::vector<TrainingExample> make_training_set(const World& world, std::uint64_t seed, int max_scenes) {
    std::mt19937_64 rng(seed);
    const auto prompt = world.prompt_ids();
    std::vector<TrainingExample> out;
    const std::size_t n = max_scenes > 0 ? std::min(world.scenes.size(), static_cast<std::size_t>(max_scenes))
                                         : world.scenes.size();
    for (std::size_t s = 0; s < n; ++s) {
        const auto& scene = world.scenes[s];
        TrainingExample ex;
        ex.prefix = render_scene(scene, world.object_table, world.params.noise_scale);
        ex.tokens = prompt;
        const auto caption = caption_tokens(world, scene, rng);
        ex.tokens.insert(ex.tokens.end(), caption.begin(), caption.end());
        ex.target_begin = static_cast<int>(prompt.size());
        out.push_back(std::move(ex));
    }
    return out;
}

double loss_and_gradient(const DecoderWeights& weights, std::span<const TrainingExample> batch, DecoderWeights* grad) {
    if (batch.empty()) throw InputError("empty training batch");
    std::size_t targets = 0;
    for (const auto& ex : batch) {
        check_compatible(weights, ex);
        targets += ex.tokens.size() - static_cast<std::size_t>(ex.target_begin);
    }
    if (targets == 0) throw InputError("training batch has no target tokens");
    if (grad != nullptr) {
        *grad = make_zero_weights(weights.config);
        grad->for_each_tensor([](std::string_view, double* data, Eigen::Index n) { std::fill(data, data + n, 0.0); });
    }
    const double weight = 1.0 / static_cast<double>(targets);
    double nll = 0.0;
    for (const auto& ex : batch) nll += backprop_example(weights, ex, weight, grad);
    return nll * weight;
}

TrainResult fit_toy_captioner(const DecoderWeights& weights, const World& world, const TrainOptions& options) {
    if (world.params.dim != weights.config.dim) {
        throw InputError(fmt::format("world dim {} does not match model dim {}", world.params.dim, weights.config.dim));
    }
    if (world.tokenizer.size() != weights.config.vocab_size) {
        throw InputError(fmt::format("world vocabulary {} does not match model vocabulary {}", world.tokenizer.size(),
                                     weights.config.vocab_size));
    }
    if (options.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(options.learning_rate >= 0.0) || !std::isfinite(options.learning_rate)) {
        throw ConfigError("learning_rate must be finite and >= 0");
    }
    const auto batch = make_training_set(world, options.seed, options.max_scenes);

    TrainResult result;
    result.weights = weights;
    auto params = tensors_of(result.weights);
    DecoderWeights grad;
    DecoderWeights m = make_zero_weights(weights.config);
    DecoderWeights v = make_zero_weights(weights.config);
    for (auto* moments : {&m, &v}) {
        moments->for_each_tensor([](std::string_view, double* data, Eigen::Index n) { std::fill(data, data + n, 0.0); });
    }
    auto m_refs = tensors_of(m);
    auto v_refs = tensors_of(v);
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kAdamEps = 1e-8;

    for (int epoch = 0; epoch <= options.epochs; ++epoch) {
        const bool last = epoch == options.epochs;
        const double prev = result.losses.empty() ? std::nan("") : result.losses.back();
        double loss = 0.0;
        try {
            loss = loss_and_gradient(result.weights, batch, last ? nullptr : &grad);
        } catch (const NumericError& e) {
            throw TrainingError(fmt::format("training diverged at epoch {} (previous loss {}, learning rate {}): {}", epoch,
                                            prev, options.learning_rate, e.what()));
        }
        if (!std::isfinite(loss)) {
            throw TrainingError(fmt::format("loss became non-finite at epoch {} (previous loss {}, learning rate {})", epoch,
                                            prev, options.learning_rate));
        }
        result.losses.push_back(loss);
        if (options.on_epoch) options.on_epoch(epoch, loss);
        if (last) break;

        auto g_refs = tensors_of(grad);
        const double lr = options.cosine_decay
                              ? options.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / options.epochs))
                              : options.learning_rate;
        const double t = epoch + 1;
        const double c1 = 1.0 - std::pow(kBeta1, t);
        const double c2 = 1.0 - std::pow(kBeta2, t);
        for (std::size_t k = 0; k < params.size(); ++k) {
            double* w = params[k].data;
            const double* gk = g_refs[k].data;
            for (Eigen::Index i = 0; i < params[k].size; ++i) {
                if (options.optimizer == Optimizer::GradientDescent) {
                    w[i] -= lr * gk[i];
                    continue;
                }
                double& mi = m_refs[k].data[i];
                double& vi = v_refs[k].data[i];
                mi = kBeta1 * mi + (1.0 - kBeta1) * gk[i];
                vi = kBeta2 * vi + (1.0 - kBeta2) * gk[i] * gk[i];
                w[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + kAdamEps);
            }
        }
        round_to_storage_precision(result.weights);
    }
    return result;
}

bool trailing_window_non_increasing(std::span<const double> losses, int window) {
    if (window < 1) throw InputError("window must be positive");
    const auto w = static_cast<std::size_t>(window);
    if (losses.size() < 2 * w) return true;
    double recent = 0.0;
    double before = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        recent += losses[losses.size() - 1 - i];
        before += losses[losses.size() - 1 - w - i];
    }
    return recent <= before;
}

}  // namespace cei::harness
