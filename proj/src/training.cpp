#include "tcwm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tcwm/errors.hpp"

namespace tcwm {

std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::tcwm: return "tcwm";
        case TrainMode::no_align: return "no-align";
        case TrainMode::no_rec: return "no-rec";
        case TrainMode::direct_embedding: return "direct-embedding";
    }
    return "?";
}

TrainMode parse_train_mode(const std::string& s) {
    if (s == "tcwm") return TrainMode::tcwm;
    if (s == "no-align") return TrainMode::no_align;
    if (s == "no-rec") return TrainMode::no_rec;
    if (s == "direct-embedding") return TrainMode::direct_embedding;
    throw ValidationError("unknown training mode '" + s + "'");
}

void LossWeights::validate() const {
    for (double w : {dyn_z, dyn_s, align, rec, l1}) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss weights must be finite and >= 0");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be > 0");
}

ActiveTerms active_terms(TrainMode mode, const LossWeights& w) {
    const bool aligned = mode == TrainMode::tcwm || mode == TrainMode::no_rec;
    ActiveTerms t;
    t.dyn_z = true;
    t.dyn_s = aligned && w.dyn_s > 0.0;
    t.align = aligned && w.align > 0.0;
    t.rec = (mode == TrainMode::tcwm || mode == TrainMode::no_align) && w.rec > 0.0;
    t.l1 = aligned && w.l1 > 0.0;
    return t;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    dyn_z += o.dyn_z;
    dyn_s += o.dyn_s;
    align += o.align;
    rec += o.rec;
    l1 += o.l1;
    total += o.total;
    return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
    return {dyn_z * s, dyn_s * s, align * s, rec * s, l1 * s, total * s};
}

bool LossBreakdown::finite() const {
    return std::isfinite(dyn_z) && std::isfinite(dyn_s) && std::isfinite(align) && std::isfinite(rec) &&
           std::isfinite(l1) && std::isfinite(total);
}

double loss_mse(const Tensor& pred, const Tensor& target, Tensor* grad) {
    if (pred.size() != target.size() || pred.cols() != target.cols()) {
        throw DimensionError("mse: shapes " + shape_string(pred.shape()) + " and " + shape_string(target.shape()) +
                             " differ");
    }
    const std::size_t n = pred.size();
    if (n == 0) throw DimensionError("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = double(pred[i]) - double(target[i]);
        sum += d * d;
    }
    if (grad) {
        *grad = Tensor(pred.shape());
        const double scale = 2.0 / double(n);
        for (std::size_t i = 0; i < n; ++i) (*grad)[i] = Real(scale * (double(pred[i]) - double(target[i])));
    }
    return sum / double(n);
}

double info_nce(const Tensor& u, const Tensor& v, double tau, bool include_positive, Tensor* grad_u, Tensor* grad_v) {
    const std::size_t b = u.rows(), d = u.cols();
    if (v.rows() != b || v.cols() != d) {
        throw DimensionError("info_nce: shapes " + shape_string(u.shape()) + " and " + shape_string(v.shape()) +
                             " differ");
    }
    if (b < 2) throw DomainError("info_nce needs a batch of at least 2 (one in-batch negative)");
    if (!(tau > 0.0)) throw DomainError("info_nce: tau must be > 0");

    constexpr double kNormFloor = 1e-12;
    std::vector<double> uh(b * d), vh(b * d), un(b), vn(b);
    auto normalise = [&](const Tensor& x, std::vector<double>& xh, std::vector<double>& norms) {
        for (std::size_t i = 0; i < b; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += double(x(i, k)) * x(i, k);
            norms[i] = std::max(std::sqrt(s), kNormFloor);
            for (std::size_t k = 0; k < d; ++k) xh[i * d + k] = x(i, k) / norms[i];
        }
    };
    normalise(u, uh, un);
    normalise(v, vh, vn);

    std::vector<double> logits(b * b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            double c = 0.0;
            for (std::size_t k = 0; k < d; ++k) c += uh[i * d + k] * vh[j * d + k];
            logits[i * b + j] = c / tau;
        }

    // g[i][j] = dL/dlogit_ij
    std::vector<double> g(b * b, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double peak = -INFINITY;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !include_positive) continue;
            peak = std::max(peak, logits[i * b + j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !include_positive) continue;
            sum += std::exp(logits[i * b + j] - peak);
        }
        const double lse = peak + std::log(sum);
        loss += lse - logits[i * b + i];
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !include_positive) continue;
            g[i * b + j] = std::exp(logits[i * b + j] - lse) / double(b);
        }
        g[i * b + i] -= 1.0 / double(b);
    }
    loss /= double(b);

    if (grad_u || grad_v) {
        // dL/dcos = g / tau, then through the normalisation.
        std::vector<double> duh(b * d, 0.0), dvh(b * d, 0.0);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < b; ++j) {
                const double gc = g[i * b + j] / tau;
                if (gc == 0.0) continue;
                for (std::size_t k = 0; k < d; ++k) {
                    duh[i * d + k] += gc * vh[j * d + k];
                    dvh[j * d + k] += gc * uh[i * d + k];
                }
            }
        auto through_norm = [&](const std::vector<double>& dxh, const std::vector<double>& xh,
                                const std::vector<double>& norms, Tensor* out) {
            if (!out) return;
            *out = Tensor::matrix(b, d);
            for (std::size_t i = 0; i < b; ++i) {
                double dot = 0.0;
                for (std::size_t k = 0; k < d; ++k) dot += dxh[i * d + k] * xh[i * d + k];
                for (std::size_t k = 0; k < d; ++k)
                    (*out)(i, k) = Real((dxh[i * d + k] - dot * xh[i * d + k]) / norms[i]);
            }
        };
        through_norm(duh, uh, un, grad_u);
        through_norm(dvh, vh, vn, grad_v);
    }
    return loss;
}

double loss_align(const TcwmModel& model, const Tensor& z, const Tensor& s_std, double tau, bool include_positive) {
    return info_nce(model.align_features(z), model.proprio_features(s_std), tau, include_positive);
}

double l1_penalty(const TcwmModel& model) {
    double s = 0.0;
    for (Real w : model.align_head.weight.values()) s += std::fabs(double(w));
    return s;
}

std::vector<std::size_t> window_anchors(const TrajectoryBatch& data, std::size_t history, std::size_t first_episode,
                                        std::size_t episode_count) {
    std::vector<std::size_t> anchors;
    for (std::size_t e = first_episode; e < first_episode + episode_count && e < data.episodes(); ++e) {
        const std::size_t begin = data.episode_begin(e), end = data.episode_end(e);
        for (std::size_t t = begin + history; t + 1 < end; ++t) anchors.push_back(t);
    }
    return anchors;
}

WindowBatch gather_windows(const TrajectoryBatch& data, const StandardizationStats& stats,
                           std::span<const std::size_t> anchors, std::size_t history) {
    WindowBatch wb;
    const std::size_t b = anchors.size(), k_steps = history + 2;
    const std::size_t dx = data.embeddings.cols(), dp = data.proprio.cols(), da = data.actions.cols();
    wb.size = b;
    wb.history = history;
    wb.x_vis = Tensor::matrix(k_steps * b, dx);
    wb.s_std = Tensor::matrix(k_steps * b, dp);
    wb.actions = Tensor::matrix((history + 1) * b, da);
    if (data.has_renders()) wb.renders = Tensor::matrix(b, data.renders.cols());
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t t = anchors[i];
        if (t < history || t + 1 >= data.steps()) throw DomainError("gather_windows: anchor out of range");
        for (std::size_t k = 0; k < k_steps; ++k) {
            const std::size_t src = t - history + k, dst = k * b + i;
            std::copy_n(data.embeddings.row(src).data(), dx, wb.x_vis.row(dst).data());
            std::copy_n(data.proprio.row(src).data(), dp, wb.s_std.row(dst).data());
            stats.standardize_inplace(wb.s_std.row(dst));
            if (k <= history) std::copy_n(data.actions.row(src).data(), da, wb.actions.row(dst).data());
        }
        if (data.has_renders()) std::copy_n(data.renders.row(t).data(), data.renders.cols(), wb.renders.row(i).data());
    }
    return wb;
}

namespace {

Tensor rows_of(const Tensor& t, std::size_t first, std::size_t count) { return t.slice_rows(first, count); }

void add_rows(Tensor& dst, std::size_t first, const Tensor& src, Real scale = Real(1)) {
    const std::size_t n = src.size();
    Real* d = dst.data() + first * dst.cols();
    for (std::size_t i = 0; i < n; ++i) d[i] += scale * src[i];
}

void scale_inplace(Tensor& t, double s) {
    for (auto& v : t.values()) v = Real(v * s);
}

Tensor pack_windows(const Tensor& z, const Tensor& actions, std::size_t b, std::size_t history) {
    const std::size_t dz = z.cols(), da = actions.cols(), stride = dz + da;
    Tensor w = Tensor::matrix(b, (history + 1) * stride);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k <= history; ++k) {
            Real* out = w.row(i).data() + k * stride;
            std::copy_n(z.row(k * b + i).data(), dz, out);
            std::copy_n(actions.row(k * b + i).data(), da, out + dz);
        }
    return w;
}

}  // namespace

DetachedTargets detached_targets(const TcwmModel& model, const WindowBatch& batch) {
    const std::size_t b = batch.size, h = batch.history;
    DetachedTargets t;
    t.z_next = model.encode(
        model.embed_joint(rows_of(batch.x_vis, (h + 1) * b, b), rows_of(batch.s_std, (h + 1) * b, b)));
    t.joint_anchor = model.embed_joint(rows_of(batch.x_vis, h * b, b), rows_of(batch.s_std, h * b, b));
    return t;
}

LossBreakdown total_loss(TcwmModel& model, const WindowBatch& batch, const LossOptions& opt, bool grads,
                         const DetachedTargets* frozen) {
    const ModelConfig& cfg = model.config();
    const LossWeights& w = opt.weights;
    const std::size_t b = batch.size, h = batch.history, latent = model.latent_dim();
    const std::size_t k_steps = h + 2, stride = latent + cfg.d_a;
    if (h != cfg.history) {
        throw DimensionError("window history " + std::to_string(h) + " does not match model history " +
                             std::to_string(cfg.history));
    }
    if ((opt.mode == TrainMode::direct_embedding) != cfg.direct_embedding) {
        throw ValidationError("training mode " + to_string(opt.mode) + " does not match the model layout");
    }
    const ActiveTerms act = active_terms(opt.mode, w);
    if (act.align && b < 2) throw DomainError("alignment needs a batch of at least 2");

    LossBreakdown out;

    // Encode every step of every window at once.
    const Tensor joint = model.embed_joint(batch.x_vis, batch.s_std);
    const Tensor z = model.encode(joint);
    const Tensor windows = pack_windows(z, batch.actions, b, h);

    Tensor dz, dwin;
    if (grads) {
        dz = Tensor::matrix(k_steps * b, latent);
        dwin = Tensor::matrix(b, windows.cols());
    }

    // L^z_dyn
    {
        MlpNet::Cache cache;
        const Tensor zhat = model.dynamics.forward(windows, cache);
        const bool use_frozen = frozen && opt.stop_grad_target;
        const Tensor z_next = use_frozen ? frozen->z_next : rows_of(z, (h + 1) * b, b);
        Tensor g;
        out.dyn_z = loss_mse(zhat, z_next, grads ? &g : nullptr);
        if (grads) {
            scale_inplace(g, w.dyn_z);
            const Tensor dw = model.dynamics.backward(cache, g);
            add_rows(dwin, 0, dw);
            if (!opt.stop_grad_target) add_rows(dz, (h + 1) * b, g, Real(-1));
        }
    }

    // L^s_dyn, target is the standardised proprioception itself.
    if (act.dyn_s) {
        MlpNet::Cache cache;
        const Tensor shat = model.tc_dynamics.forward(windows, cache);
        Tensor g;
        out.dyn_s = loss_mse(shat, rows_of(batch.s_std, (h + 1) * b, b), grads ? &g : nullptr);
        if (grads) {
            scale_inplace(g, w.dyn_s);
            add_rows(dwin, 0, model.tc_dynamics.backward(cache, g));
        }
    }

    const Tensor z_anchor = rows_of(z, h * b, b);
    Tensor dz_anchor = grads ? Tensor::matrix(b, latent) : Tensor();
    Tensor djoint_anchor;  // extra gradient into the joint embedding when L_rec's target is live

    if (act.align) {
        const Tensor zin = model.align_input(z_anchor);
        const Tensor s_anchor = rows_of(batch.s_std, h * b, b);
        const Tensor u = model.align_head.forward(zin);
        const Tensor v = model.proprio_head.forward(s_anchor);
        Tensor gu, gv;
        out.align = info_nce(u, v, w.tau, opt.infonce_include_positive, grads ? &gu : nullptr, grads ? &gv : nullptr);
        if (grads) {
            scale_inplace(gu, w.align);
            scale_inplace(gv, w.align);
            Tensor dzin = model.align_head.backward(zin, gu);
            if (!cfg.align_full_latent) {
                for (std::size_t r = 0; r < b; ++r)
                    for (std::size_t j = cfg.d_s; j < latent; ++j) dzin(r, j) = 0;
            }
            add_rows(dz_anchor, 0, dzin);
            model.proprio_head.backward(s_anchor, gv);
        }
    }

    if (act.rec) {
        const Tensor xhat = model.embed_decoder.forward(z_anchor);
        const bool use_frozen = frozen && opt.detach_rec_target;
        const Tensor target = use_frozen ? frozen->joint_anchor : rows_of(joint, h * b, b);
        Tensor g;
        out.rec = loss_mse(xhat, target, grads ? &g : nullptr);
        if (grads) {
            scale_inplace(g, w.rec);
            add_rows(dz_anchor, 0, model.embed_decoder.backward(z_anchor, g));
            if (!opt.detach_rec_target) {
                djoint_anchor = g;
                scale_inplace(djoint_anchor, -1.0);
            }
        }
    }

    if (act.l1) {
        out.l1 = l1_penalty(model);
        if (grads) {
            auto& gw = model.align_head.grad_weight;
            const auto& wt = model.align_head.weight;
            for (std::size_t i = 0; i < wt.size(); ++i) {
                if (wt[i] > 0) gw[i] += Real(w.l1);
                else if (wt[i] < 0) gw[i] -= Real(w.l1);
            }
        }
    }

    out.total = w.dyn_z * out.dyn_z + (act.dyn_s ? w.dyn_s * out.dyn_s : 0.0) +
                (act.align ? w.align * out.align : 0.0) + (act.rec ? w.rec * out.rec : 0.0) +
                (act.l1 ? w.l1 * out.l1 : 0.0);

    if (grads) {
        // Window gradient back onto the per-step latents.
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t k = 0; k <= h; ++k) {
                const Real* src = dwin.row(i).data() + k * stride;
                Real* dst = dz.row(k * b + i).data();
                for (std::size_t j = 0; j < latent; ++j) dst[j] += src[j];
            }
        add_rows(dz, h * b, dz_anchor);

        Tensor djoint = cfg.direct_embedding ? dz : model.projector.backward(joint, dz);
        if (!djoint_anchor.empty()) add_rows(djoint, h * b, djoint_anchor);

        const std::size_t dx = cfg.d_x, dpe = cfg.pe_dim();
        Tensor dpe_t = Tensor::matrix(k_steps * b, dpe);
        for (std::size_t r = 0; r < k_steps * b; ++r) std::copy_n(djoint.row(r).data() + dx, dpe, dpe_t.row(r).data());
        model.proprio_embedder.backward(batch.s_std, dpe_t);
    }
    return out;
}

std::vector<ParamRef> trainable_params(TcwmModel& model, TrainMode mode) {
    std::vector<ParamRef> out;
    auto add = [&](std::vector<ParamRef> p) { out.insert(out.end(), p.begin(), p.end()); };
    add(model.proprio_embedder.params("proprio_embedder"));
    if (mode != TrainMode::direct_embedding) add(model.projector.params("projector"));
    if (mode == TrainMode::tcwm || mode == TrainMode::no_rec) {
        add(model.align_head.params("align_head"));
        add(model.proprio_head.params("proprio_head"));
    }
    add(model.dynamics.params("dynamics"));
    if (mode == TrainMode::tcwm || mode == TrainMode::no_rec) add(model.tc_dynamics.params("tc_dynamics"));
    if (mode == TrainMode::tcwm || mode == TrainMode::no_align) add(model.embed_decoder.params("embed_decoder"));
    return out;
}

void TrainConfig::validate() const {
    if (batch < 2) throw ValidationError("batch size must be >= 2 (InfoNCE needs an in-batch negative)");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be > 0");
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) throw ValidationError("eval fraction must lie in [0, 1)");
    loss.weights.validate();
}

std::size_t eval_episode_count(std::size_t episodes, double fraction) {
    if (fraction <= 0.0 || episodes < 2) return 0;
    const auto n = static_cast<std::size_t>(std::llround(fraction * double(episodes)));
    return std::clamp<std::size_t>(n, 1, episodes - 1);
}

void TrainReport::write_csv(const std::filesystem::path& file) const {
    std::ostringstream os;
    os << "epoch";
    for (const char* split : {"train", "eval"})
        for (const char* term : {"dyn_z", "dyn_s", "align", "rec", "l1", "total"}) os << ',' << split << '_' << term;
    os << ",visual\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.9g", v);
        os << buf;
    };
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        os << e + 1;
        for (const auto* lb : {&epochs[e].train, &epochs[e].eval}) {
            put(lb->dyn_z);
            put(lb->dyn_s);
            put(lb->align);
            put(lb->rec);
            put(lb->l1);
            put(lb->total);
        }
        put(epochs[e].visual);
        os << '\n';
    }
    write_text_atomic(file, os.str());
}

namespace {

// Splits n items into consecutive chunks of `size`; a trailing chunk smaller
// than 2 is folded into the one before it.
std::vector<std::pair<std::size_t, std::size_t>> chunks(std::size_t n, std::size_t size) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n; i += size) out.emplace_back(i, std::min(size, n - i));
    if (out.size() > 1 && out.back().second < 2) {
        out[out.size() - 2].second += out.back().second;
        out.pop_back();
    }
    return out;
}

double visual_step(TcwmModel& model, const WindowBatch& wb, Adam& opt) {
    const ModelConfig& cfg = model.config();
    const std::size_t b = wb.size, h = wb.history;
    const Tensor joint = model.embed_joint(wb.x_vis.slice_rows(h * b, b), wb.s_std.slice_rows(h * b, b));
    const Tensor xhat = cfg.direct_embedding ? joint : model.decode_embedding(model.encode(joint));
    // Detached copy of the reconstructed visual embedding.
    Tensor input = Tensor::matrix(b, cfg.d_x);
    for (std::size_t r = 0; r < b; ++r) std::copy_n(xhat.row(r).data(), cfg.d_x, input.row(r).data());
    model.visual_decoder.zero_grad();
    MlpNet::Cache cache;
    const Tensor out = model.visual_decoder.forward(input, cache);
    Tensor g;
    const double loss = loss_mse(out, wb.renders, &g);
    model.visual_decoder.backward(cache, g);
    opt.step();
    return loss;
}

}  // namespace

TrainReport train_with_stats(TcwmModel& model, const TrajectoryBatch& data, const TrainConfig& config,
                             const StandardizationStats& stats) {
    config.validate();
    const ModelConfig& mc = model.config();
    if ((config.loss.mode == TrainMode::direct_embedding) != mc.direct_embedding) {
        throw ValidationError("training mode " + to_string(config.loss.mode) + " does not match the model layout");
    }
    if (data.embeddings.cols() != mc.d_x || data.proprio.cols() != mc.d_p || data.actions.cols() != mc.d_a) {
        throw DimensionError("dataset dims (" + std::to_string(data.embeddings.cols()) + ", " +
                             std::to_string(data.proprio.cols()) + ", " + std::to_string(data.actions.cols()) +
                             ") do not match the model");
    }
    TrainReport report;
    if (config.epochs == 0) return report;

    const std::size_t h = mc.history;
    const std::size_t n_eval = eval_episode_count(data.episodes(), config.eval_fraction);
    const std::size_t n_train = data.episodes() - n_eval;
    const auto train_anchors = window_anchors(data, h, 0, n_train);
    const auto eval_anchors = window_anchors(data, h, n_train, n_eval);
    if (train_anchors.size() < 2) throw DomainError("dataset too small: fewer than two training windows");
    const std::size_t batch = std::min(config.batch, train_anchors.size());

    Adam opt(trainable_params(model, config.loss.mode), AdamConfig{config.lr});
    const bool visual = mc.visual_decoder && data.has_renders() && !model.visual_decoder.empty();
    Adam vis_opt;
    if (visual) vis_opt = Adam(model.visual_params(), AdamConfig{config.lr});

    auto evaluate = [&]() {
        LossBreakdown sum;
        if (eval_anchors.size() < 2) return sum;
        for (auto [first, count] : chunks(eval_anchors.size(), batch)) {
            const auto wb = gather_windows(data, stats, std::span(eval_anchors).subspan(first, count), h);
            sum += total_loss(model, wb, config.loss, false).scaled(double(count));
        }
        return sum.scaled(1.0 / double(eval_anchors.size()));
    };

    report.initial_eval = evaluate();
    std::vector<std::size_t> order = train_anchors;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 0x7472, epoch));
        rng.shuffle(order.begin(), order.end());
        EpochLog log;
        std::size_t seen = 0, index = 0;
        for (auto [first, count] : chunks(order.size(), batch)) {
            const auto wb = gather_windows(data, stats, std::span(order).subspan(first, count), h);
            const std::string where = " at epoch " + std::to_string(epoch) + " batch " + std::to_string(index);
            model.zero_grad();
            LossBreakdown lb;
            try {
                lb = total_loss(model, wb, config.loss, true);
                if (!lb.finite()) throw NumericError("non-finite loss");
                opt.step();
                if (visual) log.visual += visual_step(model, wb, vis_opt) * double(count);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + where);
            }
            log.train += lb.scaled(double(count));
            seen += count;
            ++index;
        }
        log.train = log.train.scaled(1.0 / double(seen));
        log.visual /= double(seen);
        log.eval = evaluate();
        report.epochs.push_back(log);
    }
    report.final_eval = report.epochs.back().eval;
    return report;
}

TrainResult train(TcwmModel& model, const TrajectoryBatch& data, const TrainConfig& config) {
    config.validate();
    TrainResult result;
    const std::size_t n_eval = eval_episode_count(data.episodes(), config.eval_fraction);
    result.train_episodes = data.episodes() - n_eval;
    if (result.train_episodes == 0) throw DomainError("no training episodes");
    const std::size_t rows = data.episode_end(result.train_episodes - 1);
    result.stats = compute_stats(data.proprio.slice_rows(0, rows));
    result.report = train_with_stats(model, data, config, result.stats);
    return result;
}

Tensor encode_dataset(const TcwmModel& model, const TrajectoryBatch& data, const StandardizationStats& stats) {
    return model.encode(model.embed_joint(data.embeddings, stats.standardize(data.proprio)));
}

}  // namespace tcwm
