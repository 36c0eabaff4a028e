#include "tcwm/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tcwm/errors.hpp"
#include "tcwm/training.hpp"

namespace tcwm {

void DiffusionConfig::validate() const {
    if (steps < 1) throw ValidationError("diffusion: steps must be >= 1");
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
        throw ValidationError("diffusion: need 0 < beta_start <= beta_end < 1");
    }
    if (horizon < 1) throw ValidationError("diffusion: horizon must be >= 1");
    if (execute < 1 || execute > horizon) throw ValidationError("diffusion: need 1 <= execute <= horizon");
    if (hidden == 0 || batch == 0) throw ValidationError("diffusion: hidden width and batch must be positive");
    if (!(lr > 0.0)) throw ValidationError("diffusion: learning rate must be > 0");
}

NoiseSchedule::NoiseSchedule(std::size_t steps, double beta_start, double beta_end) {
    if (steps == 0) throw DomainError("noise schedule needs at least one step");
    betas.resize(steps);
    alphas.resize(steps);
    alpha_bars.resize(steps);
    double prod = 1.0;
    for (std::size_t i = 0; i < steps; ++i) {
        betas[i] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * double(i) / double(steps - 1);
        alphas[i] = 1.0 - betas[i];
        prod *= alphas[i];
        alpha_bars[i] = prod;
    }
}

Tensor ddpm_sample(const NoiseSchedule& schedule, std::size_t n, std::size_t dim, const NoisePredictor& eps, Rng& rng,
                   std::span<const double> clip_lo, std::span<const double> clip_hi) {
    const bool clip = !clip_lo.empty();
    if (clip && (clip_lo.size() != dim || clip_hi.size() != dim)) throw DimensionError("ddpm_sample: clip box size");
    Tensor x = Tensor::matrix(n, dim);
    for (auto& v : x.values()) v = Real(rng.normal());
    Tensor x0 = Tensor::matrix(n, dim);
    for (std::size_t step = schedule.steps(); step-- > 0;) {
        const Tensor e = eps(x, step);
        const double ab = schedule.alpha_bars[step];
        const double ab_prev = step > 0 ? schedule.alpha_bars[step - 1] : 1.0;
        const double sa = std::sqrt(ab), s1 = std::sqrt(1.0 - ab);
        for (std::size_t i = 0; i < x.size(); ++i) {
            double v = (double(x[i]) - s1 * e[i]) / sa;
            if (clip) v = std::clamp(v, clip_lo[i % dim], clip_hi[i % dim]);
            x0[i] = Real(v);
        }
        if (step == 0) return x0;
        const double beta = schedule.betas[step];
        const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
        const double ct = std::sqrt(schedule.alphas[step]) * (1.0 - ab_prev) / (1.0 - ab);
        const double sd = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = Real(c0 * x0[i] + ct * x[i] + sd * rng.normal());
        }
        if (!x.all_finite()) throw PlannerError("ddpm_sample: non-finite sample");
    }
    return x0;
}

void time_features(std::size_t t, std::size_t steps, std::span<Real> out) {
    const double s = double(t + 1) / double(steps);
    out[0] = Real(s);
    std::size_t j = 1;
    for (double k : {1.0, 2.0, 4.0, 8.0}) {
        out[j++] = Real(std::sin(std::numbers::pi * k * s));
        out[j++] = Real(std::cos(std::numbers::pi * k * s));
    }
}

ConditionalDdpm::ConditionalDdpm(std::size_t data_dim, std::size_t cond_dim, const DiffusionConfig& cfg,
                                 std::uint64_t seed)
    : data_dim_(data_dim), cond_dim_(cond_dim), schedule_(cfg.steps, cfg.beta_start, cfg.beta_end) {
    cfg.validate();
    if (data_dim == 0) throw DimensionError("diffusion model needs a positive data dimension");
    Rng rng(derive_seed(seed, 0x6470));
    std::vector<std::size_t> widths{data_dim + cond_dim + kTimeFeatures};
    for (std::size_t i = 0; i < cfg.depth; ++i) widths.push_back(cfg.hidden);
    widths.push_back(data_dim);
    net_ = MlpNet::random(widths, rng);
}

void ConditionalDdpm::set_clip(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != data_dim_ || hi.size() != data_dim_) throw DimensionError("set_clip: box size mismatch");
    clip_lo_ = std::move(lo);
    clip_hi_ = std::move(hi);
}

Tensor ConditionalDdpm::net_input(const Tensor& x_t, const Tensor& cond_norm, std::span<const std::size_t> t) const {
    const std::size_t n = x_t.rows(), width = data_dim_ + cond_dim_ + kTimeFeatures;
    Tensor in = Tensor::matrix(n, width);
    for (std::size_t i = 0; i < n; ++i) {
        Real* r = in.row(i).data();
        std::copy_n(x_t.row(i).data(), data_dim_, r);
        if (cond_dim_) std::copy_n(cond_norm.row(i).data(), cond_dim_, r + data_dim_);
        time_features(t[i], schedule_.steps(), std::span<Real>(r + data_dim_ + cond_dim_, kTimeFeatures));
    }
    return in;
}

Tensor ConditionalDdpm::predict_noise(const Tensor& x_t, const Tensor& cond_norm, std::size_t t) const {
    std::vector<std::size_t> ts(x_t.rows(), t);
    return net_.forward(net_input(x_t, cond_norm, ts));
}

double ConditionalDdpm::fit(const Tensor& data, const Tensor& cond, const DiffusionConfig& cfg) {
    if (data.cols() != data_dim_) throw DimensionError("ddpm fit: data has the wrong width");
    const std::size_t n = data.rows();
    if (cond_dim_ && (cond.cols() != cond_dim_ || cond.rows() != n)) throw DimensionError("ddpm fit: condition shape");
    if (n == 0) throw DomainError("ddpm fit: no training samples");

    data_stats_ = compute_stats(data);
    const Tensor x0 = data_stats_.standardize(data);
    Tensor c;
    if (cond_dim_) {
        cond_stats_ = compute_stats(cond);
        c = cond_stats_.standardize(cond);
    }

    Adam opt(net_.params("eps"), AdamConfig{cfg.lr});
    const std::size_t batch = std::min(cfg.batch, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    double last = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 0x6464, epoch));
        rng.shuffle(order.begin(), order.end());
        double sum = 0.0;
        for (std::size_t first = 0; first < n; first += batch) {
            const std::size_t b = std::min(batch, n - first);
            Tensor xt = Tensor::matrix(b, data_dim_), noise = Tensor::matrix(b, data_dim_);
            Tensor cb = cond_dim_ ? Tensor::matrix(b, cond_dim_) : Tensor();
            std::vector<std::size_t> ts(b);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t src = order[first + i];
                ts[i] = rng.index(schedule_.steps());
                const double ab = schedule_.alpha_bars[ts[i]];
                for (std::size_t j = 0; j < data_dim_; ++j) {
                    const double e = rng.normal();
                    noise(i, j) = Real(e);
                    xt(i, j) = Real(std::sqrt(ab) * x0(src, j) + std::sqrt(1.0 - ab) * e);
                }
                if (cond_dim_) std::copy_n(c.row(src).data(), cond_dim_, cb.row(i).data());
            }
            MlpNet::Cache cache;
            const Tensor pred = net_.forward(net_input(xt, cb, ts), cache);
            Tensor g;
            const double loss = loss_mse(pred, noise, &g);
            if (!std::isfinite(loss)) {
                throw NumericError("diffusion training: non-finite loss at epoch " + std::to_string(epoch));
            }
            net_.zero_grad();
            net_.backward(cache, g);
            opt.step();
            sum += loss * double(b);
        }
        last = sum / double(n);
    }
    return last;
}

Tensor ConditionalDdpm::sample(const Tensor& cond, std::size_t n, Rng& rng) const {
    Tensor c;
    if (cond_dim_) {
        if (cond.cols() != cond_dim_) throw DimensionError("ddpm sample: condition has the wrong width");
        n = cond.rows();
        c = cond_stats_.standardize(cond);
    }
    std::vector<double> lo, hi;
    if (!clip_lo_.empty()) {
        for (std::size_t j = 0; j < data_dim_; ++j) {
            lo.push_back((clip_lo_[j] - data_stats_.mean[j]) / data_stats_.std[j]);
            hi.push_back((clip_hi_[j] - data_stats_.mean[j]) / data_stats_.std[j]);
        }
    }
    const Tensor z = ddpm_sample(
        schedule_, n, data_dim_, [&](const Tensor& x, std::size_t t) { return predict_noise(x, c, t); }, rng, lo, hi);
    return data_stats_.unstandardize(z);
}

LdpPlanner train_ldp(const Tensor& latents, const Tensor& actions, const std::vector<std::size_t>& episode_starts,
                     const DiffusionConfig& cfg, double action_low, double action_high, LdpTrainReport* report) {
    cfg.validate();
    const std::size_t dz = latents.cols(), da = actions.cols(), h = cfg.horizon, n = latents.rows();
    if (actions.rows() != n) throw DimensionError("train_ldp: latents and actions differ in length");
    std::vector<Real> traj, traj_cond, act, act_cond;
    for (std::size_t e = 0; e < episode_starts.size(); ++e) {
        const std::size_t begin = episode_starts[e];
        const std::size_t end = e + 1 < episode_starts.size() ? episode_starts[e + 1] : n;
        if (end <= begin) continue;
        const auto goal = latents.row(end - 1);
        for (std::size_t k = begin; k + h < end; ++k) {
            for (std::size_t j = 1; j <= h; ++j) traj.insert(traj.end(), latents.row(k + j).begin(), latents.row(k + j).end());
            traj_cond.insert(traj_cond.end(), latents.row(k).begin(), latents.row(k).end());
            traj_cond.insert(traj_cond.end(), goal.begin(), goal.end());
        }
        for (std::size_t k = begin; k + 1 < end; ++k) {
            act.insert(act.end(), actions.row(k).begin(), actions.row(k).end());
            act_cond.insert(act_cond.end(), latents.row(k).begin(), latents.row(k).end());
            act_cond.insert(act_cond.end(), latents.row(k + 1).begin(), latents.row(k + 1).end());
        }
    }
    if (traj.empty()) throw DomainError("train_ldp: episodes are shorter than the planning horizon");
    const std::size_t nt = traj.size() / (h * dz), na = act.size() / da;

    LdpPlanner planner;
    planner.horizon = h;
    planner.execute = cfg.execute;
    planner.latent_dim = dz;
    planner.action_dim = da;
    planner.denoiser = ConditionalDdpm(h * dz, 2 * dz, cfg, derive_seed(cfg.seed, 1));
    planner.idm = ConditionalDdpm(da, 2 * dz, cfg, derive_seed(cfg.seed, 2));
    DiffusionConfig c1 = cfg, c2 = cfg;
    c1.seed = derive_seed(cfg.seed, 3);
    c2.seed = derive_seed(cfg.seed, 4);
    const double l1 = planner.denoiser.fit(Tensor({nt, h * dz}, traj), Tensor({nt, 2 * dz}, traj_cond), c1);
    const double l2 = planner.idm.fit(Tensor({na, da}, act), Tensor({na, 2 * dz}, act_cond), c2);
    planner.idm.set_clip(std::vector<double>(da, action_low), std::vector<double>(da, action_high));
    if (report) *report = {l1, l2};
    return planner;
}

LdpPlan plan_ldp(const LdpPlanner& planner, std::span<const Real> z_t, std::span<const Real> z_goal, Rng& rng) {
    const std::size_t dz = planner.latent_dim, h = planner.horizon, da = planner.action_dim;
    if (z_t.size() != dz || z_goal.size() != dz) throw DimensionError("plan_ldp: latent dimension mismatch");
    Tensor cond = Tensor::matrix(1, 2 * dz);
    std::copy(z_t.begin(), z_t.end(), cond.row(0).begin());
    std::copy(z_goal.begin(), z_goal.end(), cond.row(0).begin() + std::ptrdiff_t(dz));
    LdpPlan plan;
    plan.execute = planner.execute;
    plan.latents = planner.denoiser.sample(cond, 1, rng).reshaped({h, dz});
    if (!plan.latents.all_finite()) throw PlannerError("plan_ldp: non-finite latent trajectory");
    Tensor pairs = Tensor::matrix(h, 2 * dz);
    for (std::size_t k = 0; k < h; ++k) {
        const auto prev = k == 0 ? z_t : std::span<const Real>(plan.latents.row(k - 1));
        std::copy(prev.begin(), prev.end(), pairs.row(k).begin());
        std::copy_n(plan.latents.row(k).data(), dz, pairs.row(k).data() + dz);
    }
    plan.actions = planner.idm.sample(pairs, h, rng);
    if (plan.actions.cols() != da || !plan.actions.all_finite()) throw PlannerError("plan_ldp: non-finite actions");
    return plan;
}

void LdpController::reset(std::span<const Real> z_start, std::array<Real, 2> goal, Rng& rng) {
    goal_latent_ = observer_.encode_goal(z_start, goal, rng);
    queue_.clear();
}

ControlStep LdpController::act(std::span<const Real> z_true, Rng& rng) {
    const auto z = observer_.encode(z_true, rng);
    ControlStep step;
    step.cost = std::numeric_limits<double>::quiet_NaN();
    if (queue_.empty()) {
        const auto plan = plan_ldp(planner_, z, goal_latent_, rng);
        for (std::size_t k = 0; k < plan.execute; ++k) queue_.emplace_back(plan.actions.row(k).begin(), plan.actions.row(k).end());
        step.cost = plan_cost(plan.latents.row(plan.latents.rows() - 1), goal_latent_);
    }
    step.action = queue_.front();
    queue_.erase(queue_.begin());
    return step;
}

}  // namespace tcwm
