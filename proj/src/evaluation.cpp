#include "tcwm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tcwm/errors.hpp"

namespace tcwm {

Eigen::MatrixXd to_eigen(const Tensor& t) {
    Eigen::MatrixXd m(t.rows(), t.cols());
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) m(Eigen::Index(r), Eigen::Index(c)) = t(r, c);
    return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
    Tensor t = Tensor::matrix(std::size_t(m.rows()), std::size_t(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) t(std::size_t(r), std::size_t(c)) = Real(m(r, c));
    return t;
}

std::string to_string(LatentBlock b) {
    switch (b) {
        case LatentBlock::task: return "z_s";
        case LatentBlock::complement: return "z_c";
        case LatentBlock::full: return "full_z";
        case LatentBlock::raw_embedding: return "raw_embedding";
    }
    return "?";
}

namespace {

struct RidgeFit {
    Eigen::MatrixXd w;
    Eigen::RowVectorXd x_mean;
    Eigen::RowVectorXd y_mean;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const {
        return ((x.rowwise() - x_mean) * w).rowwise() + y_mean;
    }
};

RidgeFit ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double alpha) {
    RidgeFit f;
    f.x_mean = x.colwise().mean();
    f.y_mean = y.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - f.x_mean;
    const Eigen::MatrixXd yc = y.rowwise() - f.y_mean;
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += alpha;
    f.w = gram.ldlt().solve(xc.transpose() * yc);
    return f;
}

// Per-dim R^2; NaN where the target has no variance.
std::vector<double> r2_per_dim(const Eigen::MatrixXd& y, const Eigen::MatrixXd& pred) {
    std::vector<double> out(std::size_t(y.cols()));
    const Eigen::RowVectorXd mean = y.colwise().mean();
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        const double ss_tot = (y.col(c).array() - mean(c)).square().sum();
        const double ss_res = (y.col(c) - pred.col(c)).squaredNorm();
        out[std::size_t(c)] = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::nan("");
    }
    return out;
}

double mean_defined(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    return n ? s / double(n) : 0.0;
}

double percentile(std::vector<double> sorted, double q) {
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * double(sorted.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b, bool& defined) {
    const double n = double(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        defined = false;
        return std::nan("");
    }
    return sab / std::sqrt(saa * sbb);
}

// Ranks starting at 1, ties get their average rank.
std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

Tensor columns(const Tensor& t, std::size_t first, std::size_t count) {
    Tensor out = Tensor::matrix(t.rows(), count);
    for (std::size_t r = 0; r < t.rows(); ++r) std::copy_n(t.row(r).data() + first, count, out.row(r).data());
    return out;
}

}  // namespace

ProbeResult linear_probe(const Tensor& latents, const Tensor& targets, std::size_t folds, double alpha,
                         LatentBlock block) {
    const std::size_t n = latents.rows();
    if (targets.rows() != n) throw DimensionError("linear_probe: latents and targets differ in length");
    if (folds < 2) throw DomainError("linear_probe: need at least 2 folds");
    if (n < 2 * folds) throw DomainError("linear_probe: need at least 2 samples per fold");
    if (!(alpha > 0.0)) throw DomainError("linear_probe: ridge alpha must be > 0");
    const Eigen::MatrixXd x = to_eigen(latents), y = to_eigen(targets);
    ProbeResult res;
    res.block = block;
    res.r2_per_dim.assign(targets.cols(), 0.0);
    std::vector<std::size_t> per_dim_count(targets.cols(), 0);
    std::vector<double> fold_r2;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t lo = f * n / folds, hi = (f + 1) * n / folds;
        const Eigen::Index test_n = Eigen::Index(hi - lo), train_n = Eigen::Index(n - (hi - lo));
        Eigen::MatrixXd xtr(train_n, x.cols()), ytr(train_n, y.cols());
        xtr << x.topRows(Eigen::Index(lo)), x.bottomRows(Eigen::Index(n - hi));
        ytr << y.topRows(Eigen::Index(lo)), y.bottomRows(Eigen::Index(n - hi));
        const auto fit = ridge(xtr, ytr, alpha);
        const auto dims = r2_per_dim(y.middleRows(Eigen::Index(lo), test_n), fit.predict(x.middleRows(Eigen::Index(lo), test_n)));
        for (std::size_t d = 0; d < dims.size(); ++d)
            if (std::isfinite(dims[d])) {
                res.r2_per_dim[d] += dims[d];
                ++per_dim_count[d];
            }
        fold_r2.push_back(mean_defined(dims));
    }
    for (std::size_t d = 0; d < res.r2_per_dim.size(); ++d)
        res.r2_per_dim[d] = per_dim_count[d] ? res.r2_per_dim[d] / double(per_dim_count[d]) : 0.0;
    res.r2_mean = std::accumulate(fold_r2.begin(), fold_r2.end(), 0.0) / double(folds);
    double var = 0.0;
    for (double r : fold_r2) var += (r - res.r2_mean) * (r - res.r2_mean);
    res.r2_std = std::sqrt(var / double(folds));
    return res;
}

double probe_transfer_r2(const Tensor& train_x, const Tensor& train_y, const Tensor& test_x, const Tensor& test_y,
                         double alpha) {
    if (!(alpha > 0.0)) throw DomainError("probe: ridge alpha must be > 0");
    const auto fit = ridge(to_eigen(train_x), to_eigen(train_y), alpha);
    return mean_defined(r2_per_dim(to_eigen(test_y), fit.predict(to_eigen(test_x))));
}

A1Report check_a1(const LatentDecoder& decode, const Tensor& latents, std::size_t n_pairs, double delta,
                  std::uint64_t seed) {
    if (latents.rows() == 0 || n_pairs == 0) throw DomainError("check_a1: no latents");
    if (!(delta > 0.0)) throw DomainError("check_a1: delta must be > 0");
    const std::size_t d = latents.cols();
    Rng rng(seed);
    Tensor base = Tensor::matrix(n_pairs, d), moved = Tensor::matrix(n_pairs, d);
    std::vector<double> dz_norm(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        for (;;) {
            const std::size_t src = rng.index(latents.rows());
            std::vector<double> dir(d);
            double norm = 0.0;
            for (auto& v : dir) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            if (norm == 0.0) continue;
            double actual = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                base(i, j) = latents(src, j);
                moved(i, j) = Real(latents(src, j) + delta * dir[j] / norm);
                const double step = double(moved(i, j)) - double(base(i, j));
                actual += step * step;
            }
            if (actual > 0.0) {  // otherwise the step vanished in rounding; resample
                dz_norm[i] = std::sqrt(actual);
                break;
            }
        }
    }
    const Tensor xa = decode(base), xb = decode(moved);
    std::vector<double> ratios(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < xa.cols(); ++j) {
            const double v = double(xb(i, j)) - double(xa(i, j));
            s += v * v;
        }
        ratios[i] = std::sqrt(s) / dz_norm[i];
    }
    A1Report r;
    r.pairs = n_pairs;
    r.p5 = percentile(ratios, 0.05);
    r.p50 = percentile(ratios, 0.50);
    r.p95 = percentile(ratios, 0.95);
    r.pass = r.p5 > 0.0 && r.p5 >= 0.01 * r.p50 && r.p95 / r.p5 <= 100.0;
    return r;
}

A1Report check_a1(const TcwmModel& model, const Tensor& latents, std::size_t n_pairs, double delta,
                  std::uint64_t seed) {
    return check_a1([&](const Tensor& z) { return model.decode_embedding(z); }, latents, n_pairs, delta, seed);
}

A2Report check_a2(const Tensor& latents, const Tensor& embeddings, std::size_t n_pairs, std::uint64_t seed) {
    const std::size_t n = latents.rows();
    if (embeddings.rows() != n) throw DimensionError("check_a2: latents and embeddings differ in length");
    if (n < 2) throw DomainError("check_a2: need at least two samples");
    Rng rng(seed);
    std::vector<double> dz(n_pairs), dx(n_pairs);
    auto dist = [](std::span<const Real> a, std::span<const Real> b) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double v = double(a[k]) - double(b[k]);
            s += v * v;
        }
        return std::sqrt(s);
    };
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t i = rng.index(n);
        std::size_t j = rng.index(n - 1);
        if (j >= i) ++j;
        dz[p] = dist(latents.row(i), latents.row(j));
        dx[p] = dist(embeddings.row(i), embeddings.row(j));
    }
    A2Report r;
    r.pairs = n_pairs;
    r.pearson = pearson(dz, dx, r.defined);
    r.spearman = pearson(average_ranks(dz), average_ranks(dx), r.defined);
    const double mz = percentile(dz, 0.5), mx = percentile(dx, 0.5);
    for (std::size_t p = 0; p < n_pairs; ++p)
        if (dx[p] <= 1e-3 * mx && dz[p] >= 1e-3 * mz && dz[p] > 0.0) ++r.near_zero_embedding;
    return r;
}

A4Report check_a4(const Tensor& latents, std::size_t d_s, const Tensor& proprio, std::size_t folds, double alpha) {
    const std::size_t dz = latents.cols();
    if (d_s == 0 || d_s > dz) throw DimensionError("check_a4: need 1 <= d_s <= d_z");
    A4Report r;
    r.task = linear_probe(columns(latents, 0, d_s), proprio, folds, alpha, LatentBlock::task);
    r.efficiency_task = r.task.r2_mean / double(d_s);
    if (d_s < dz) {
        r.complement = linear_probe(columns(latents, d_s, dz - d_s), proprio, folds, alpha, LatentBlock::complement);
        r.efficiency_complement = r.complement.r2_mean / double(dz - d_s);
        r.efficiency_ratio = r.efficiency_task / r.efficiency_complement;
    } else {
        r.complement.block = LatentBlock::complement;
        r.efficiency_complement = std::nan("");
        r.efficiency_ratio = std::nan("");
    }
    return r;
}

AffineFit affine_recovery(const Tensor& z_est, const Tensor& z_true) {
    const std::size_t n = z_est.rows(), d = z_est.cols(), k = z_true.cols();
    if (z_true.rows() != n) throw DimensionError("affine_recovery: row counts differ");
    if (n <= d + 1) throw DomainError("affine_recovery: need more samples than parameters");
    const Eigen::MatrixXd x = to_eigen(z_est), y = to_eigen(z_true);
    Eigen::MatrixXd design(Eigen::Index(n), Eigen::Index(d + 1));
    design << x, Eigen::VectorXd::Ones(Eigen::Index(n));
    AffineFit fit;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    Eigen::MatrixXd pred;
    if (qr.rank() == Eigen::Index(d + 1)) {
        const Eigen::MatrixXd coef = qr.solve(y);  // [(d+1) x k]
        fit.a = coef.topRows(Eigen::Index(d)).transpose();
        fit.b = coef.row(Eigen::Index(d)).transpose();
    } else {
        fit.ridge_fallback = true;
        const auto r = ridge(x, y, 1e-6);
        fit.a = r.w.transpose();
        fit.b = (r.y_mean - r.x_mean * r.w).transpose();
    }
    pred = (x * fit.a.transpose()).rowwise() + fit.b.transpose();
    (void)k;
    fit.r2 = mean_defined(r2_per_dim(y, pred));
    return fit;
}

std::vector<double> latent_variances(const Tensor& latents) {
    const Eigen::MatrixXd x = to_eigen(latents);
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    std::vector<double> v(std::size_t(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) v[std::size_t(j)] = c.col(j).squaredNorm() / double(x.rows());
    return v;
}

double effective_rank(const Tensor& latents) {
    const std::size_t n = latents.rows(), d = latents.cols();
    if (n <= d) throw DomainError("effective_rank: need more samples than dimensions");
    const Eigen::MatrixXd x = to_eigen(latents);
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / double(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const double total = ev.sum();
    if (!(total > 0.0)) return 1.0;
    double h = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const double p = ev(i) / total;
        if (p > 0.0) h -= p * std::log(p);
    }
    return std::exp(h);
}

std::vector<double> rollout_mse(const TcwmModel& model, const TrajectoryBatch& data, const StandardizationStats& stats,
                                std::size_t horizon, std::size_t first_episode, std::size_t episode_count) {
    if (horizon == 0) return {};
    const ModelConfig& cfg = model.config();
    const std::size_t h = cfg.history, dz = model.latent_dim(), da = cfg.d_a, stride = dz + da;
    const Tensor z = model.encode(model.embed_joint(data.embeddings, stats.standardize(data.proprio)));

    std::vector<std::size_t> starts;  // t0: last observed step
    for (std::size_t e = first_episode; e < first_episode + episode_count && e < data.episodes(); ++e) {
        const std::size_t begin = data.episode_begin(e), end = data.episode_end(e);
        for (std::size_t t = begin + h; t + horizon < end; ++t) starts.push_back(t);
    }
    if (starts.empty()) throw DomainError("rollout_mse: horizon too long for the episodes");

    // Normaliser: mean per-dim variance of the latents over the same episodes.
    const std::size_t row0 = data.episode_begin(first_episode);
    const std::size_t row1 = data.episode_end(std::min(first_episode + episode_count, data.episodes()) - 1);
    const auto vars = latent_variances(z.slice_rows(row0, row1 - row0));
    const double norm = std::max(std::accumulate(vars.begin(), vars.end(), 0.0) / double(dz), 1e-12);

    const std::size_t s = starts.size();
    Tensor windows = Tensor::matrix(s, (h + 1) * stride);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t k = 0; k <= h; ++k) {
            const std::size_t src = starts[i] - h + k;
            std::copy_n(z.row(src).data(), dz, windows.row(i).data() + k * stride);
            std::copy_n(data.actions.row(src).data(), da, windows.row(i).data() + k * stride + dz);
        }
    std::vector<double> curve(horizon, 0.0);
    for (std::size_t step = 0; step < horizon; ++step) {
        const Tensor next = model.predict_next_packed(windows);
        double se = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            const auto truth = z.row(starts[i] + step + 1);
            for (std::size_t j = 0; j < dz; ++j) {
                const double v = double(next(i, j)) - double(truth[j]);
                se += v * v;
            }
        }
        curve[step] = se / double(s * dz) / norm;
        if (step + 1 == horizon) break;
        for (std::size_t i = 0; i < s; ++i) {
            Real* w = windows.row(i).data();
            std::copy(w + stride, w + (h + 1) * stride, w);
            std::copy_n(next.row(i).data(), dz, w + h * stride);
            std::copy_n(data.actions.row(starts[i] + step + 1).data(), da, w + h * stride + dz);
        }
    }
    return curve;
}

double ssim(std::span<const Real> a, std::span<const Real> b, std::size_t width) {
    constexpr std::size_t kWin = 8;
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    if (a.size() != b.size()) throw DimensionError("ssim: images differ in size");
    if (width == 0 || a.size() % width != 0) throw DimensionError("ssim: size is not a multiple of the width");
    const std::size_t height = a.size() / width;
    if (height < kWin || width < kWin) throw DimensionError("ssim: image smaller than the 8x8 window");
    const double n = double(kWin * kWin);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t y0 = 0; y0 + kWin <= height; ++y0)
        for (std::size_t x0 = 0; x0 + kWin <= width; ++x0) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t y = y0; y < y0 + kWin; ++y)
                for (std::size_t x = x0; x < x0 + kWin; ++x) {
                    const double va = a[y * width + x], vb = b[y * width + x];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            const double ma = sa / n, mb = sb / n;
            // Sample (n - 1) covariance, as in the common reference implementation.
            const double va = (saa - n * ma * ma) / (n - 1), vb = (sbb - n * mb * mb) / (n - 1);
            const double cov = (sab - n * ma * mb) / (n - 1);
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++windows;
        }
    return total / double(windows);
}

std::string to_string(PerturbKind k) { return k == PerturbKind::gauss_noise ? "gauss-noise" : "channel-jitter"; }

PerturbKind parse_perturb_kind(const std::string& s) {
    if (s == "gauss-noise") return PerturbKind::gauss_noise;
    if (s == "channel-jitter") return PerturbKind::channel_jitter;
    throw ValidationError("unknown perturbation '" + s + "'");
}

TrajectoryBatch perturb(const TrajectoryBatch& data, const PerturbOptions& opt) {
    TrajectoryBatch out = data;
    const std::size_t dx = out.embeddings.cols();
    for (std::size_t r = 0; r < out.steps(); ++r) {
        Rng rng(derive_seed(opt.seed, 0x7074, r));
        auto x = out.embeddings.row(r);
        if (opt.kind == PerturbKind::gauss_noise) {
            for (std::size_t j = 0; j < dx; ++j) x[j] = Real(x[j] + opt.sigma * rng.normal());
            if (out.has_renders())
                for (auto& p : out.renders.row(r)) p = Real(std::clamp(p + opt.sigma * rng.normal(), 0.0, 1.0));
        } else {
            for (std::size_t j = 0; j < dx; ++j) {
                const double scale = rng.uniform(opt.scale_low, opt.scale_high);
                const double shift = opt.shift_std * rng.normal();
                x[j] = Real(x[j] * scale + shift);
            }
            if (out.has_renders()) {
                const double scale = rng.uniform(opt.scale_low, opt.scale_high);
                const double shift = opt.shift_std * rng.normal();
                for (auto& p : out.renders.row(r)) p = Real(std::clamp(p * scale + shift, 0.0, 1.0));
            }
        }
    }
    return out;
}

}  // namespace tcwm
