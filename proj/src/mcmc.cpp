#include "crmort/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "crmort/csv.hpp"
#include "crmort/error.hpp"
#include "crmort/likelihood.hpp"

namespace crmort {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Target band around 25% acceptance during burn-in.
constexpr double kAcceptHigh = 0.35;
constexpr double kAcceptLow = 0.15;
constexpr double kGrow = 1.1;
constexpr double kShrink = 0.9;
// Random-walk scale giving ~25% acceptance on a Gaussian conditional: (2/pi) atan(2/s) = 1/4.
constexpr double kScaleForQuarterAcceptance = 4.83;

const char* prior_name(SigmaPrior p) { return p == SigmaPrior::uniform_sd ? "uniform_sd" : "uniform_variance"; }

} // namespace

void SamplerConfig::validate(std::size_t n_coordinates) const {
    if (n_steps == 0) throw ConfigError("sampler needs n_steps >= 1");
    if (burn_in >= n_steps) throw ConfigError("burn_in must be smaller than n_steps");
    if (adapt_window == 0) throw ConfigError("adapt_window must be >= 1");
    if (thin == 0) throw ConfigError("thin must be >= 1");
    if (!(sigma2_max > 0.0)) throw ConfigError("sigma2_max must be > 0");
    if (!proposal_sd.empty()) {
        if (proposal_sd.size() != n_coordinates) {
            throw ConfigError("proposal_sd needs one entry per free parameter (" + std::to_string(n_coordinates) + ")");
        }
        for (double sd : proposal_sd) {
            if (!(sd > 0.0) || !std::isfinite(sd)) throw ConfigError("proposal_sd entries must be finite and > 0");
        }
    }
}

void to_json(nlohmann::json& j, const SamplerConfig& cfg) {
    j = nlohmann::json{{"n_steps", cfg.n_steps},
                       {"burn_in", cfg.burn_in},
                       {"adapt_window", cfg.adapt_window},
                       {"thin", cfg.thin},
                       {"seed", cfg.seed},
                       {"proposal_sd", cfg.proposal_sd},
                       {"sigma2_max", cfg.sigma2_max},
                       {"sigma_prior", prior_name(cfg.sigma_prior)},
                       {"blocks",
                        {{"alpha", cfg.blocks.alpha},
                         {"beta", cfg.blocks.beta},
                         {"u", cfg.blocks.u},
                         {"v", cfg.blocks.v},
                         {"sigma2", cfg.blocks.sigma2}}},
                       {"level_moves", cfg.level_moves}};
}

void from_json(const nlohmann::json& j, SamplerConfig& cfg) {
    cfg = SamplerConfig{};
    cfg.n_steps = j.value("n_steps", cfg.n_steps);
    cfg.burn_in = j.value("burn_in", cfg.burn_in);
    cfg.adapt_window = j.value("adapt_window", cfg.adapt_window);
    cfg.thin = j.value("thin", cfg.thin);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.proposal_sd = j.value("proposal_sd", cfg.proposal_sd);
    cfg.sigma2_max = j.value("sigma2_max", cfg.sigma2_max);
    const std::string prior = j.value("sigma_prior", std::string("uniform_sd"));
    if (prior == "uniform_sd") {
        cfg.sigma_prior = SigmaPrior::uniform_sd;
    } else if (prior == "uniform_variance") {
        cfg.sigma_prior = SigmaPrior::uniform_variance;
    } else {
        throw ConfigError("sigma_prior must be 'uniform_sd' or 'uniform_variance'");
    }
    if (j.contains("blocks")) {
        const auto& b = j.at("blocks");
        cfg.blocks.alpha = b.value("alpha", true);
        cfg.blocks.beta = b.value("beta", true);
        cfg.blocks.u = b.value("u", true);
        cfg.blocks.v = b.value("v", true);
        cfg.blocks.sigma2 = b.value("sigma2", true);
    }
    cfg.level_moves = j.value("level_moves", cfg.level_moves);
}

// ---------------------------------------------------------------------------------------------
// FreeLayout

FreeLayout::FreeLayout(const ModelDims& dims) : dims_(dims) {
    const std::size_t nc = dims.n_cells();
    for (std::size_t c = 0; c < nc; ++c) {
        coords_.push_back({CoordKind::alpha, c, 0});
        names_.push_back("alpha_" + cell_key(cell_at(dims, c)));
    }
    for (std::size_t c = 0; c < nc; ++c) {
        coords_.push_back({CoordKind::beta, c, 0});
        names_.push_back("beta_" + cell_key(cell_at(dims, c)));
    }
    for (std::size_t c = 0; c < nc; ++c) {
        for (int k = 1; k <= dims.causes; ++k) {
            coords_.push_back({CoordKind::u, c, k});
            names_.push_back("u_" + cell_key(cell_at(dims, c)) + "_k" + std::to_string(k));
        }
    }
    for (std::size_t c = 0; c < nc; ++c) {
        for (int k = 1; k <= dims.causes; ++k) {
            coords_.push_back({CoordKind::v, c, k});
            names_.push_back("v_" + cell_key(cell_at(dims, c)) + "_k" + std::to_string(k));
        }
    }
    for (int k = 1; k <= dims.causes; ++k) {
        coords_.push_back({CoordKind::sigma2, 0, k});
        names_.push_back("sigma2_k" + std::to_string(k));
    }
}

double FreeLayout::get(const ModelParams& p, std::size_t i) const {
    const Coordinate& c = coords_[i];
    switch (c.kind) {
    case CoordKind::alpha: return p.death_prob[c.cell].alpha;
    case CoordKind::beta: return p.death_prob[c.cell].beta;
    case CoordKind::u: return p.u(c.cell, c.cause);
    case CoordKind::v: return p.v(c.cell, c.cause);
    case CoordKind::sigma2: return p.sigma2(c.cause);
    }
    return 0.0;
}

void FreeLayout::set(ModelParams& p, std::size_t i, double value) const {
    const Coordinate& c = coords_[i];
    switch (c.kind) {
    case CoordKind::alpha: p.death_prob[c.cell].alpha = value; break;
    case CoordKind::beta: p.death_prob[c.cell].beta = value; break;
    case CoordKind::u: p.u(c.cell, c.cause) = value; break;
    case CoordKind::v: p.v(c.cell, c.cause) = value; break;
    case CoordKind::sigma2: p.sigma2(c.cause) = value; break;
    }
}

std::vector<double> FreeLayout::extract(const ModelParams& p) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = get(p, i);
    return out;
}

void FreeLayout::apply(ModelParams& p, std::span<const double> values) const {
    for (std::size_t i = 0; i < size(); ++i) set(p, i, values[i]);
}

bool FreeLayout::selected(std::size_t i, const BlockSelection& blocks) const {
    switch (coords_[i].kind) {
    case CoordKind::alpha: return blocks.alpha;
    case CoordKind::beta: return blocks.beta;
    case CoordKind::u: return blocks.u;
    case CoordKind::v: return blocks.v;
    case CoordKind::sigma2: return blocks.sigma2;
    }
    return false;
}

std::size_t FreeLayout::sigma2_index(CauseId k) const {
    return size() - static_cast<std::size_t>(dims_.causes) + static_cast<std::size_t>(k - 1);
}

// ---------------------------------------------------------------------------------------------
// PosteriorState

PosteriorState::PosteriorState(const MortalityDataset& data, ModelParams params, const SamplerConfig& cfg)
    : data_(&data),
      params_(std::move(params)),
      layout_(data.dims()),
      sigma_prior_(cfg.sigma_prior),
      sigma2_max_(cfg.sigma2_max) {
    if (!(params_.dims == data.dims())) throw ConfigError("parameter and dataset dimensions differ");
    params_.validate();
    const ModelDims& dims = data.dims();
    nc_ = dims.n_cells();
    nk_ = dims.n_causes_total();
    T_ = static_cast<std::size_t>(data.years());

    m_.resize(nc_ * T_);
    logm_.resize(nc_ * T_);
    ncell_.resize(nc_ * T_);
    n_.resize(nc_ * nk_ * T_);
    ntot_.assign(nk_ * T_, 0.0);
    trend_cell_.resize(nc_ * T_);
    trend_cause_.resize(nk_ * T_);
    const_ = 0.0;
    for (std::size_t c = 0; c < nc_; ++c) {
        for (std::size_t t = 0; t < T_; ++t) {
            const int tt = static_cast<int>(t) + 1;
            m_[c * T_ + t] = static_cast<double>(data.population(c, tt));
            logm_[c * T_ + t] = m_[c * T_ + t] > 0.0 ? std::log(m_[c * T_ + t]) : 0.0;
            ncell_[c * T_ + t] = static_cast<double>(data.total_deaths(c, tt));
            trend_cell_[c * T_ + t] = trend_reduction(params_.death_prob[c].trend, tt);
            for (std::size_t k = 0; k < nk_; ++k) {
                const std::int64_t n = data.deaths(c, static_cast<int>(k), tt);
                n_[(c * nk_ + k) * T_ + t] = static_cast<double>(n);
                ntot_[k * T_ + t] += static_cast<double>(n);
                const_ -= std::lgamma(static_cast<double>(n) + 1.0);
            }
        }
    }
    for (std::size_t k = 0; k < nk_; ++k) {
        for (std::size_t t = 0; t < T_; ++t) {
            trend_cause_[k * T_ + t] = trend_reduction(params_.weights.cause_trend[k], static_cast<double>(t + 1));
        }
    }
    // the intercept only follows when its own block is being sampled too
    centre_cell_.assign(nc_, 0.0);
    centre_cause_.assign(nk_, 0.0);
    const double inv_T = 1.0 / static_cast<double>(T_);
    if (cfg.blocks.alpha) {
        for (std::size_t c = 0; c < nc_; ++c) {
            for (std::size_t t = 0; t < T_; ++t) centre_cell_[c] += trend_cell_[c * T_ + t] * inv_T;
        }
    }
    if (cfg.blocks.u) {
        for (std::size_t k = 0; k < nk_; ++k) {
            for (std::size_t t = 0; t < T_; ++t) centre_cause_[k] += trend_cause_[k * T_ + t] * inv_T;
        }
    }
    new_lnq_.resize(2 * T_);
    new_logw_.resize(2 * nk_ * T_);
    new_rho_cell_.resize(nk_ * T_);
    new_shape_.resize(static_cast<std::size_t>(dims.causes) * T_);
    new_H_.resize(static_cast<std::size_t>(dims.causes) * T_);
    rebuild();
}

double PosteriorState::sigma_log_prior(std::span<const double> sigma2) const {
    double lp = 0.0;
    for (double s2 : sigma2) {
        if (!(s2 > 0.0) || !(s2 < sigma2_max_)) return -kInf;
        // flat in sigma: density of sigma2 is proportional to sigma2^(-1/2)
        if (sigma_prior_ == SigmaPrior::uniform_sd) lp -= 0.5 * std::log(s2);
    }
    return lp;
}

namespace {

// lnq for all years of one cell; q is written to the second half of `out`.
void cell_lnq(const DeathProbParams& dp, const double* trend, std::size_t T, double* out) {
    for (std::size_t t = 0; t < T; ++t) {
        out[t] = log_laplace_cdf(dp.alpha + dp.beta * trend[t]);
        out[T + t] = std::exp(out[t]);
    }
}

// log-weights for all years of one cell; layout [k*T + t], weights in the second half.
void cell_logw(const double* u, const double* v, const double* trend_cause, std::size_t nk, std::size_t T,
               double* out) {
    double* w = out + nk * T;
    for (std::size_t t = 0; t < T; ++t) {
        double top = -kInf;
        for (std::size_t k = 0; k < nk; ++k) {
            const double s = u[k] + v[k] * trend_cause[k * T + t];
            out[k * T + t] = s;
            top = std::max(top, s);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < nk; ++k) {
            w[k * T + t] = std::exp(out[k * T + t] - top);
            total += w[k * T + t];
        }
        const double lse = top + std::log(total);
        for (std::size_t k = 0; k < nk; ++k) {
            out[k * T + t] -= lse;
            w[k * T + t] /= total;
        }
    }
}

} // namespace

void PosteriorState::cell_terms(std::size_t c, const double* lnq, const double* logw, double* rho_out,
                                double& part) const {
    const double* q = lnq + T_;
    const double* w = logw + nk_ * T_;
    part = 0.0;
    for (std::size_t t = 0; t < T_; ++t) {
        const double m = m_[c * T_ + t];
        if (m <= 0.0) {
            for (std::size_t k = 0; k < nk_; ++k) rho_out[k * T_ + t] = 0.0;
            continue;
        }
        const double mq = m * q[t];
        double term = ncell_[c * T_ + t] * (logm_[c * T_ + t] + lnq[t]);
        for (std::size_t k = 0; k < nk_; ++k) {
            rho_out[k * T_ + t] = mq * w[k * T_ + t];
            term += n_[(c * nk_ + k) * T_ + t] * logw[k * T_ + t];
        }
        part += term - rho_out[t]; // rho_out[0*T + t] is the idiosyncratic intensity
    }
}

void PosteriorState::rebuild() {
    const ModelDims& dims = data_->dims();
    const std::size_t K = static_cast<std::size_t>(dims.causes);
    lnq_.resize(nc_ * 2 * T_);
    logw_.resize(nc_ * 2 * nk_ * T_);
    rho_.assign(nk_ * T_ * nc_, 0.0);
    cellpart_.resize(nc_);
    std::vector<double> rho_cell(nk_ * T_);
    for (std::size_t c = 0; c < nc_; ++c) {
        cell_lnq(params_.death_prob[c], &trend_cell_[c * T_], T_, &lnq_[c * 2 * T_]);
        cell_logw(&params_.weights.u[c * nk_], &params_.weights.v[c * nk_], trend_cause_.data(), nk_, T_,
                  &logw_[c * 2 * nk_ * T_]);
        cell_terms(c, &lnq_[c * 2 * T_], &logw_[c * 2 * nk_ * T_], rho_cell.data(), cellpart_[c]);
        for (std::size_t k = 0; k < nk_; ++k) {
            for (std::size_t t = 0; t < T_; ++t) rho_[(k * T_ + t) * nc_ + c] = rho_cell[k * T_ + t];
        }
    }
    shape_.resize(K * T_);
    H_.resize(K * T_);
    for (std::size_t k = 1; k <= K; ++k) {
        const double s2 = params_.sigma2(static_cast<int>(k));
        for (std::size_t t = 0; t < T_; ++t) {
            double rho = 0.0;
            for (std::size_t c = 0; c < nc_; ++c) rho += rho_[(k * T_ + t) * nc_ + c];
            const auto n = static_cast<std::int64_t>(ntot_[k * T_ + t]);
            shape_[(k - 1) * T_ + t] = mixture_shape_part(n, s2);
            H_[(k - 1) * T_ + t] = shape_[(k - 1) * T_ + t] + mixture_rate_part(n, rho, s2);
        }
    }
    loglik_ = const_;
    for (double p : cellpart_) loglik_ += p;
    for (double h : H_) loglik_ += h;
    logprior_ = sigma_log_prior(params_.variances.sigma2);
    if (!std::isfinite(loglik_ + logprior_)) {
        throw SamplerError("log posterior is not finite at the sampler state");
    }
    pending_coord_ = kNone;
}

void PosteriorState::move(ModelParams& p, std::size_t coord, double value) const {
    const Coordinate& co = layout_[coord];
    if (co.kind == CoordKind::beta) {
        p.death_prob[co.cell].alpha -= (value - p.death_prob[co.cell].beta) * centre_cell_[co.cell];
    } else if (co.kind == CoordKind::v) {
        const auto k = static_cast<std::size_t>(co.cause);
        p.u(co.cell, co.cause) -= (value - p.v(co.cell, co.cause)) * centre_cause_[k];
    }
    layout_.set(p, coord, value);
}

ModelParams PosteriorState::level_shift(CauseId k, double delta) const {
    ModelParams p = params_;
    const auto kk = static_cast<std::size_t>(k);
    for (std::size_t c = 0; c < nc_; ++c) {
        double before = 0.0, after = 0.0;
        for (std::size_t j = 0; j < nk_; ++j) {
            const auto kj = static_cast<CauseId>(j);
            const double s = std::exp(p.u(c, kj) + p.v(c, kj) * centre_cause_[j]);
            before += s;
            after += j == kk ? s * std::exp(delta) : s;
        }
        p.u(c, k) += delta;
        p.death_prob[c].alpha += std::log(after / before);
    }
    return p;
}

ModelParams PosteriorState::trend_shift(CauseId k, double delta) const {
    ModelParams p = params_;
    const auto kk = static_cast<std::size_t>(k);
    std::vector<double> w(nk_);
    for (std::size_t c = 0; c < nc_; ++c) {
        double total = 0.0;
        for (std::size_t j = 0; j < nk_; ++j) {
            const auto kj = static_cast<CauseId>(j);
            w[j] = std::exp(p.u(c, kj) + p.v(c, kj) * centre_cause_[j]);
            total += w[j];
        }
        const double wk = w[kk] / total;
        p.v(c, k) += delta;
        p.u(c, k) -= delta * centre_cause_[kk];
        p.death_prob[c].beta += wk * delta;
        p.death_prob[c].alpha -= wk * delta * centre_cell_[c];
    }
    return p;
}

void PosteriorState::reset(ModelParams params) {
    params_ = std::move(params);
    rebuild();
}

double PosteriorState::propose(std::size_t coord, double value) {
    const Coordinate& co = layout_[coord];
    const std::size_t K = nk_ - 1;
    pending_coord_ = coord;
    pending_value_ = value;
    new_logprior_ = logprior_;

    double total = const_;
    if (co.kind == CoordKind::sigma2) {
        const std::size_t k = static_cast<std::size_t>(co.cause);
        std::vector<double> s2 = params_.variances.sigma2;
        s2[k - 1] = value;
        new_logprior_ = sigma_log_prior(s2);
        if (new_logprior_ == -kInf) {
            new_loglik_ = -kInf;
            return -kInf;
        }
        for (std::size_t t = 0; t < T_; ++t) {
            double rho = 0.0;
            for (std::size_t c = 0; c < nc_; ++c) rho += rho_[(k * T_ + t) * nc_ + c];
            const auto n = static_cast<std::int64_t>(ntot_[k * T_ + t]);
            new_shape_[t] = mixture_shape_part(n, value);
            new_H_[t] = new_shape_[t] + mixture_rate_part(n, rho, value);
        }
        for (double p : cellpart_) total += p;
        for (std::size_t kk = 1; kk <= K; ++kk) {
            const double* h = kk == k ? new_H_.data() : &H_[(kk - 1) * T_];
            for (std::size_t t = 0; t < T_; ++t) total += h[t];
        }
    } else {
        const std::size_t c = co.cell;
        const double* lnq = &lnq_[c * 2 * T_];
        const double* logw = &logw_[c * 2 * nk_ * T_];
        if (co.kind == CoordKind::alpha || co.kind == CoordKind::beta) {
            DeathProbParams dp = params_.death_prob[c];
            if (co.kind == CoordKind::alpha) {
                dp.alpha = value;
            } else {
                dp.alpha -= (value - dp.beta) * centre_cell_[c];
                dp.beta = value;
            }
            pending_partner_ = dp.alpha;
            cell_lnq(dp, &trend_cell_[c * T_], T_, new_lnq_.data());
            lnq = new_lnq_.data();
        } else {
            const auto k = static_cast<std::size_t>(co.cause);
            std::vector<double> u(params_.weights.u.begin() + static_cast<std::ptrdiff_t>(c * nk_),
                                  params_.weights.u.begin() + static_cast<std::ptrdiff_t>((c + 1) * nk_));
            std::vector<double> v(params_.weights.v.begin() + static_cast<std::ptrdiff_t>(c * nk_),
                                  params_.weights.v.begin() + static_cast<std::ptrdiff_t>((c + 1) * nk_));
            if (co.kind == CoordKind::u) {
                u[k] = value;
            } else {
                u[k] -= (value - v[k]) * centre_cause_[k];
                v[k] = value;
            }
            pending_partner_ = u[k];
            cell_logw(u.data(), v.data(), trend_cause_.data(), nk_, T_, new_logw_.data());
            logw = new_logw_.data();
        }
        cell_terms(c, lnq, logw, new_rho_cell_.data(), new_cellpart_);
        for (std::size_t k = 1; k <= K; ++k) {
            const double s2 = params_.sigma2(static_cast<int>(k));
            for (std::size_t t = 0; t < T_; ++t) {
                const double* row = &rho_[(k * T_ + t) * nc_];
                double rho = 0.0;
                for (std::size_t cc = 0; cc < nc_; ++cc) rho += cc == c ? new_rho_cell_[k * T_ + t] : row[cc];
                const auto n = static_cast<std::int64_t>(ntot_[k * T_ + t]);
                new_H_[(k - 1) * T_ + t] = shape_[(k - 1) * T_ + t] + mixture_rate_part(n, rho, s2);
            }
        }
        for (std::size_t cc = 0; cc < nc_; ++cc) total += cc == c ? new_cellpart_ : cellpart_[cc];
        for (std::size_t i = 0; i < K * T_; ++i) total += new_H_[i];
    }
    new_loglik_ = std::isnan(total) ? -kInf : total;
    return new_loglik_ + new_logprior_;
}

void PosteriorState::accept() {
    if (pending_coord_ == kNone) throw SamplerError("accept() without a pending proposal");
    const Coordinate& co = layout_[pending_coord_];
    const std::size_t K = nk_ - 1;
    layout_.set(params_, pending_coord_, pending_value_);
    if (co.kind == CoordKind::beta) params_.death_prob[co.cell].alpha = pending_partner_;
    if (co.kind == CoordKind::v) params_.u(co.cell, co.cause) = pending_partner_;
    if (co.kind == CoordKind::sigma2) {
        const std::size_t k = static_cast<std::size_t>(co.cause);
        std::copy_n(new_shape_.begin(), T_, shape_.begin() + static_cast<std::ptrdiff_t>((k - 1) * T_));
        std::copy_n(new_H_.begin(), T_, H_.begin() + static_cast<std::ptrdiff_t>((k - 1) * T_));
    } else {
        const std::size_t c = co.cell;
        if (co.kind == CoordKind::alpha || co.kind == CoordKind::beta) {
            std::copy(new_lnq_.begin(), new_lnq_.end(), lnq_.begin() + static_cast<std::ptrdiff_t>(c * 2 * T_));
        } else {
            std::copy(new_logw_.begin(), new_logw_.end(),
                      logw_.begin() + static_cast<std::ptrdiff_t>(c * 2 * nk_ * T_));
        }
        for (std::size_t k = 0; k < nk_; ++k) {
            for (std::size_t t = 0; t < T_; ++t) rho_[(k * T_ + t) * nc_ + c] = new_rho_cell_[k * T_ + t];
        }
        cellpart_[c] = new_cellpart_;
        std::copy_n(new_H_.begin(), K * T_, H_.begin());
    }
    loglik_ = new_loglik_;
    logprior_ = new_logprior_;
    pending_coord_ = kNone;
}

// ---------------------------------------------------------------------------------------------
// Sampler

std::vector<double> auto_proposal_sd(const MortalityDataset& data, const ModelParams& params,
                                     const SamplerConfig& cfg) {
    PosteriorState state(data, params, cfg);
    const FreeLayout& layout = state.layout();
    const double f0 = state.log_posterior();
    std::vector<double> sd(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const double x = state.value(i);
        const bool positive = layout[i].kind == CoordKind::sigma2;
        auto curvature = [&](double h) {
            const double fp = state.propose(i, x + h);
            const double fm = state.propose(i, x - h);
            return -(fp - 2.0 * f0 + fm) / (h * h);
        };
        double h = positive ? 0.01 * x : 1e-3 * std::max(1.0, std::abs(x));
        double c = curvature(h);
        if (c > 0.0 && std::isfinite(c)) {
            h = 0.5 / std::sqrt(c);
            if (positive) h = std::min(h, 0.5 * x);
            const double c2 = curvature(h);
            if (c2 > 0.0 && std::isfinite(c2)) c = c2;
            sd[i] = kScaleForQuarterAcceptance / std::sqrt(c);
        } else {
            sd[i] = 0.1 * std::max(std::abs(x), 0.1);
        }
        if (positive) sd[i] = std::min(sd[i], 2.0 * x);
    }
    return sd;
}

GibbsSampler::GibbsSampler(const MortalityDataset& data, ModelParams init, const SamplerConfig& cfg)
    : state_(data, init, cfg), scratch_(data, std::move(init), cfg), cfg_(cfg) {
    cfg_.validate(state_.layout().size());
    sd_ = cfg_.proposal_sd.empty() ? auto_proposal_sd(data, state_.params(), cfg_) : cfg_.proposal_sd;
    const ModelParams& p = state_.params();
    const BlockSelection& b = cfg_.blocks;
    levels_ = cfg_.level_moves && b.alpha && b.beta && b.u && b.v && p.dims.causes > 0;
    if (levels_) {
        // level and trend of cause k are pinned down by T yearly factors with sd sigma_k
        const double T = static_cast<double>(data.years());
        for (int k = 1; k <= p.dims.causes; ++k) level_sd_.push_back(2.4 * std::sqrt(p.sigma2(k) / T));
        std::vector<double> trend;
        for (int t = 1; t <= data.years(); ++t) trend.push_back(trend_reduction(p.weights.cause_trend[1], t));
        const double mean = std::accumulate(trend.begin(), trend.end(), 0.0) / T;
        double spread = 0.0;
        for (double x : trend) spread += (x - mean) * (x - mean);
        spread = std::max(spread, 1.0);
        for (int k = 1; k <= p.dims.causes; ++k) level_sd_.push_back(2.4 * std::sqrt(p.sigma2(k) / spread));
        level_accepts_.assign(level_sd_.size(), 0);
    }
}

void GibbsSampler::level_sweep(Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    ++level_tries_;
    const std::size_t K = level_sd_.size() / 2;
    for (std::size_t i = 0; i < level_sd_.size(); ++i) {
        const auto k = static_cast<CauseId>(i % K + 1);
        const double delta = level_sd_[i] * z(rng);
        try {
            scratch_.reset(i < K ? state_.level_shift(k, delta) : state_.trend_shift(k, delta));
        } catch (const SamplerError&) {
            continue; // proposal left the support
        }
        const double log_ratio = scratch_.log_posterior() - state_.log_posterior();
        const double u = uniform_open(rng);
        if (std::isfinite(log_ratio) && std::log(u) < log_ratio) {
            std::swap(state_, scratch_);
            ++level_accepts_[i];
        }
    }
}

void GibbsSampler::adapt_levels() {
    if (!levels_ || level_tries_ == 0) return;
    for (std::size_t i = 0; i < level_sd_.size(); ++i) {
        const double rate = static_cast<double>(level_accepts_[i]) / static_cast<double>(level_tries_);
        if (rate > kAcceptHigh) level_sd_[i] *= kGrow;
        else if (rate < kAcceptLow) level_sd_[i] *= kShrink;
        level_accepts_[i] = 0;
    }
    level_tries_ = 0;
}

std::vector<char> GibbsSampler::sweep(Rng& rng) {
    const FreeLayout& layout = state_.layout();
    std::vector<char> accepted(layout.size(), 0);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (!layout.selected(i, cfg_.blocks)) continue;
        const double current = state_.value(i);
        const double sd = sd_[i];
        double proposal;
        double hastings = 0.0;
        if (layout[i].kind == CoordKind::sigma2) {
            proposal = truncated_normal_sample(current, sd, 0.0, kInf, rng);
            hastings = truncated_normal_log_density(current, proposal, sd, 0.0, kInf) -
                       truncated_normal_log_density(proposal, current, sd, 0.0, kInf);
        } else {
            proposal = truncated_normal_sample(current, sd, -kInf, kInf, rng);
        }
        const double before = state_.log_posterior();
        const double after = state_.propose(i, proposal);
        const double log_ratio = after - before + hastings;
        const double u = uniform_open(rng);
        if (!std::isnan(log_ratio) && std::log(u) < log_ratio) {
            state_.accept();
            accepted[i] = 1;
        }
    }
    if (levels_) level_sweep(rng);
    if (!std::isfinite(state_.log_posterior())) throw SamplerError("sampler reached a non-finite log posterior");
    return accepted;
}

SweepOutcome gibbs_sweep(const ModelParams& current, const MortalityDataset& data, const SamplerConfig& cfg,
                         Rng& rng) {
    GibbsSampler sampler(data, current, cfg);
    auto flags = sampler.sweep(rng);
    return SweepOutcome{sampler.state().params(), std::move(flags)};
}

PosteriorSamples run_chain(const MortalityDataset& data, const ModelParams& init, const SamplerConfig& cfg,
                           int chain_id) {
    GibbsSampler sampler(data, init, cfg);
    const FreeLayout& layout = sampler.state().layout();
    const std::size_t n = layout.size();
    Rng rng = make_rng(cfg.seed, 0);

    PosteriorSamples out;
    out.base = init;
    out.base.fix_gauge();
    out.names = layout.names();
    out.cause_names = data.cause_names();
    out.config = cfg;
    out.chain_id = chain_id;
    out.seed = cfg.seed;
    const std::size_t kept = (cfg.n_steps - cfg.burn_in + cfg.thin - 1) / cfg.thin;
    out.values.reserve(kept * n);

    std::vector<std::size_t> window(n, 0), post(n, 0);
    for (std::size_t step = 0; step < cfg.n_steps; ++step) {
        const auto flags = sampler.sweep(rng);
        if (step < cfg.burn_in) {
            for (std::size_t i = 0; i < n; ++i) window[i] += static_cast<std::size_t>(flags[i]);
            if ((step + 1) % cfg.adapt_window == 0) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double rate = static_cast<double>(window[i]) / static_cast<double>(cfg.adapt_window);
                    if (rate > kAcceptHigh) sampler.proposal_sd()[i] *= kGrow;
                    else if (rate < kAcceptLow) sampler.proposal_sd()[i] *= kShrink;
                    window[i] = 0;
                }
                sampler.adapt_levels();
            }
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) post[i] += static_cast<std::size_t>(flags[i]);
        if ((step - cfg.burn_in) % cfg.thin == 0) {
            const ModelParams& p = sampler.state().params();
            for (std::size_t i = 0; i < n; ++i) out.values.push_back(layout.get(p, i));
        }
    }
    const double post_steps = static_cast<double>(cfg.n_steps - cfg.burn_in);
    out.acceptance_rate.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.acceptance_rate[i] = static_cast<double>(post[i]) / post_steps;
    out.proposal_sd = sampler.proposal_sd();
    return out;
}

std::vector<PosteriorSamples> run_chains_parallel(const MortalityDataset& data, const std::vector<ModelParams>& inits,
                                                  const std::vector<SamplerConfig>& cfgs, unsigned threads) {
    if (inits.empty()) throw ConfigError("need at least one chain");
    if (inits.size() != cfgs.size()) throw ConfigError("one sampler config per chain required");
    std::set<std::uint64_t> seeds;
    for (const auto& cfg : cfgs) {
        if (!seeds.insert(cfg.seed).second) {
            throw ConfigError("duplicate chain seed " + std::to_string(cfg.seed));
        }
    }
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(inits.size()));

    std::vector<PosteriorSamples> results(inits.size());
    std::vector<std::exception_ptr> errors(inits.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < inits.size(); i = next++) {
            try {
                results[i] = run_chain(data, inits[i], cfgs[i], static_cast<int>(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

ModelParams jittered_start(const MortalityDataset& data, const ModelParams& init, std::uint64_t seed,
                           double scale) {
    SamplerConfig cfg;
    const PosteriorState state(data, init, cfg);
    const std::vector<double> sd = auto_proposal_sd(data, init, cfg);
    Rng rng = make_rng(seed, 1);
    std::normal_distribution<double> z(0.0, 1.0);
    ModelParams p = init;
    const FreeLayout& layout = state.layout();
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const double x = layout.get(p, i);
        const double step = scale * sd[i] / kScaleForQuarterAcceptance * z(rng);
        state.move(p, i, layout[i].kind == CoordKind::sigma2 ? x * std::exp(step / x) : x + step);
    }
    return p;
}

// ---------------------------------------------------------------------------------------------
// PosteriorSamples

std::vector<double> PosteriorSamples::column(std::size_t j) const {
    std::vector<double> out(n_draws());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i * n_coords() + j];
    return out;
}

std::size_t PosteriorSamples::column_index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("no posterior column named " + name);
    return static_cast<std::size_t>(it - names.begin());
}

void PosteriorSamples::draw_into(std::size_t i, ModelParams& out) const {
    FreeLayout(base.dims).apply(out, row(i));
}

ModelParams PosteriorSamples::draw(std::size_t i) const {
    if (i >= n_draws()) throw ConfigError("draw index out of range");
    ModelParams p = base;
    draw_into(i, p);
    return p;
}

void write_samples(const PosteriorSamples& samples, const std::string& csv_path, const std::string& json_path) {
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw IoError("cannot write " + csv_path);
        out << csv::join(samples.names) << '\n';
        std::string line;
        for (std::size_t i = 0; i < samples.n_draws(); ++i) {
            line.clear();
            const auto row = samples.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (j) line.push_back(',');
                line += csv::format_double(row[j]);
            }
            out << line << '\n';
        }
    }
    nlohmann::json meta{{"chain_id", samples.chain_id},
                        {"seed", samples.seed},
                        {"n_draws", samples.n_draws()},
                        {"config", samples.config},
                        {"names", samples.names},
                        {"acceptance_rate", samples.acceptance_rate},
                        {"proposal_sd", samples.proposal_sd},
                        {"cause_names", samples.cause_names},
                        {"base", samples.base}};
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + json_path);
    out << meta.dump(2) << '\n';
}

PosteriorSamples read_samples(const std::string& csv_path, const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open " + json_path);
    nlohmann::json meta;
    PosteriorSamples s;
    try {
        in >> meta;
        s.chain_id = meta.at("chain_id").get<int>();
        s.seed = meta.at("seed").get<std::uint64_t>();
        s.config = meta.at("config").get<SamplerConfig>();
        s.acceptance_rate = meta.at("acceptance_rate").get<std::vector<double>>();
        s.proposal_sd = meta.at("proposal_sd").get<std::vector<double>>();
        s.cause_names = meta.at("cause_names").get<std::vector<std::string>>();
        s.base = meta.at("base").get<ModelParams>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path + ": " + e.what());
    }
    const csv::Table table = csv::read_file(csv_path);
    const FreeLayout layout(s.base.dims);
    if (table.header != layout.names()) throw DataError(csv_path + ": columns do not match the parameter layout");
    s.names = table.header;
    s.values.reserve(table.rows.size() * s.names.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string where = csv_path + ":" + std::to_string(table.line_numbers[r]);
        for (const auto& field : table.rows[r]) s.values.push_back(csv::parse_double(field, where));
    }
    return s;
}

PosteriorSamples pool_samples(const std::vector<PosteriorSamples>& chains) {
    if (chains.empty()) throw ConfigError("no chains to pool");
    PosteriorSamples pooled = chains.front();
    pooled.chain_id = -1;
    pooled.values.clear();
    std::fill(pooled.acceptance_rate.begin(), pooled.acceptance_rate.end(), 0.0);
    for (const auto& c : chains) {
        if (c.names != pooled.names) throw ConfigError("cannot pool chains with different layouts");
        pooled.values.insert(pooled.values.end(), c.values.begin(), c.values.end());
        for (std::size_t i = 0; i < c.acceptance_rate.size(); ++i) {
            pooled.acceptance_rate[i] += c.acceptance_rate[i] / static_cast<double>(chains.size());
        }
    }
    return pooled;
}

ModelParams posterior_mean(const PosteriorSamples& samples) {
    if (samples.n_draws() == 0) throw ConfigError("posterior mean of an empty sample");
    std::vector<double> mean(samples.n_coords(), 0.0);
    for (std::size_t i = 0; i < samples.n_draws(); ++i) {
        const auto row = samples.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
    }
    for (double& m : mean) m /= static_cast<double>(samples.n_draws());
    ModelParams p = samples.base;
    FreeLayout(p.dims).apply(p, mean);
    p.fix_gauge();
    return p;
}

} // namespace crmort
