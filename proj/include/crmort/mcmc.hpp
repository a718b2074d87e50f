#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crmort/dataset.hpp"
#include "crmort/model.hpp"
#include "crmort/truncated_normal.hpp"

namespace crmort {

// Flat prior on sigma_k (the model's parameter) or directly on sigma_k^2.
enum class SigmaPrior { uniform_sd, uniform_variance };

// Which parameter families the sweep updates; the others stay at their initial values.
struct BlockSelection {
    bool alpha = true;
    bool beta = true;
    bool u = true;
    bool v = true;
    bool sigma2 = true;
};

struct SamplerConfig {
    std::size_t n_steps = 35000;
    std::size_t burn_in = 5000;
    std::size_t adapt_window = 500;
    std::size_t thin = 1;
    std::uint64_t seed = 1;
    // One entry per free coordinate; empty means "scale from the local curvature at the start".
    std::vector<double> proposal_sd;
    double sigma2_max = 100.0;
    SigmaPrior sigma_prior = SigmaPrior::uniform_sd;
    BlockSelection blocks;
    // After each sweep, joint level and trend moves per cause k >= 1 across all cells (see
    // PosteriorState::level_shift). Needs the alpha, beta, u and v blocks.
    bool level_moves = true;

    void validate(std::size_t n_coordinates) const;
};

void to_json(nlohmann::json& j, const SamplerConfig& cfg);
void from_json(const nlohmann::json& j, SamplerConfig& cfg);

enum class CoordKind { alpha, beta, u, v, sigma2 };

struct Coordinate {
    CoordKind kind;
    std::size_t cell = 0; // alpha/beta/u/v
    CauseId cause = 0;    // u/v (>= 1) and sigma2
};

// Free coordinates in sweep order: all alpha, all beta, free u, free v, sigma2.
class FreeLayout {
public:
    explicit FreeLayout(const ModelDims& dims);

    std::size_t size() const { return coords_.size(); }
    const Coordinate& operator[](std::size_t i) const { return coords_[i]; }
    const std::vector<std::string>& names() const { return names_; }
    const ModelDims& dims() const { return dims_; }

    double get(const ModelParams& p, std::size_t i) const;
    void set(ModelParams& p, std::size_t i, double value) const;
    std::vector<double> extract(const ModelParams& p) const;
    void apply(ModelParams& p, std::span<const double> values) const;

    bool selected(std::size_t i, const BlockSelection& blocks) const;
    // First coordinate of sigma2 for cause k.
    std::size_t sigma2_index(CauseId k) const;

private:
    ModelDims dims_;
    std::vector<Coordinate> coords_;
    std::vector<std::string> names_;
};

// Log posterior with cached per-cell and per-(cause, year) terms so that a single-coordinate
// proposal costs O(T * K) instead of a full likelihood evaluation.
class PosteriorState {
public:
    PosteriorState(const MortalityDataset& data, ModelParams params, const SamplerConfig& cfg);

    const ModelParams& params() const { return params_; }
    const FreeLayout& layout() const { return layout_; }
    const MortalityDataset& data() const { return *data_; }
    double log_likelihood() const { return loglik_; }
    double log_prior() const { return logprior_; }
    double log_posterior() const { return loglik_ + logprior_; }
    double value(std::size_t coord) const { return layout_.get(params_, coord); }

    // A beta (v) move also shifts alpha (u) by -delta * mean trend over the data years, so the fitted
    // level at the centre of the data stays put. alpha and u moves are plain. Applies that move to p.
    void move(ModelParams& p, std::size_t coord, double value) const;

    // Log posterior after move(coord, value); state is unchanged until accept().
    double propose(std::size_t coord, double value);
    void accept();

    // Joint moves along directions that the shared risk factor of cause k makes flat. Level:
    // u[c, k] += delta in every cell, alpha[c] moved so the other causes keep their intensity at the
    // centre of the data (exact while q < 1/2). Trend: v[c, k] += delta with u re-centred, beta and
    // alpha moved to first order. Both maps have unit Jacobian and are undone by -delta.
    ModelParams level_shift(CauseId k, double delta) const;
    ModelParams trend_shift(CauseId k, double delta) const;
    void reset(ModelParams params);

private:
    void rebuild();
    double sigma_log_prior(std::span<const double> sigma2) const;
    void cell_terms(std::size_t c, const double* lnq, const double* logw, double* rho_out, double& part) const;

    const MortalityDataset* data_;
    ModelParams params_;
    FreeLayout layout_;
    SigmaPrior sigma_prior_;
    double sigma2_max_;

    std::size_t nc_, nk_, T_;
    std::vector<double> m_, logm_, ncell_, n_, ntot_, trend_cell_, trend_cause_;
    std::vector<double> centre_cell_, centre_cause_; // mean trend over t = 1..T, 0 when not centring
    double const_ = 0.0;

    // cached state
    std::vector<double> lnq_, logw_, rho_; // rho_ layout [(k*T + t)*nc + c]
    std::vector<double> cellpart_, shape_, H_;
    double loglik_ = 0.0, logprior_ = 0.0;

    // pending proposal
    std::size_t pending_coord_ = static_cast<std::size_t>(-1);
    double pending_value_ = 0.0;
    double pending_partner_ = 0.0; // alpha or u after a beta or v move
    std::vector<double> new_lnq_, new_logw_, new_rho_cell_, new_shape_, new_H_;
    double new_cellpart_ = 0.0, new_loglik_ = 0.0, new_logprior_ = 0.0;
};

// Proposal standard deviations from the conditional curvature of the log posterior at params,
// scaled for roughly 25% acceptance.
std::vector<double> auto_proposal_sd(const MortalityDataset& data, const ModelParams& params,
                                     const SamplerConfig& cfg);

class GibbsSampler {
public:
    GibbsSampler(const MortalityDataset& data, ModelParams init, const SamplerConfig& cfg);

    // One pass over the selected coordinates in layout order, then the joint moves. Flag per
    // coordinate (1 = accepted).
    std::vector<char> sweep(Rng& rng);

    const PosteriorState& state() const { return state_; }
    const std::vector<double>& proposal_sd() const { return sd_; }
    std::vector<double>& proposal_sd() { return sd_; }

    bool level_moves() const { return levels_; }
    // Rescales the level-move proposals from the acceptances since the last call.
    void adapt_levels();

private:
    void level_sweep(Rng& rng);

    PosteriorState state_;
    PosteriorState scratch_;
    SamplerConfig cfg_;
    std::vector<double> sd_;
    bool levels_ = false;
    std::vector<double> level_sd_;             // [level k=1..K, trend k=1..K]
    std::vector<std::size_t> level_accepts_;
    std::size_t level_tries_ = 0;
};

struct SweepOutcome {
    ModelParams next;
    std::vector<char> accepted;
};

SweepOutcome gibbs_sweep(const ModelParams& current, const MortalityDataset& data, const SamplerConfig& cfg,
                         Rng& rng);

struct PosteriorSamples {
    ModelParams base; // fixed coordinates (trend constants, gauge)
    std::vector<std::string> names;
    std::vector<double> values; // row-major, n_draws x names.size()
    std::vector<double> acceptance_rate; // per coordinate, after burn-in
    std::vector<double> proposal_sd;     // frozen after burn-in
    std::vector<std::string> cause_names;
    SamplerConfig config;
    int chain_id = 0;
    std::uint64_t seed = 0;

    std::size_t n_coords() const { return names.size(); }
    std::size_t n_draws() const { return names.empty() ? 0 : values.size() / names.size(); }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * n_coords(), n_coords()}; }
    std::vector<double> column(std::size_t j) const;
    std::size_t column_index(const std::string& name) const;
    ModelParams draw(std::size_t i) const;
    void draw_into(std::size_t i, ModelParams& out) const;
};

PosteriorSamples run_chain(const MortalityDataset& data, const ModelParams& init, const SamplerConfig& cfg,
                           int chain_id = 0);

// Chains share nothing; results do not depend on `threads` (0 = hardware concurrency).
std::vector<PosteriorSamples> run_chains_parallel(const MortalityDataset& data, const std::vector<ModelParams>& inits,
                                                  const std::vector<SamplerConfig>& cfgs, unsigned threads = 0);

// Starting point for an extra chain: every free coordinate is moved by `scale` local posterior
// standard deviations (from the conditional curvature at init) times Normal(0, 1), sigma2 on the
// log scale. Draws come from make_rng(seed, 1).
ModelParams jittered_start(const MortalityDataset& data, const ModelParams& init, std::uint64_t seed,
                           double scale = 2.0);

// Columnar CSV (one row per draw) plus JSON sidecar with seed, config and acceptance rates.
void write_samples(const PosteriorSamples& samples, const std::string& csv_path, const std::string& json_path);
PosteriorSamples read_samples(const std::string& csv_path, const std::string& json_path);

// Pools draws of several chains (same layout) into one sample set.
PosteriorSamples pool_samples(const std::vector<PosteriorSamples>& chains);
// Coordinate-wise posterior mean, gauge fixed.
ModelParams posterior_mean(const PosteriorSamples& samples);

} // namespace crmort
