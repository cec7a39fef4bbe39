#include "ewa/sampler.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

#include "ewa/error.hpp"
#include "ewa/stats.hpp"

namespace ewa {

std::string_view to_string(Algorithm a) { return a == Algorithm::MALA ? "mala" : "rwm"; }

std::string_view to_string(Parametrization p) { return p == Parametrization::Direct ? "direct" : "asinh"; }

std::string_view to_string(InitKind k) {
    switch (k) {
        case InitKind::PriorDraw: return "prior-draw";
        case InitKind::Zero: return "zero";
        case InitKind::User: return "user-vector";
        case InitKind::Mode: return "mode";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view s) {
    if (s == "mala") return Algorithm::MALA;
    if (s == "rwm") return Algorithm::RWM;
    throw ConfigError("unknown sampler algorithm '" + std::string(s) + "' (expected mala or rwm)");
}

Parametrization parse_parametrization(std::string_view s) {
    if (s == "direct") return Parametrization::Direct;
    if (s == "asinh") return Parametrization::Asinh;
    throw ConfigError("unknown parametrization '" + std::string(s) + "' (expected direct or asinh)");
}

InitKind parse_init_kind(std::string_view s) {
    if (s == "prior-draw") return InitKind::PriorDraw;
    if (s == "zero") return InitKind::Zero;
    if (s == "user-vector") return InitKind::User;
    if (s == "mode") return InitKind::Mode;
    throw ConfigError("unknown init '" + std::string(s) + "' (expected prior-draw, zero, user-vector or mode)");
}

void SamplerConfig::validate() const {
    if (step_size && !(*step_size > 0.0)) throw ConfigError("step_size must be positive");
    if (n_iters < 1) throw ConfigError("n_iters must be positive");
    const long b = burn_in_iters();
    if (b < 0 || b >= n_iters) throw ConfigError("burn_in must satisfy 0 <= burn_in < n_iters");
    if (thin < 1) throw ConfigError("thin must be positive");
    if (n_chains < 1) throw ConfigError("n_chains must be positive");
    if (max_halvings < 0) throw ConfigError("max_halvings must be nonnegative");
    if (init == InitKind::User && init_vector.size() == 0) throw ConfigError("init user-vector requires init_vector");
}

bool metropolis_accept(double log_ratio, Rng& rng) {
    if (std::isnan(log_ratio)) return false;
    if (log_ratio >= 0.0) return true;
    return std::log(uniform01(rng)) < log_ratio;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_cosh(double u) {
    const double a = std::abs(u);
    return a + std::log1p(std::exp(-2.0 * a)) - 0.6931471805599453;
}

struct State {
    Vector z;
    Vector beta;
    Vector grad;  // gradient of the log target in z coordinates
    double log_post = kNegInf;
    double log_target = kNegInf;
};

class Kernel {
public:
    Kernel(const GibbsPosterior& post, const SamplerConfig& cfg)
        : post_(post), asinh_(cfg.parametrization == Parametrization::Asinh),
          mala_(cfg.algorithm == Algorithm::MALA), zeta_(post.config().prior.zeta) {}

    Vector to_z(const Vector& beta) const {
        if (!asinh_) return beta;
        Vector z(beta.size());
        for (Eigen::Index j = 0; j < beta.size(); ++j) z[j] = std::asinh(beta[j] / zeta_);
        return z;
    }

    bool evaluate(State& s) const {
        const Eigen::Index p = s.z.size();
        if (asinh_) {
            s.beta.resize(p);
            for (Eigen::Index j = 0; j < p; ++j) {
                if (!(std::abs(s.z[j]) < 700.0)) return invalid(s);
                s.beta[j] = zeta_ * std::sinh(s.z[j]);
            }
        } else {
            s.beta = s.z;
        }
        Vector gb;
        if (!post_.evaluate(s.beta, s.log_post, mala_ ? &gb : nullptr)) return invalid(s);
        s.log_target = s.log_post;
        if (asinh_) {
            for (Eigen::Index j = 0; j < p; ++j) s.log_target += log_cosh(s.z[j]);
            if (mala_) {
                s.grad.resize(p);
                for (Eigen::Index j = 0; j < p; ++j)
                    s.grad[j] = gb[j] * zeta_ * std::cosh(s.z[j]) + std::tanh(s.z[j]);
            }
        } else if (mala_) {
            s.grad = std::move(gb);
        }
        return std::isfinite(s.log_target);
    }

    bool mala() const { return mala_; }

private:
    static bool invalid(State& s) {
        s.log_post = s.log_target = kNegInf;
        return false;
    }

    const GibbsPosterior& post_;
    bool asinh_;
    bool mala_;
    double zeta_;
};

Chain run_once(const GibbsPosterior& post, const SamplerConfig& cfg, std::uint64_t chain_seed,
               const Vector& start, double h_init, double post_scale) {
    Kernel kernel(post, cfg);
    Rng rng = make_rng(chain_seed, "mcmc");
    const Eigen::Index p = post.dim();
    const long burn = cfg.burn_in_iters();

    State cur;
    cur.z = kernel.to_z(start);
    if (!kernel.evaluate(cur)) {
        std::ostringstream os;
        os << "chain start point has zero posterior density (||beta|| = " << start.norm()
           << ", B1 = " << post.config().prior.B1 << ")";
        throw SamplingError(os.str());
    }

    Chain chain;
    chain.seed_used = chain_seed;
    chain.config_echo = cfg;
    const long kept = (cfg.n_iters - burn + cfg.thin - 1) / cfg.thin;
    chain.draws.reserve(static_cast<std::size_t>(kept));
    chain.log_post_trace.reserve(static_cast<std::size_t>(kept));

    double log_h = std::log(h_init);
    double sum_log_h = 0.0;
    long n_avg = 0;
    double h = h_init;
    long accepted = 0;
    State prop;
    Vector noise(p);
    for (long t = 0; t < cfg.n_iters; ++t) {
        if (t == burn) {
            const double frozen = (cfg.adapt && n_avg > 0) ? std::exp(sum_log_h / static_cast<double>(n_avg))
                                                           : std::exp(log_h);
            h = frozen * post_scale;
            chain.step_size_used = h;
        } else if (t < burn) {
            h = std::exp(log_h);
        }

        for (Eigen::Index j = 0; j < p; ++j) noise[j] = standard_normal(rng);
        double log_ratio = kNegInf;
        const double h2 = h * h;
        if (kernel.mala()) {
            prop.z = cur.z + 0.5 * h2 * cur.grad + h * noise;
            if (kernel.evaluate(prop)) {
                const double fwd = -0.5 * noise.squaredNorm();
                const Vector back = cur.z - prop.z - 0.5 * h2 * prop.grad;
                const double bwd = -0.5 * back.squaredNorm() / h2;
                log_ratio = prop.log_target - cur.log_target + bwd - fwd;
            }
        } else {
            prop.z = cur.z + h * noise;
            if (kernel.evaluate(prop)) log_ratio = prop.log_target - cur.log_target;
        }
        const bool accept = log_ratio > kNegInf && metropolis_accept(log_ratio, rng);
        if (accept) std::swap(cur, prop);

        if (t < burn) {
            if (cfg.adapt) {
                const double alpha = log_ratio >= 0.0 ? 1.0 : (log_ratio > kNegInf ? std::exp(log_ratio) : 0.0);
                log_h += (alpha - cfg.target_accept()) / std::pow(static_cast<double>(t + 1), 0.6);
                if (t >= burn / 2) {
                    sum_log_h += log_h;
                    ++n_avg;
                }
            }
            continue;
        }
        if (accept) ++accepted;
        if ((t - burn) % cfg.thin == 0) {
            chain.draws.push_back(cur.beta);
            chain.log_post_trace.push_back(cur.log_post);
        }
    }
    chain.accept_rate = static_cast<double>(accepted) / static_cast<double>(cfg.n_iters - burn);
    return chain;
}

// Start shared by all chains, or nullopt for per-chain prior draws.
std::optional<Vector> shared_start(const GibbsPosterior& post, const SamplerConfig& cfg) {
    const Eigen::Index p = post.dim();
    switch (cfg.init) {
        case InitKind::Zero: return Vector::Zero(p);
        case InitKind::User:
            if (cfg.init_vector.size() != p) {
                std::ostringstream os;
                os << "init vector has length " << cfg.init_vector.size() << ", expected p = " << p;
                throw DimensionError(os.str());
            }
            return cfg.init_vector;
        case InitKind::Mode: return find_posterior_mode(post).beta;
        case InitKind::PriorDraw: return std::nullopt;
    }
    return std::nullopt;
}

Chain run_from(const GibbsPosterior& post, const SamplerConfig& cfg, int chain_index, const Vector& start) {
    const std::uint64_t chain_seed = cfg.seed + static_cast<std::uint64_t>(chain_index);
    const double h0 = cfg.step_size ? *cfg.step_size : default_step_size(post, cfg, start);
    Chain chain;
    double scale = 1.0;
    for (int a = 0; a <= cfg.max_halvings; ++a, scale *= 0.5) {
        chain = run_once(post, cfg, chain_seed, start, h0, scale);
        chain.halvings = a;
        if (chain.accept_rate >= 0.1) {
            if (a > 0) {
                std::ostringstream os;
                os << "step size halved " << a << " times to " << chain.step_size_used << " (chain " << chain_index
                   << ")";
                chain.warnings.push_back(os.str());
            }
            return chain;
        }
    }
    if (chain.accept_rate == 0.0) {
        std::ostringstream os;
        os << "all proposals rejected after burn-in (chain " << chain_index << ", step " << chain.step_size_used
           << " after " << cfg.max_halvings << " halvings); use a smaller step_size";
        throw SamplingError(os.str());
    }
    std::ostringstream os;
    os << "acceptance rate " << chain.accept_rate << " below 0.1 after " << cfg.max_halvings << " step halvings";
    chain.warnings.push_back(os.str());
    return chain;
}

}  // namespace

double default_step_size(const GibbsPosterior& post, const SamplerConfig& cfg, const Vector& start) {
    const GibbsConfig& g = post.config();
    const Dataset& d = *g.data;
    const double p = static_cast<double>(post.dim());
    const double xnorm = spectral_norm(d.X());
    const double lik_curv = g.lambda * d.family().curvature_upper() * xnorm * xnorm /
                            (static_cast<double>(d.n()) * d.family().scale());
    double curv = 0.0;
    if (cfg.parametrization == Parametrization::Direct) {
        const double zeta = g.prior.zeta;
        curv = lik_curv + std::min(1.0 / (zeta * zeta), 1e6);
    } else {
        // likelihood curvature in u scales with (d beta / d u)^2 ~ beta^2 + zeta^2
        const double z2 = g.prior.zeta * g.prior.zeta;
        const double bmax = start.size() ? start.lpNorm<Eigen::Infinity>() : 0.0;
        curv = lik_curv * (bmax * bmax + z2) + 3.0;
    }
    return 0.5 * std::pow(p, -1.0 / 3.0) / std::sqrt(curv);
}

Vector initial_point(const GibbsPosterior& post, const SamplerConfig& cfg, std::uint64_t chain_seed) {
    if (auto s = shared_start(post, cfg)) return *s;
    Rng rng = make_rng(chain_seed, "init");
    return sample_prior(post.config().prior, rng);
}

Chain run_chain(const GibbsPosterior& post, const SamplerConfig& cfg, int chain_index) {
    cfg.validate();
    const Vector start = initial_point(post, cfg, cfg.seed + static_cast<std::uint64_t>(chain_index));
    return run_from(post, cfg, chain_index, start);
}

Chain run_chain(const GibbsConfig& gibbs, const SamplerConfig& cfg) {
    const GibbsPosterior post(gibbs);
    return run_chain(post, cfg, 0);
}

std::vector<Chain> run_chains_serial(const GibbsPosterior& post, const SamplerConfig& cfg) {
    cfg.validate();
    const auto shared = shared_start(post, cfg);
    std::vector<Chain> chains;
    for (int k = 0; k < cfg.n_chains; ++k) {
        const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(k);
        const Vector start = shared ? *shared : initial_point(post, cfg, s);
        chains.push_back(run_from(post, cfg, k, start));
    }
    return chains;
}

std::vector<Chain> run_chains(const GibbsPosterior& post, const SamplerConfig& cfg) {
    cfg.validate();
    const auto shared = shared_start(post, cfg);
    std::vector<Chain> chains(static_cast<std::size_t>(cfg.n_chains));
    std::vector<std::exception_ptr> errors(chains.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < cfg.n_chains; ++k) {
        try {
            const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(k);
            const Vector start = shared ? *shared : initial_point(post, cfg, s);
            chains[static_cast<std::size_t>(k)] = run_from(post, cfg, k, start);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return chains;
}

Vector posterior_mean(const Chain& chain) { return posterior_mean(std::span<const Chain>(&chain, 1)); }

Vector posterior_mean(std::span<const Chain> chains) {
    Vector sum;
    std::size_t count = 0;
    for (const Chain& c : chains) {
        for (const Vector& d : c.draws) {
            if (count == 0) sum = Vector::Zero(d.size());
            sum += d;
            ++count;
        }
    }
    if (count == 0) throw SamplingError("posterior_mean: chain has no stored draws");
    return sum / static_cast<double>(count);
}

KlRiskEstimate integrated_kl_risk(const Chain& chain, const NaturalParams& theta0, const Dataset& data) {
    return integrated_kl_risk(std::span<const Chain>(&chain, 1), theta0, data);
}

KlRiskEstimate integrated_kl_risk(std::span<const Chain> chains, const NaturalParams& theta0,
                                  const Dataset& data) {
    const KlRiskEvaluator kl(theta0, data.X(), data.family());
    std::vector<double> all;
    double ess = 0.0;
    for (const Chain& c : chains) {
        std::vector<double> vals;
        vals.reserve(c.draws.size());
        for (const Vector& d : c.draws) vals.push_back(kl(d));
        if (!vals.empty()) ess += static_cast<double>(vals.size()) / stats::autocorrelation_time(vals);
        all.insert(all.end(), vals.begin(), vals.end());
    }
    if (all.empty()) throw SamplingError("integrated_kl_risk: chain has no stored draws");
    KlRiskEstimate est;
    est.value = stats::mean(all);
    est.ess = ess;
    est.standard_error = std::sqrt(stats::variance(all) / std::max(ess, 1.0));
    return est;
}

std::vector<Vector> posterior_quantiles(std::span<const Chain> chains, std::span<const double> levels) {
    Eigen::Index p = 0;
    for (const Chain& c : chains)
        if (!c.draws.empty()) p = c.draws.front().size();
    if (p == 0) throw SamplingError("posterior_quantiles: no stored draws");
    std::vector<Vector> out(levels.size(), Vector(p));
    std::vector<double> col;
    for (Eigen::Index j = 0; j < p; ++j) {
        col.clear();
        for (const Chain& c : chains)
            for (const Vector& d : c.draws) col.push_back(d[j]);
        for (std::size_t l = 0; l < levels.size(); ++l) out[l][j] = stats::quantile(col, levels[l]);
    }
    return out;
}

void write_chain_csv(std::span<const Chain> chains, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    Eigen::Index p = 0;
    for (const Chain& c : chains)
        if (!c.draws.empty()) p = c.draws.front().size();
    os << "chain,draw";
    for (Eigen::Index j = 0; j < p; ++j) os << ",beta_" << j + 1;
    os << ",log_post\n";
    char buf[32];
    for (std::size_t k = 0; k < chains.size(); ++k) {
        const Chain& c = chains[k];
        for (std::size_t i = 0; i < c.draws.size(); ++i) {
            os << k << ',' << i;
            for (Eigen::Index j = 0; j < p; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", c.draws[i][j]);
                os << ',' << buf;
            }
            std::snprintf(buf, sizeof buf, "%.17g", c.log_post_trace[i]);
            os << ',' << buf << '\n';
        }
    }
    if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace ewa
