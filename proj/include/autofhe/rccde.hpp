#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autofhe/chebyshev.hpp"
#include "autofhe/errors.hpp"
#include "autofhe/parallel.hpp"
#include "autofhe/rng.hpp"

namespace autofhe {

// ---------------------------------------------------------------------------
// Fit grid
// ---------------------------------------------------------------------------

// Grid on [lo,-eps] u [eps,hi]; the dead zone around zero is excluded because
// the sign target is discontinuous there. `log_spacing` distributes |x|
// log-uniformly per side, which weights the transition region near the dead
// zone enough for the L1 objective to act on it; error reporting uses the
// uniform grid.
struct GridSpec {
    int n = 4096;
    double eps = 0.01;
    double lo = -1.0;
    double hi = 1.0;
    bool log_spacing = false;

    std::vector<double> points() const {
        if (n <= 0) throw InvalidInput("GridSpec: empty grid");
        if (!(lo < hi)) throw InvalidInput("GridSpec: degenerate bounds");
        std::vector<double> xs;
        xs.reserve(static_cast<std::size_t>(n));
        if (eps <= 0.0) {
            for (int i = 0; i < n; ++i)
                xs.push_back(lo + (hi - lo) * i / std::max(1, n - 1));
            return xs;
        }
        if (log_spacing) {
            // half the points uniform for the global pull, half log-spaced so
            // the transition region next to the dead zone carries real mass
            const int nu = n / 2, ng = n - nu;
            const int nl = nu / 2, nr = nu - nl;
            for (int i = 0; i < nl; ++i)
                xs.push_back(lo + (-eps - lo) * i / std::max(1, nl - 1));
            for (int i = 0; i < nr; ++i)
                xs.push_back(eps + (hi - eps) * i / std::max(1, nr - 1));
            const int gl = ng / 2, gr = ng - gl;
            const double la = std::log(eps);
            const double ll = std::log(-lo), lr = std::log(hi);
            for (int i = 0; i < gl; ++i)
                xs.push_back(-std::exp(ll + (la - ll) * i / std::max(1, gl - 1)));
            for (int i = 0; i < gr; ++i)
                xs.push_back(std::exp(la + (lr - la) * i / std::max(1, gr - 1)));
            return xs;
        }
        const int nl = n / 2, nr = n - nl;
        for (int i = 0; i < nl; ++i)
            xs.push_back(lo + (-eps - lo) * i / std::max(1, nl - 1));
        for (int i = 0; i < nr; ++i)
            xs.push_back(eps + (hi - eps) * i / std::max(1, nr - 1));
        return xs;
    }
};

inline void to_json(nlohmann::json& j, const GridSpec& g) {
    j = {{"n", g.n}, {"eps", g.eps}, {"lo", g.lo}, {"hi", g.hi}, {"log", g.log_spacing}};
}

inline void from_json(const nlohmann::json& j, GridSpec& g) {
    g.n = j.at("n").get<int>();
    g.eps = j.at("eps").get<double>();
    g.lo = j.at("lo").get<double>();
    g.hi = j.at("hi").get<double>();
    g.log_spacing = j.value("log", false);
}

inline double sign_target(double x) { return x > 0.0 ? 0.5 : (x < 0.0 ? -0.5 : 0.0); }

// ---------------------------------------------------------------------------
// Latin hypercube sampling and differential evolution
// ---------------------------------------------------------------------------

using Box = std::vector<std::pair<double, double>>;  // per-dimension (lo, hi)

// n points; each dimension's n values occupy the n equal-width strata exactly
// once (independent random permutation per dimension).
inline std::vector<std::vector<double>> lhs_init(int dim, int n, const Box& bounds, Rng& rng) {
    if (dim < 1 || n < 1) throw InvalidInput("lhs_init: dim and n must be positive");
    if (static_cast<int>(bounds.size()) != dim) throw InvalidInput("lhs_init: bounds size mismatch");
    for (const auto& [lo, hi] : bounds)
        if (!(lo < hi)) throw InvalidInput("lhs_init: degenerate bounds");
    std::vector<std::vector<double>> pts(static_cast<std::size_t>(n),
                                         std::vector<double>(static_cast<std::size_t>(dim)));
    std::vector<int> strata(static_cast<std::size_t>(n));
    for (int d = 0; d < dim; ++d) {
        for (int i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = i;
        rng.shuffle(strata);
        const auto [lo, hi] = bounds[static_cast<std::size_t>(d)];
        const double w = (hi - lo) / n;
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform();
            pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] =
                lo + (strata[static_cast<std::size_t>(i)] + u) * w;
        }
    }
    return pts;
}

inline double reflect_into(double v, double lo, double hi) {
    while (v < lo || v > hi) {
        if (v < lo) v = 2.0 * lo - v;
        if (v > hi) v = 2.0 * hi - v;
    }
    return v;
}

struct DEPopulation {
    std::vector<std::vector<double>> points;
    std::vector<double> fitness;  // aligned with points
    Box bounds;
    double F = 0.5;
    double CR = 0.5;

    int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
    std::size_t size() const { return points.size(); }

    std::size_t best_index() const {
        std::size_t b = 0;
        for (std::size_t i = 1; i < fitness.size(); ++i)
            if (fitness[i] < fitness[b]) b = i;
        return b;
    }

    void validate() const {
        if (points.size() < 4) throw InvalidInput("DEPopulation: need at least 4 points");
        if (points.size() != fitness.size()) throw InvalidInput("DEPopulation: fitness misaligned");
    }
};

inline DEPopulation make_de_population(int dim, int n, const Box& bounds, double F, double CR,
                                       Rng& rng) {
    DEPopulation pop;
    pop.points = lhs_init(dim, n, bounds, rng);
    pop.fitness.assign(pop.points.size(), std::numeric_limits<double>::quiet_NaN());
    pop.bounds = bounds;
    pop.F = F;
    pop.CR = CR;
    return pop;
}

using Objective = std::function<double(const std::vector<double>&)>;

inline void refresh_fitness(DEPopulation& pop, const Objective& obj) {
    parallel_for(pop.size(), [&](std::size_t i) { pop.fitness[i] = obj(pop.points[i]); });
}

// One DE generation: current-point mutation v = x_i + F (x_j - x_k) with
// distinct j, k != i, binomial crossover at rate CR, reflection at the box
// walls, and <= selection (ties accept the candidate). All randomness is
// pre-drawn before candidates are evaluated, so evaluation may run in
// parallel without changing the outcome.
inline void de_step(DEPopulation& pop, const Objective& obj, Rng& rng) {
    pop.validate();
    const std::size_t n = pop.size();
    const int d = pop.dim();
    std::vector<std::vector<double>> cand(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = rng.index(n);
        while (j == i) j = rng.index(n);
        std::size_t k = rng.index(n);
        while (k == i || k == j) k = rng.index(n);
        std::vector<double> u = pop.points[i];
        for (int t = 0; t < d; ++t) {
            const double v = pop.points[i][static_cast<std::size_t>(t)] +
                             pop.F * (pop.points[j][static_cast<std::size_t>(t)] -
                                      pop.points[k][static_cast<std::size_t>(t)]);
            if (rng.uniform() <= pop.CR) {
                const auto [lo, hi] = pop.bounds[static_cast<std::size_t>(t)];
                u[static_cast<std::size_t>(t)] = reflect_into(v, lo, hi);
            }
        }
        cand[i] = std::move(u);
    }
    std::vector<double> cand_fit(n);
    parallel_for(n, [&](std::size_t i) { cand_fit[i] = obj(cand[i]); });
    for (std::size_t i = 0; i < n; ++i) {
        if (cand_fit[i] <= pop.fitness[i]) {
            pop.points[i] = std::move(cand[i]);
            pop.fitness[i] = cand_fit[i];
        }
    }
}

// ---------------------------------------------------------------------------
// R-CCDE
// ---------------------------------------------------------------------------

struct RccdeOptions {
    int generations = 100;
    double gamma = 0.01;  // beta regularization decay
    double alpha_lo = -5.0, alpha_hi = 5.0;
    double beta_lo = 1.0, beta_hi = 5.0;
    double F = 0.5, CR = 0.5;
    int beta_pop = 20;
    int alpha_pop_per_dim = 20;
    int de_steps_per_install = 1;
    int seeds = 10;
    GridSpec grid;
    // Continuation on the dead zone: generation t fits against a grid whose
    // eps shrinks geometrically from eps_anneal_start down to grid.eps over
    // the first anneal_fraction of the run, after which the target grid is
    // fixed. A wide dead zone is easy to fit sharply; shrinking it walks the
    // transition inward instead of asking DE to find it cold. 0 disables.
    double eps_anneal_start = 0.3;
    double anneal_fraction = 0.6;
};

// Per-stage (alphas, beta) plus the current unregularized L1 fit error.
struct ContextVector {
    std::vector<ChebPoly> stages;
    double objective_value = std::numeric_limits<double>::infinity();
};

struct InstallStep {
    int generation;
    int block;
    bool beta_phase;  // when true, before/after are the regularized objective
    double before;
    double after;
};

struct RccdeRun {
    ContextVector context;
    std::vector<InstallStep> installs;
    std::uint64_t seed = 0;
};

namespace detail {

// Evaluation workspace for one composite fit: caches the grid, the fixed
// prefix of the composition for the block under optimization, and evaluates
// candidate blocks over the grid.
class SignFitEval {
  public:
    SignFitEval(std::vector<int> merged_degrees, const GridSpec& grid)
        : degrees_(std::move(merged_degrees)), xs_(grid.points()) {
        prefix_ = xs_;
    }

    void set_grid(const GridSpec& grid) {
        xs_ = grid.points();
        prefix_ = xs_;
    }

    const std::vector<int>& degrees() const { return degrees_; }

    void set_context(const std::vector<ChebPoly>& stages) { stages_ = stages; }

    // fixes the block whose parameters are being evolved; recomputes the
    // composition prefix f_{k-1} o ... o f_1 over the grid
    void focus(int block) {
        block_ = block;
        prefix_ = xs_;
        for (int s = 0; s < block; ++s)
            for (double& y : prefix_) y = cheb_eval(stages_[static_cast<std::size_t>(s)], y);
    }

    double l1_with_alphas(std::span<const double> alphas) const {
        return l1_impl(alphas, stages_[static_cast<std::size_t>(block_)].beta);
    }

    double l1_with_beta(double beta) const {
        const auto& a = stages_[static_cast<std::size_t>(block_)].alphas;
        return l1_impl(std::span<const double>(a.data(), a.size()), beta);
    }

    double l1_full(const std::vector<ChebPoly>& stages) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < xs_.size(); ++i) {
            double y = xs_[i];
            for (const auto& s : stages) y = cheb_eval(s, y);
            acc += std::fabs(y - sign_target(xs_[i]));
        }
        return acc / static_cast<double>(xs_.size());
    }

  private:
    double l1_impl(std::span<const double> alphas, double beta) const {
        double acc = 0.0;
        const int deg = static_cast<int>(alphas.size());
        for (std::size_t i = 0; i < xs_.size(); ++i) {
            double y = prefix_[i];
            // Clenshaw on the focused block
            double b1 = 0.0, b2 = 0.0;
            const double y2 = 2.0 * y;
            for (int k = deg; k >= 1; --k) {
                const double b = alphas[static_cast<std::size_t>(k - 1)] + y2 * b1 - b2;
                b2 = b1;
                b1 = b;
            }
            y = (y * b1 - b2) / beta;
            for (std::size_t s = static_cast<std::size_t>(block_) + 1; s < stages_.size(); ++s)
                y = cheb_eval(stages_[s], y);
            acc += std::fabs(y - sign_target(xs_[i]));
        }
        return acc / static_cast<double>(xs_.size());
    }

    std::vector<int> degrees_;
    std::vector<double> xs_;
    std::vector<double> prefix_;
    std::vector<ChebPoly> stages_;
    int block_ = 0;
};

}  // namespace detail

// Algorithm: for T generations, for each stage k, run DE on the stage's
// alpha block with the rest of the context fixed and install the best point
// if it improves the L1 objective, then do the same for beta_k under the
// regularized objective L1 + gamma beta^2. Populations persist across
// generations and are re-scored whenever the context has moved.
inline RccdeRun rccde_run_single(const std::vector<int>& merged_degrees,
                                 const RccdeOptions& opts, std::uint64_t seed) {
    if (opts.generations <= 0) throw InvalidInput("rccde: generations must be positive");
    if (merged_degrees.empty()) throw InvalidInput("rccde: no nonzero stage to fit");
    for (int d : merged_degrees)
        if (d < 1 || d > kMaxStageDegree) throw InvalidInput("rccde: stage degree out of range");

    Rng rng(seed);
    const int K = static_cast<int>(merged_degrees.size());

    // joint LHS draw for the initial context
    int joint_dim = K;
    for (int d : merged_degrees) joint_dim += d;
    Box joint_bounds;
    for (int d : merged_degrees) {
        for (int i = 0; i < d; ++i) joint_bounds.emplace_back(opts.alpha_lo, opts.alpha_hi);
        joint_bounds.emplace_back(opts.beta_lo, opts.beta_hi);
    }
    const std::vector<double> init = lhs_init(joint_dim, 1, joint_bounds, rng).front();

    RccdeRun run;
    run.seed = seed;
    std::size_t at = 0;
    for (int d : merged_degrees) {
        ChebPoly p;
        p.degree = d;
        p.alphas.assign(init.begin() + static_cast<std::ptrdiff_t>(at),
                        init.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(d)));
        at += static_cast<std::size_t>(d);
        p.beta = init[at++];
        run.context.stages.push_back(std::move(p));
    }

    detail::SignFitEval eval(merged_degrees, opts.grid);
    eval.set_context(run.context.stages);
    eval.focus(0);
    run.context.objective_value = eval.l1_full(run.context.stages);

    // persistent per-block populations
    std::vector<DEPopulation> alpha_pops, beta_pops;
    Box ab{{opts.alpha_lo, opts.alpha_hi}};
    Box bb{{opts.beta_lo, opts.beta_hi}};
    for (int d : merged_degrees) {
        Box bounds(static_cast<std::size_t>(d), ab.front());
        alpha_pops.push_back(make_de_population(d, std::max(4, opts.alpha_pop_per_dim * d),
                                                bounds, opts.F, opts.CR, rng));
        beta_pops.push_back(make_de_population(1, std::max(4, opts.beta_pop), bb, opts.F,
                                               opts.CR, rng));
    }
    std::vector<std::uint64_t> alpha_ver(static_cast<std::size_t>(K), ~0ULL);
    std::vector<std::uint64_t> beta_ver(static_cast<std::size_t>(K), ~0ULL);
    std::uint64_t version = 0;

    const bool anneal = opts.eps_anneal_start > opts.grid.eps && opts.grid.eps > 0.0;
    double cur_eps = anneal ? opts.eps_anneal_start : opts.grid.eps;
    if (anneal) {
        GridSpec g0 = opts.grid;
        g0.eps = cur_eps;
        eval.set_grid(g0);
        run.context.objective_value = eval.l1_full(run.context.stages);
    }

    for (int t = 1; t <= opts.generations; ++t) {
        if (anneal) {
            const int ramp = std::max(1, static_cast<int>(opts.anneal_fraction * opts.generations));
            const double frac = std::min(1.0, static_cast<double>(t - 1) / ramp);
            const double eps_t = opts.eps_anneal_start *
                                 std::pow(opts.grid.eps / opts.eps_anneal_start, frac);
            if (eps_t != cur_eps) {
                cur_eps = eps_t;
                GridSpec gt = opts.grid;
                gt.eps = cur_eps;
                eval.set_grid(gt);
                // objective values are grid-relative; rebase the context and
                // force population re-scoring
                eval.set_context(run.context.stages);
                run.context.objective_value = eval.l1_full(run.context.stages);
                ++version;
            }
        }
        for (int k = 0; k < K; ++k) {
            eval.set_context(run.context.stages);
            eval.focus(k);

            // alpha block, plain L1 objective
            Objective alpha_obj = [&](const std::vector<double>& a) {
                return eval.l1_with_alphas(a);
            };
            DEPopulation& ap = alpha_pops[static_cast<std::size_t>(k)];
            if (alpha_ver[static_cast<std::size_t>(k)] != version) {
                // share the context block with the population so the block
                // search explores around the best known solution
                ap.points[0] = run.context.stages[static_cast<std::size_t>(k)].alphas;
                refresh_fitness(ap, alpha_obj);
                alpha_ver[static_cast<std::size_t>(k)] = version;
            }
            for (int s = 0; s < opts.de_steps_per_install; ++s) de_step(ap, alpha_obj, rng);
            {
                const std::size_t b = ap.best_index();
                const double before = run.context.objective_value;
                if (ap.fitness[b] <= before) {
                    run.context.stages[static_cast<std::size_t>(k)].alphas = ap.points[b];
                    run.context.objective_value = ap.fitness[b];
                    ++version;
                    alpha_ver[static_cast<std::size_t>(k)] = version;  // self-consistent
                    eval.set_context(run.context.stages);
                    eval.focus(k);
                    run.installs.push_back({t, k, false, before, ap.fitness[b]});
                }
            }

            // beta, regularized objective
            const double gamma = opts.gamma;
            Objective beta_obj = [&](const std::vector<double>& b) {
                return eval.l1_with_beta(b[0]) + gamma * b[0] * b[0];
            };
            DEPopulation& bp = beta_pops[static_cast<std::size_t>(k)];
            if (beta_ver[static_cast<std::size_t>(k)] != version) {
                bp.points[0] = {run.context.stages[static_cast<std::size_t>(k)].beta};
                refresh_fitness(bp, beta_obj);
                beta_ver[static_cast<std::size_t>(k)] = version;
            }
            for (int s = 0; s < opts.de_steps_per_install; ++s) de_step(bp, beta_obj, rng);
            {
                const std::size_t b = bp.best_index();
                const double beta_cur = run.context.stages[static_cast<std::size_t>(k)].beta;
                const double reg_before =
                    run.context.objective_value + gamma * beta_cur * beta_cur;
                if (bp.fitness[b] <= reg_before) {
                    run.context.stages[static_cast<std::size_t>(k)].beta = bp.points[b][0];
                    ++version;
                    beta_ver[static_cast<std::size_t>(k)] = version;
                    eval.set_context(run.context.stages);
                    eval.focus(k);
                    run.context.objective_value = eval.l1_full(run.context.stages);
                    run.installs.push_back({t, k, true, reg_before, bp.fitness[b]});
                }
            }
        }
    }
    return run;
}

// ---------------------------------------------------------------------------
// Fit certificate
// ---------------------------------------------------------------------------

struct FitCertificate {
    std::vector<int> degrees;  // merged stage degrees
    std::vector<ChebPoly> stages;
    GridSpec grid;
    double l1 = 0.0;
    double linf = 0.0;
    std::uint64_t seed = 0;  // seed of the winning restart

    CompositeSpec to_composite() const {
        CompositeSpec c;
        c.degrees = degrees;
        c.stages = stages;
        return c;
    }
};

inline void to_json(nlohmann::json& j, const FitCertificate& c) {
    j = {{"degrees", c.degrees}, {"stages", c.stages}, {"grid", c.grid},
         {"l1", c.l1},           {"linf", c.linf},     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, FitCertificate& c) {
    c.degrees = j.at("degrees").get<std::vector<int>>();
    c.stages = j.at("stages").get<std::vector<ChebPoly>>();
    c.grid = j.at("grid").get<GridSpec>();
    c.l1 = j.at("l1").get<double>();
    c.linf = j.at("linf").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
}

inline std::pair<double, double> fit_errors(const CompositeSpec& c, const GridSpec& grid) {
    double l1 = 0.0, linf = 0.0;
    const auto xs = grid.points();
    for (double x : xs) {
        const double d = std::fabs(compose_eval(c, x) - sign_target(x));
        l1 += d;
        linf = std::max(linf, d);
    }
    return {l1 / static_cast<double>(xs.size()), linf};
}

// Fits the composite polynomial for `degrees` against 0.5 sgn(x): merges the
// degree vector, runs `opts.seeds` independent restarts, and returns the best
// context as a certificate.
inline FitCertificate rccde_optimize(const std::vector<int>& degrees, const RccdeOptions& opts,
                                     std::uint64_t master_seed,
                                     std::vector<RccdeRun>* runs_out = nullptr) {
    const std::vector<int> merged = merge(degrees);
    if (merged.empty()) throw InvalidInput("rccde_optimize: no nonzero stage");
    if (opts.seeds <= 0) throw InvalidInput("rccde_optimize: seeds must be positive");

    RccdeRun best;
    for (int s = 0; s < opts.seeds; ++s) {
        RccdeRun run = rccde_run_single(merged, opts, derive_seed(master_seed, 0x5eed, static_cast<std::uint64_t>(s)));
        if (runs_out) runs_out->push_back(run);
        if (run.context.objective_value < best.context.objective_value) best = std::move(run);
    }

    FitCertificate cert;
    cert.degrees = merged;
    cert.stages = best.context.stages;
    cert.grid = opts.grid;
    cert.seed = best.seed;
    // certificate errors are always reported on the uniform dead-zone grid,
    // independent of the spacing used while fitting
    GridSpec report = opts.grid;
    report.log_spacing = false;
    const auto [l1, linf] = fit_errors(cert.to_composite(), report);
    cert.l1 = l1;
    cert.linf = linf;
    return cert;
}

}  // namespace autofhe
