#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "autofhe/chebyshev.hpp"
#include "autofhe/errors.hpp"

namespace autofhe {

enum class Branch { identity, quadratic, composite };

inline const char* to_string(Branch b) {
    switch (b) {
        case Branch::identity: return "identity";
        case Branch::quadratic: return "quadratic";
        case Branch::composite: return "composite";
    }
    return "?";
}

// Branch is a total function of the slot degree vector: identity when all
// degrees are zero, quadratic when the degree product is 1 with at least one
// nonzero slot, composite otherwise.
inline Branch branch_of(const std::vector<int>& degrees) {
    bool any = false;
    for (int d : degrees)
        if (d != 0) any = true;
    if (!any) return Branch::identity;
    return total_degree(degrees) == 1 ? Branch::quadratic : Branch::composite;
}

struct QuadCoeffs {
    double a2 = 0.0, a1 = 0.5, a0 = 0.0;
};

// Composite-branch inputs outside [-B_in, B_in] are clamped; callers that care
// pass an EvalStats to observe how often that happened.
struct EvalStats {
    std::atomic<std::uint64_t> overflow{0};
};

struct EvoReLUSpec {
    Branch branch = Branch::identity;
    CompositeSpec composite;       // composite branch only
    std::vector<QuadCoeffs> quad;  // quadratic branch, one entry per channel
    double b_in = 1.0;
    double b_out = 1.0;
    bool folded = false;  // deployment form: expects pre-scaled input

    void validate() const {
        if (!(b_in > 0.0) || !std::isfinite(b_in) || !(b_out > 0.0) || !std::isfinite(b_out))
            throw InvalidInput("EvoReLUSpec: bounds must be positive and finite");
        if (branch == Branch::composite) composite.validate();
        if (branch == Branch::quadratic && quad.empty())
            throw InvalidInput("EvoReLUSpec: quadratic branch needs coefficients");
    }

    int depth() const {
        switch (branch) {
            case Branch::identity: return 0;
            case Branch::quadratic: return 2;
            case Branch::composite: return composite.depth();
        }
        return 0;
    }
};

inline EvoReLUSpec make_identity() { return {}; }

inline EvoReLUSpec make_quadratic(double a2, int channels = 1, double a1 = 0.5, double a0 = 0.0) {
    EvoReLUSpec s;
    s.branch = Branch::quadratic;
    s.quad.assign(static_cast<std::size_t>(std::max(1, channels)), QuadCoeffs{a2, a1, a0});
    return s;
}

inline EvoReLUSpec make_composite(CompositeSpec c, double b_in, double b_out) {
    EvoReLUSpec s;
    s.branch = Branch::composite;
    s.composite = std::move(c);
    s.b_in = b_in;
    s.b_out = b_out;
    s.validate();
    return s;
}

// Scaled activation form: identity -> x; quadratic -> a2 x^2 + a1 x + a0
// (channel-wise); composite -> x * (F(x / B_in) + 0.5).
inline double evorelu_eval(const EvoReLUSpec& s, double x, int channel = 0,
                           EvalStats* stats = nullptr) {
    if (!std::isfinite(x)) throw InvalidInput("evorelu_eval: non-finite x");
    switch (s.branch) {
        case Branch::identity:
            return x;
        case Branch::quadratic: {
            const auto& q = s.quad[static_cast<std::size_t>(channel) % s.quad.size()];
            return (q.a2 * x + q.a1) * x + q.a0;
        }
        case Branch::composite: {
            double xc = x;
            if (std::fabs(xc) > s.b_in) {
                if (stats) stats->overflow.fetch_add(1, std::memory_order_relaxed);
                xc = std::clamp(xc, -s.b_in, s.b_in);
            }
            return xc * (compose_eval(s.composite, xc / s.b_in) + 0.5);
        }
    }
    return x;
}

// Training-time gradient rule: identity passes through, quadratic is analytic,
// composite is replaced by the exact ReLU derivative indicator (0 at x = 0).
inline double evorelu_grad(const EvoReLUSpec& s, double x, int channel = 0) {
    switch (s.branch) {
        case Branch::identity:
            return 1.0;
        case Branch::quadratic: {
            const auto& q = s.quad[static_cast<std::size_t>(channel) % s.quad.size()];
            return 2.0 * q.a2 * x + q.a1;
        }
        case Branch::composite:
            return x > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

enum class ErrMetric { L1, Linf };

// Distance to exact ReLU over a grid; L1 is the mean absolute deviation.
inline double approx_error(const EvoReLUSpec& s, std::span<const double> grid,
                           ErrMetric metric) {
    if (grid.empty()) throw InvalidInput("approx_error: empty grid");
    double acc = 0.0;
    for (double x : grid) {
        const double d = std::fabs(evorelu_eval(s, x) - std::max(x, 0.0));
        if (metric == ErrMetric::Linf)
            acc = std::max(acc, d);
        else
            acc += d;
    }
    return metric == ErrMetric::Linf ? acc : acc / static_cast<double>(grid.size());
}

// ---------------------------------------------------------------------------
// Scale folding
// ---------------------------------------------------------------------------

// A linear neighbor as seen by the fold transform: y_i = weight_i * x_i + bias_i.
// Convolution / batch-norm folding in the network engine applies the same
// scalar factors to its full tensors.
struct LinearOp {
    enum class Kind { convbn, affine, poly, bootstrap };
    Kind kind = Kind::convbn;
    std::vector<double> weight;
    std::vector<double> bias;
};

struct FoldResult {
    LinearOp prev;
    LinearOp next;
    EvoReLUSpec act;
};

// Removes the explicit x1/B_in and xB_out scaling nodes around an activation
// by rescaling the neighbors and, for the composite branch, folding the ratio
// B_in/B_out into the final stage coefficients (the +0.5 constant moves into
// the stage's T_0 term, which is a plaintext change). The folded pipeline
// computes next(EvoReLU(prev_out)) exactly, with the activation evaluated on
// the pre-scaled value, and consumes no extra levels.
inline FoldResult scale_fold(const EvoReLUSpec& s, const LinearOp& prev, const LinearOp& next) {
    s.validate();
    if (prev.kind == LinearOp::Kind::bootstrap || next.kind == LinearOp::Kind::bootstrap)
        throw FoldTargetError("scale_fold: neighbor is a bootstrap, fold the other side");

    FoldResult out{prev, next, s};
    if (s.branch == Branch::identity) return out;  // nothing to scale

    for (double& w : out.prev.weight) w /= s.b_in;
    for (double& b : out.prev.bias) b /= s.b_in;
    for (double& w : out.next.weight) w *= s.b_out;

    const double ratio = s.b_in / s.b_out;
    if (s.branch == Branch::quadratic) {
        for (auto& q : out.act.quad) {
            q.a2 *= s.b_in * ratio;
            q.a1 *= ratio;
            q.a0 /= s.b_out;
        }
    } else {
        ChebPoly& last = out.act.composite.stages.back();
        for (double& a : last.alphas) a *= ratio;
        last.alpha0 = ratio * last.alpha0 + 0.5 * (ratio - 1.0) * last.beta;
    }
    out.act.b_in = 1.0;
    out.act.b_out = 1.0;
    out.act.folded = true;
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const QuadCoeffs& q) {
    j = {q.a2, q.a1, q.a0};
}

inline void from_json(const nlohmann::json& j, QuadCoeffs& q) {
    q.a2 = j.at(0).get<double>();
    q.a1 = j.at(1).get<double>();
    q.a0 = j.at(2).get<double>();
}

inline void to_json(nlohmann::json& j, const EvoReLUSpec& s) {
    j = {{"branch", to_string(s.branch)},
         {"b_in", s.b_in},
         {"b_out", s.b_out},
         {"folded", s.folded}};
    if (s.branch == Branch::composite) j["composite"] = s.composite;
    if (s.branch == Branch::quadratic) j["quad"] = s.quad;
}

inline void from_json(const nlohmann::json& j, EvoReLUSpec& s) {
    const std::string b = j.at("branch").get<std::string>();
    if (b == "identity")
        s.branch = Branch::identity;
    else if (b == "quadratic")
        s.branch = Branch::quadratic;
    else if (b == "composite")
        s.branch = Branch::composite;
    else
        throw InvalidInput("EvoReLUSpec: unknown branch tag " + b);
    s.b_in = j.at("b_in").get<double>();
    s.b_out = j.at("b_out").get<double>();
    s.folded = j.value("folded", false);
    if (s.branch == Branch::composite) s.composite = j.at("composite").get<CompositeSpec>();
    if (s.branch == Branch::quadratic) s.quad = j.at("quad").get<std::vector<QuadCoeffs>>();
    s.validate();
}

}  // namespace autofhe
