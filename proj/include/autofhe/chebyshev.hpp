#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "autofhe/errors.hpp"

namespace autofhe {

// Largest single-stage polynomial degree the evaluation backend supports;
// adjacent sub-polynomials are merged only while their degree product stays
// within this bound.
inline constexpr int kMaxStageDegree = 31;

// Per-slot degree options of the activation search space.
inline constexpr int kDegreeLadder[5] = {0, 1, 3, 5, 7};
inline constexpr int kCompositeSlots = 6;

inline int ceil_log2(int v) {
    return v <= 1 ? 0 : static_cast<int>(std::bit_width(static_cast<unsigned>(v - 1)));
}

// One sub-polynomial in the Chebyshev basis of the first kind:
//   f(x) = (alpha0*T_0(x) + sum_{i=1..degree} alphas[i-1]*T_i(x)) / beta
// alpha0 defaults to zero (the sign-approximation target is odd); it is kept
// so that merged stages and fold transforms stay exactly representable.
struct ChebPoly {
    int degree = 1;
    std::vector<double> alphas;  // coefficients of T_1..T_degree
    double beta = 1.0;
    double alpha0 = 0.0;

    ChebPoly() : alphas{1.0} {}
    ChebPoly(std::vector<double> a, double b, double a0 = 0.0)
        : degree(static_cast<int>(a.size())), alphas(std::move(a)), beta(b), alpha0(a0) {
        validate();
    }

    void validate() const {
        if (degree < 1 || static_cast<int>(alphas.size()) != degree)
            throw InvalidInput("ChebPoly: degree/alphas mismatch");
        if (degree > kMaxStageDegree)
            throw InvalidInput("ChebPoly: stage degree exceeds backend limit");
        if (beta == 0.0 || !std::isfinite(beta))
            throw InvalidInput("ChebPoly: beta must be finite and nonzero");
        for (double a : alphas)
            if (!std::isfinite(a)) throw InvalidInput("ChebPoly: non-finite coefficient");
        if (!std::isfinite(alpha0)) throw InvalidInput("ChebPoly: non-finite alpha0");
    }
};

// Clenshaw recurrence; stable on [-1,1] and well defined (analytic
// continuation of the recurrence) outside it.
inline double cheb_eval(const ChebPoly& p, double x) {
    if (!std::isfinite(x)) throw InvalidInput("cheb_eval: non-finite x");
    if (p.beta == 0.0) throw InvalidInput("cheb_eval: beta = 0");
    double b1 = 0.0, b2 = 0.0;
    const double x2 = 2.0 * x;
    for (int k = p.degree; k >= 1; --k) {
        const double b = p.alphas[static_cast<std::size_t>(k - 1)] + x2 * b1 - b2;
        b2 = b1;
        b1 = b;
    }
    return (p.alpha0 + x * b1 - b2) / p.beta;
}

// ---------------------------------------------------------------------------
// Degree-vector algebra
// ---------------------------------------------------------------------------

// Drops identity placeholders (degree 0) and greedily merges adjacent stages
// left to right while the merged degree stays <= kMaxStageDegree. Idempotent:
// after one pass every adjacent product exceeds the bound.
inline std::vector<int> merge(const std::vector<int>& degrees) {
    std::vector<int> merged;
    for (int d : degrees) {
        if (d < 0) throw InvalidInput("merge: negative degree");
        if (d == 0) continue;
        if (!merged.empty() && merged.back() * d <= kMaxStageDegree)
            merged.back() *= d;
        else
            merged.push_back(d);
    }
    return merged;
}

inline long long total_degree(const std::vector<int>& degrees) {
    long long t = 1;
    for (int d : degrees)
        if (d != 0) t *= d;
    return t;
}

// Multiplicative depth of one activation given its slot degree vector:
// identity 0, quadratic 2, otherwise 1 + sum ceil(log2(d_k+1)) over the
// merged stages (BSGS evaluation, one extra level for the outer product).
inline int depth_of(const std::vector<int>& degrees) {
    const std::vector<int> m = merge(degrees);
    if (m.empty()) return 0;
    for (int d : m)
        if (d > kMaxStageDegree)
            throw InvalidInput("depth_of: merged stage degree exceeds backend limit");
    if (total_degree(m) == 1) return 2;
    int depth = 1;
    for (int d : m) depth += ceil_log2(d + 1);
    return depth;
}

// ---------------------------------------------------------------------------
// Monomial conversions (used only to merge stage coefficients; merged degrees
// never exceed 31, which keeps double precision adequate)
// ---------------------------------------------------------------------------

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

// monomial coefficient rows of T_0..T_n
inline std::vector<std::vector<double>> cheb_basis_mono(int n) {
    std::vector<std::vector<double>> t(static_cast<std::size_t>(n) + 1);
    t[0] = {1.0};
    if (n >= 1) t[1] = {0.0, 1.0};
    for (int i = 2; i <= n; ++i) {
        std::vector<double> cur(static_cast<std::size_t>(i) + 1, 0.0);
        for (std::size_t j = 0; j < t[static_cast<std::size_t>(i - 1)].size(); ++j)
            cur[j + 1] += 2.0 * t[static_cast<std::size_t>(i - 1)][j];
        for (std::size_t j = 0; j < t[static_cast<std::size_t>(i - 2)].size(); ++j)
            cur[j] -= t[static_cast<std::size_t>(i - 2)][j];
        t[static_cast<std::size_t>(i)] = std::move(cur);
    }
    return t;
}

inline std::vector<double> cheb_to_mono(const ChebPoly& p) {
    const auto basis = cheb_basis_mono(p.degree);
    std::vector<double> mono(static_cast<std::size_t>(p.degree) + 1, 0.0);
    mono[0] = p.alpha0;
    for (int i = 1; i <= p.degree; ++i)
        for (std::size_t j = 0; j < basis[static_cast<std::size_t>(i)].size(); ++j)
            mono[j] += p.alphas[static_cast<std::size_t>(i - 1)] * basis[static_cast<std::size_t>(i)][j];
    for (double& c : mono) c /= p.beta;
    return mono;
}

// exact re-projection by back substitution (leading coefficient of T_n is
// 2^(n-1) for n >= 1)
inline ChebPoly mono_to_cheb(std::vector<double> mono) {
    while (mono.size() > 1 && mono.back() == 0.0) mono.pop_back();
    const int n = static_cast<int>(mono.size()) - 1;
    const auto basis = cheb_basis_mono(n);
    std::vector<double> cheb(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = n; k >= 1; --k) {
        const double lead = std::ldexp(1.0, k - 1);  // 2^(k-1)
        const double c = mono[static_cast<std::size_t>(k)] / lead;
        cheb[static_cast<std::size_t>(k)] = c;
        for (std::size_t j = 0; j < basis[static_cast<std::size_t>(k)].size(); ++j)
            mono[j] -= c * basis[static_cast<std::size_t>(k)][j];
    }
    cheb[0] = mono[0];
    ChebPoly out;
    out.degree = std::max(1, n);
    out.alpha0 = cheb[0];
    out.alphas.assign(cheb.begin() + 1, cheb.end());
    if (out.alphas.empty()) out.alphas.push_back(0.0);
    out.beta = 1.0;
    return out;
}

// outer(inner(x)) as a single Chebyshev stage; requires the degree product to
// stay within the backend limit
inline ChebPoly compose(const ChebPoly& inner, const ChebPoly& outer) {
    if (inner.degree * outer.degree > kMaxStageDegree)
        throw InvalidInput("compose: merged degree exceeds backend limit");
    const std::vector<double> g = cheb_to_mono(inner);
    std::vector<double> acc{outer.alpha0};
    std::vector<double> t_prev{1.0};  // T_0(g)
    std::vector<double> t_cur = g;    // T_1(g)
    for (int i = 1; i <= outer.degree; ++i) {
        const double a = outer.alphas[static_cast<std::size_t>(i - 1)];
        if (acc.size() < t_cur.size()) acc.resize(t_cur.size(), 0.0);
        for (std::size_t j = 0; j < t_cur.size(); ++j) acc[j] += a * t_cur[j];
        if (i < outer.degree) {
            std::vector<double> t_next = poly_mul(g, t_cur);
            for (double& c : t_next) c *= 2.0;
            if (t_next.size() < t_prev.size()) t_next.resize(t_prev.size(), 0.0);
            for (std::size_t j = 0; j < t_prev.size(); ++j) t_next[j] -= t_prev[j];
            t_prev = std::move(t_cur);
            t_cur = std::move(t_next);
        }
    }
    for (double& c : acc) c /= outer.beta;
    return mono_to_cheb(std::move(acc));
}

// ---------------------------------------------------------------------------
// CompositeSpec
// ---------------------------------------------------------------------------

// A composite polynomial F = f_K o ... o f_1. `degrees` is the slot degree
// vector (identity placeholders allowed); `stages` holds one ChebPoly per
// merged nonzero degree, aligned with merge(degrees).
struct CompositeSpec {
    std::vector<int> degrees;
    std::vector<ChebPoly> stages;
    int slot_count = kCompositeSlots;

    std::vector<int> merged() const { return merge(degrees); }
    long long degree_product() const { return total_degree(degrees); }
    int depth() const { return depth_of(degrees); }
    bool is_identity() const { return merged().empty(); }

    void validate() const {
        const auto m = merged();
        if (m.size() != stages.size())
            throw InvalidInput("CompositeSpec: stages misaligned with merged degrees");
        for (std::size_t i = 0; i < m.size(); ++i) {
            stages[i].validate();
            if (stages[i].degree != m[i])
                throw InvalidInput("CompositeSpec: stage degree mismatch");
        }
    }
};

inline double compose_eval(const CompositeSpec& c, double x) {
    if (!std::isfinite(x)) throw InvalidInput("compose_eval: non-finite x");
    double y = x;
    for (const ChebPoly& s : c.stages) y = cheb_eval(s, y);
    return y;
}

// Assembles a composite from per-nonzero-slot stages, merging adjacent stages
// (with coefficient composition) wherever the degree product allows. The
// result evaluates to the same function as applying the slot stages in order.
inline CompositeSpec merge_stages(const std::vector<int>& degrees,
                                  const std::vector<ChebPoly>& slot_stages) {
    std::vector<int> nonzero;
    for (int d : degrees)
        if (d != 0) nonzero.push_back(d);
    if (nonzero.size() != slot_stages.size())
        throw InvalidInput("merge_stages: one stage per nonzero degree required");
    CompositeSpec out;
    std::vector<int> acc;  // nominal merged degrees, tracked alongside stages
    for (std::size_t i = 0; i < slot_stages.size(); ++i) {
        if (slot_stages[i].degree != nonzero[i])
            throw InvalidInput("merge_stages: stage degree mismatch");
        if (!acc.empty() && acc.back() * nonzero[i] <= kMaxStageDegree) {
            acc.back() *= nonzero[i];
            out.stages.back() = compose(out.stages.back(), slot_stages[i]);
        } else {
            acc.push_back(nonzero[i]);
            out.stages.push_back(slot_stages[i]);
        }
    }
    // composition can drop trailing coefficients that cancel exactly; pad back
    // to the nominal merged degree so stages stay aligned with merge(degrees)
    for (std::size_t k = 0; k < acc.size(); ++k) {
        if (out.stages[k].degree < acc[k]) {
            out.stages[k].alphas.resize(static_cast<std::size_t>(acc[k]), 0.0);
            out.stages[k].degree = acc[k];
        }
    }
    out.degrees = acc;
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ChebPoly& p) {
    j = {{"alphas", p.alphas}, {"beta", p.beta}};
    if (p.alpha0 != 0.0) j["alpha0"] = p.alpha0;
}

inline void from_json(const nlohmann::json& j, ChebPoly& p) {
    p.alphas = j.at("alphas").get<std::vector<double>>();
    p.degree = static_cast<int>(p.alphas.size());
    p.beta = j.at("beta").get<double>();
    p.alpha0 = j.value("alpha0", 0.0);
    p.validate();
}

inline void to_json(nlohmann::json& j, const CompositeSpec& c) {
    j = {{"degrees", c.degrees}, {"stages", c.stages}, {"k", c.slot_count}};
}

inline void from_json(const nlohmann::json& j, CompositeSpec& c) {
    c.degrees = j.at("degrees").get<std::vector<int>>();
    c.stages = j.at("stages").get<std::vector<ChebPoly>>();
    c.slot_count = j.value("k", kCompositeSlots);
    c.validate();
}

}  // namespace autofhe
