#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "autofhe/chebyshev.hpp"
#include "autofhe/rng.hpp"

using namespace autofhe;

namespace {

// independent oracle: direct three-term recurrence sum, no Clenshaw
double cheb_eval_direct(const ChebPoly& p, double x) {
    double t_prev = 1.0, t_cur = x;
    double acc = p.alpha0;
    for (int i = 1; i <= p.degree; ++i) {
        acc += p.alphas[static_cast<std::size_t>(i - 1)] * t_cur;
        const double t_next = 2.0 * x * t_cur - t_prev;
        t_prev = t_cur;
        t_cur = t_next;
    }
    return acc / p.beta;
}

ChebPoly random_poly(Rng& rng, int degree, double amp = 1.0) {
    std::vector<double> a(static_cast<std::size_t>(degree));
    for (double& c : a) c = rng.uniform(-amp, amp);
    return ChebPoly(std::move(a), rng.uniform(0.5, 2.0));
}

// exhaustive reference merge: drop zeros, then one greedy left-to-right pass
std::vector<int> merge_oracle(std::vector<int> v) {
    std::vector<int> nz;
    for (int d : v)
        if (d) nz.push_back(d);
    std::vector<int> out;
    for (int d : nz) {
        if (!out.empty() && out.back() * d <= 31)
            out.back() *= d;
        else
            out.push_back(d);
    }
    return out;
}

std::vector<std::vector<int>> all_genomes(int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(k), 0);
    const int opts[5] = {0, 1, 3, 5, 7};
    const int total = static_cast<int>(std::pow(5, k));
    for (int idx = 0; idx < total; ++idx) {
        int t = idx;
        for (int i = 0; i < k; ++i) {
            cur[static_cast<std::size_t>(i)] = opts[t % 5];
            t /= 5;
        }
        out.push_back(cur);
    }
    return out;
}

}  // namespace

TEST_CASE("cheb_eval basic values") {
    CHECK(cheb_eval(ChebPoly({1.0}, 1.0), 0.5) == Catch::Approx(0.5));      // T_1
    CHECK(cheb_eval(ChebPoly({0.0, 1.0}, 2.0), 1.0) == Catch::Approx(0.5)); // T_2(1)/2
}

TEST_CASE("cheb_eval rejects invalid input") {
    CHECK_THROWS_AS(cheb_eval(ChebPoly({1.0}, 1.0), std::nan("")), InvalidInput);
    ChebPoly p({1.0}, 1.0);
    p.beta = 0.0;
    CHECK_THROWS_AS(cheb_eval(p, 0.5), InvalidInput);
    CHECK_THROWS_AS(ChebPoly({}, 1.0), InvalidInput);
}

TEST_CASE("Clenshaw matches direct recurrence") {
    Rng rng(42);
    for (int trial = 0; trial < 2000; ++trial) {
        const int deg = 1 + static_cast<int>(rng.index(31));
        const ChebPoly p = random_poly(rng, deg);
        const double x = rng.uniform(-1.0, 1.0);
        const double got = cheb_eval(p, x);
        const double want = cheb_eval_direct(p, x);
        CHECK_THAT(got, Catch::Matchers::WithinRel(want, 1e-12) ||
                            Catch::Matchers::WithinAbs(want, 1e-12));
    }
}

TEST_CASE("merge drops zeros and folds small products") {
    CHECK(merge({3, 5, 0, 0, 0, 0}) == std::vector<int>{15});
    CHECK(merge({7, 7, 0, 0, 0, 0}) == (std::vector<int>{7, 7}));
    CHECK(merge({0, 3, 0, 5, 1, 0}) == std::vector<int>{15});
    CHECK(merge({}) == std::vector<int>{});
}

TEST_CASE("merge oracle agreement and idempotence, exhaustive K=3") {
    for (const auto& g : all_genomes(3)) {
        const auto m = merge(g);
        CHECK(m == merge_oracle(g));
        CHECK(merge(m) == m);
        CHECK(total_degree(m) == total_degree(g));
    }
}

TEST_CASE("depth handles the published degree sets") {
    CHECK(depth_of({15, 15, 27}) == 14);
    CHECK(depth_of({0, 0, 0, 0, 0, 0}) == 0);
    CHECK(depth_of({5, 5}) == 6);  // merges to 25, 1 + ceil(log2 26)
    CHECK(depth_of({1, 0, 0, 0, 0, 0}) == 2);
    CHECK(depth_of({1, 1, 1}) == 2);
    CHECK_THROWS_AS(depth_of({32}), InvalidInput);
}

TEST_CASE("depth is monotone on the option ladder, exhaustive K=2") {
    const int opts[5] = {0, 1, 3, 5, 7};
    for (const auto& g : all_genomes(2)) {
        const int base = depth_of(g);
        for (std::size_t slot = 0; slot < g.size(); ++slot) {
            int rung = 0;
            while (opts[rung] != g[slot]) ++rung;
            if (rung == 4) continue;
            auto up = g;
            up[slot] = opts[rung + 1];
            CHECK(depth_of(up) >= base);
        }
    }
}

TEST_CASE("depth of merged vector never exceeds unmerged stage-sum, K<=3") {
    for (int k = 1; k <= 3; ++k) {
        for (const auto& g : all_genomes(k)) {
            std::vector<int> nz;
            for (int d : g)
                if (d) nz.push_back(d);
            if (nz.empty() || total_degree(nz) == 1) continue;
            int unmerged = 1;
            for (int d : nz) unmerged += ceil_log2(d + 1);
            CHECK(depth_of(g) <= unmerged);
        }
    }
}

TEST_CASE("compose_eval identity and single linear stage") {
    CompositeSpec ident;
    ident.degrees = {0, 0, 0, 0, 0, 0};
    CHECK(compose_eval(ident, -1.7) == Catch::Approx(-1.7));

    CompositeSpec lin = merge_stages({1, 0, 0, 0, 0, 0}, {ChebPoly({2.0}, 1.0)});
    CHECK(compose_eval(lin, 0.3) == Catch::Approx(0.6));
}

TEST_CASE("compose_eval matches manual two-stage composition") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const ChebPoly f1 = random_poly(rng, 3);
        const ChebPoly f2 = random_poly(rng, 3);
        // degrees (3,3) merge to 9; evaluation must equal f2(f1(x))
        const CompositeSpec c = merge_stages({3, 3, 0, 0, 0, 0}, {f1, f2});
        REQUIRE(c.degrees == std::vector<int>{9});
        const double x = 0.4;
        CHECK_THAT(compose_eval(c, x),
                   Catch::Matchers::WithinAbs(cheb_eval(f2, cheb_eval(f1, x)), 1e-10));
    }
}

TEST_CASE("merge preserves composite value on [-1,1]") {
    Rng rng(2024);
    const std::vector<std::vector<int>> genomes = {
        {3, 5, 0, 0, 0, 0}, {3, 3, 3, 0, 0, 0}, {1, 3, 1, 5, 0, 0},
        {5, 5, 1, 0, 0, 0}, {7, 3, 0, 1, 0, 0}, {1, 1, 1, 1, 1, 1},
    };
    for (const auto& g : genomes) {
        std::vector<ChebPoly> slot_stages;
        for (int d : g)
            if (d) slot_stages.push_back(random_poly(rng, d, 0.8));
        const CompositeSpec merged = merge_stages(g, slot_stages);
        CHECK(total_degree(merged.degrees) == total_degree(g));
        for (int i = 0; i <= 100; ++i) {
            const double x = -1.0 + 0.02 * i;
            double y = x;
            for (const auto& s : slot_stages) y = cheb_eval(s, y);
            CHECK_THAT(compose_eval(merged, x), Catch::Matchers::WithinAbs(y, 1e-10));
        }
    }
}

TEST_CASE("CompositeSpec JSON round trip is stable") {
    Rng rng(5);
    CompositeSpec c = merge_stages({3, 5, 0, 0, 7, 0},
                                   {random_poly(rng, 3), random_poly(rng, 5),
                                    random_poly(rng, 7)});
    nlohmann::json j = c;
    const CompositeSpec back = j.get<CompositeSpec>();
    nlohmann::json j2 = back;
    CHECK(j.dump() == j2.dump());
    CHECK(back.degrees == c.degrees);
    for (int i = 0; i <= 20; ++i) {
        const double x = -1.0 + 0.1 * i;
        CHECK(compose_eval(back, x) == compose_eval(c, x));
    }
}
