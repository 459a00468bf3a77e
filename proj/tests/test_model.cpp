#include <catch2/catch_amalgamated.hpp>

#include <sepr/model.hpp>
#include <sepr/rng.hpp>

using namespace sepr;

TEST_CASE("model parameters validate the geometry") {
    CHECK_NOTHROW(ModelParams(3, 1, 1.0));
    CHECK_THROWS_AS(ModelParams(3, 0, 1.0), std::invalid_argument);
    CHECK_NOTHROW(ModelParams(3, 3, 1.0)); // N = K still has disjoint blocks
    CHECK_THROWS_AS(ModelParams(3, 4, 1.0), std::invalid_argument); // overlapping reservoirs rejected
    CHECK_THROWS_AS(ModelParams(3, 1, -0.5), std::invalid_argument);
    ModelParams p(50, 2, 1.0);
    CHECK(p.epsilon * p.half_width == 1.0);
    CHECK(p.in_plus_block(50));
    CHECK(p.in_plus_block(49));
    CHECK_FALSE(p.in_plus_block(48));
    CHECK(p.in_minus_block(-50));
    CHECK(p.in_minus_block(-49));
    CHECK_FALSE(p.in_minus_block(-48));
}

TEST_CASE("birth factor on I+") {
    ModelParams p(6, 2, 1.0);
    DensityProfile u(6, 1.0);
    for (int x : {5, 6}) CHECK(birth_factor(p, u, x) == 0.0); // 1-u(x) = 0

    u.at(6) = 1.0;
    u.at(5) = 0.0;
    CHECK(birth_factor(p, u, 6) == 0.0);
    CHECK(birth_factor(p, u, 5) == 1.0);

    u.at(6) = 0.5;
    u.at(5) = 0.5;
    CHECK(birth_factor(p, u, 6) == Catch::Approx(0.5).margin(1e-15));
    CHECK(birth_factor(p, u, 5) == Catch::Approx(0.25).margin(1e-15));

    CHECK_THROWS_AS(birth_factor(p, u, 0), std::invalid_argument);
}

TEST_CASE("death factor on I-") {
    ModelParams p(6, 2, 1.0);
    DensityProfile u(6, 0.0);
    for (int x : {-6, -5}) CHECK(death_factor(p, u, x) == 0.0); // u(x) = 0

    ModelParams p1(6, 1, 1.0);
    DensityProfile v(6, 0.3);
    v.at(-6) = 1.0;
    CHECK(death_factor(p1, v, -6) == 1.0); // empty product

    DensityProfile w(6, 0.5);
    CHECK(death_factor(p, w, -6) == Catch::Approx(0.5).margin(1e-15));
    CHECK(death_factor(p, w, -5) == Catch::Approx(0.25).margin(1e-15));

    CHECK_THROWS_AS(death_factor(p, w, 0), std::invalid_argument);
}

TEST_CASE("birth and death factors stay in [0,1] for [0,1] profiles") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        ModelParams p(8, 3, 1.0);
        DensityProfile u(8);
        for (auto& v : u.values) v = rng.uniform();
        for (int x = 6; x <= 8; ++x) {
            const double d = birth_factor(p, u, x);
            CHECK(d >= 0.0);
            CHECK(d <= 1.0);
        }
        for (int x = -8; x <= -6; ++x) {
            const double d = death_factor(p, u, x);
            CHECK(d >= 0.0);
            CHECK(d <= 1.0);
        }
    }
}

TEST_CASE("for configurations exactly one reservoir site is active") {
    // exhaustive over all 2^K reservoir patterns, K <= 8
    for (int k = 1; k <= 8; ++k) {
        ModelParams p(10, k, 1.0);
        for (unsigned pattern = 0; pattern < (1u << k); ++pattern) {
            Configuration c(p);
            for (int x = -10; x <= 10; ++x) c.set(x, true); // bulk full
            for (int i = 0; i < k; ++i) c.set(10 - i, (pattern >> i) & 1u);
            int active = 0, active_site = Configuration::no_site;
            for (int x = 10 - k + 1; x <= 10; ++x)
                if (birth_factor(p, c, x) == 1.0) {
                    ++active;
                    active_site = x;
                }
            const bool full = pattern == (1u << k) - 1;
            CHECK(active == (full ? 0 : 1));
            if (!full) {
                int largest_empty = Configuration::no_site;
                for (int x = 10; x >= 10 - k + 1; --x)
                    if (!c.occupied(x)) { largest_empty = x; break; }
                CHECK(active_site == largest_empty);
                CHECK(c.top_empty_plus == largest_empty);
            } else {
                CHECK(c.top_empty_plus == Configuration::no_site);
            }
        }
    }
}

TEST_CASE("configuration caches survive random flips and exchanges") {
    Rng rng(11);
    ModelParams p(9, 4, 1.0);
    Configuration c(p);
    for (int step = 0; step < 5000; ++step) {
        if (rng.bernoulli(0.5)) {
            const int site = static_cast<int>(rng.below(19)) - 9;
            c.set(site, rng.bernoulli(0.5));
        } else {
            const int site = static_cast<int>(rng.below(18)) - 9;
            c.exchange(site);
        }
        REQUIRE(c.validate_caches());
    }
}

TEST_CASE("reflecting laplacian") {
    ModelParams p(5, 1, 0.0);
    DensityProfile u(5, 0.7);
    auto lap = reflecting_laplacian(u);
    for (double v : lap) CHECK(v == 0.0);

    for (int x = -5; x <= 5; ++x) u.at(x) = x;
    lap = reflecting_laplacian(u);
    for (int x = -4; x <= 4; ++x) CHECK(lap[static_cast<std::size_t>(x + 5)] == 0.0);
    CHECK(lap.back() == -1.0);
    CHECK(lap.front() == 1.0);

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        DensityProfile w(5);
        for (auto& v : w.values) v = rng.uniform();
        auto l = reflecting_laplacian(w);
        double sum = 0.0;
        for (double v : l) sum += v;
        CHECK(std::abs(sum) < 1e-13); // telescoping with reflecting ends
    }
}

TEST_CASE("lattice fold map") {
    CHECK(fold_site(5, 10) == 5);
    CHECK(fold_site(11, 10) == 10);
    CHECK(fold_site(32, 10) == -10);
    CHECK(fold_site(-11, 10) == -10);

    Rng rng(5);
    for (int n : {3, 10, 37}) {
        for (long long z = -10 * n; z <= 10 * n; ++z) {
            const int y = fold_site(z, n);
            CHECK(y >= -n);
            CHECK(y <= n);
            CHECK(fold_site(-z, n) == -y);
            CHECK(fold_site(z + 2 * (2 * n + 1), n) == y); // periodic up to reflection pattern
        }
        // preimages fold back correctly
        for (int trial = 0; trial < 20; ++trial) {
            const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * n + 1))) - n;
            for (long long z : fold_preimages(y, n, -20 * n, 20 * n)) CHECK(fold_site(z, n) == y);
        }
    }
}

TEST_CASE("continuum fold map") {
    CHECK(fold_point(0.5) == Catch::Approx(0.5).margin(1e-15));
    CHECK(fold_point(1.5) == Catch::Approx(0.5).margin(1e-15));
    CHECK(fold_point(4.3) == Catch::Approx(0.3).margin(1e-12));
    Rng rng(9);
    for (int trial = 0; trial < 1000; ++trial) {
        const double r = (rng.uniform() - 0.5) * 40.0;
        CHECK(std::abs(fold_point(r)) <= 1.0);
        CHECK(fold_point(r + 4.0) == Catch::Approx(fold_point(r)).margin(1e-12));
        CHECK(fold_point(-r) == Catch::Approx(-fold_point(r)).margin(1e-12));
    }
}

TEST_CASE("scaled fold map") {
    CHECK(fold_site_scaled(3, 10) == 3);
    CHECK(fold_site_scaled(20, 10) == 0);
    CHECK(fold_site_scaled(-10, 10) == -10);
}
