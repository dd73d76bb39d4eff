#include <catch_amalgamated.hpp>

#include <sstream>

#include "elldet/harness.hpp"

using namespace elldet;

namespace {

RunConfig small_config() {
    RunConfig cfg;
    cfg.seed = 42;
    cfg.identities = {IdentityId::SYL_BIN, IdentityId::THM21, IdentityId::CN_SUM};
    cfg.grid = {{1, 1}, {2, 1}};
    cfg.draws_per_cell = 2;
    cfg.tolerance = 1e-8;
    return cfg;
}

} // namespace

TEST_CASE("sampling is deterministic per stream") {
    SamplerOptions opt;
    Rng a(7, Rng::stream_tag(1, 2, 3, 4));
    Rng b(7, Rng::stream_tag(1, 2, 3, 4));
    auto pa = sample_params(IdentityId::THM21, 2, 2, a, opt);
    auto pb = sample_params(IdentityId::THM21, 2, 2, b, opt);
    const auto& fa = std::get<EllipticFParams>(pa);
    const auto& fb = std::get<EllipticFParams>(pb);
    CHECK(fa.s1 == fb.s1);
    CHECK(fa.t2 == fb.t2);
    CHECK(fa.bn.q == fb.bn.q);
}

TEST_CASE("sampler rejects non-generic territory with a named offender") {
    SamplerOptions opt;
    opt.min_theta = 0.999e0; // impossible floor; every draw is rejected
    opt.max_retries = 5;
    Rng rng(1, 2);
    try {
        sample_params(IdentityId::THM21, 2, 2, rng, opt);
        FAIL("expected genericity_error");
    } catch (const genericity_error& e) {
        CHECK(std::string(e.what()).find("theta") != std::string::npos);
    }
}

TEST_CASE("suite runs are byte-identical for the same seed and config") {
    RunConfig cfg = small_config();
    SuiteSummary s1, s2;
    std::string r1 = run_suite_to_string(cfg, &s1);
    std::string r2 = run_suite_to_string(cfg, &s2);
    CHECK(r1 == r2);
    CHECK(s1.total == 12);
    CHECK(s1.passed == 12);

    SECTION("parallel execution produces the same bytes") {
        RunConfig par = cfg;
        par.jobs = 4;
        CHECK(run_suite_to_string(par) == r1);
    }
    SECTION("a different seed produces a different report") {
        RunConfig other = cfg;
        other.seed = 43;
        CHECK(run_suite_to_string(other) != r1);
    }
}

TEST_CASE("exit summary counts failures") {
    RunConfig cfg = small_config();
    cfg.tolerance = 1e-40; // nothing passes at an absurd tolerance
    SuiteSummary s;
    run_suite_to_string(cfg, &s);
    CHECK(s.passed < s.total);
    CHECK(s.worst_residual > 0);
}

TEST_CASE("output formats") {
    RunConfig cfg = small_config();
    cfg.identities = {IdentityId::SYL_BIN};
    cfg.grid = {{2, 3}};
    cfg.draws_per_cell = 1;

    SECTION("json stream: header, one case per line, summary") {
        std::string out = run_suite_to_string(cfg);
        std::istringstream is(out);
        std::string line;
        std::vector<nlohmann::json> lines;
        while (std::getline(is, line)) lines.push_back(nlohmann::json::parse(line));
        REQUIRE(lines.size() == 3);
        CHECK(lines[0]["schema"] == 1);
        CHECK(lines[0]["rng"] == "splitmix64-ctr/1");
        CHECK(lines[1]["identity"] == "syl_bin");
        CHECK(lines[1]["passed"] == true);
        CHECK(lines[2].contains("summary"));
    }
    SECTION("csv stream") {
        cfg.output_format = OutputFormat::csv;
        std::string out = run_suite_to_string(cfg);
        CHECK(out.rfind("identity,r1,r2,draw,residual,passed\n", 0) == 0);
        CHECK(out.find("syl_bin,2,3,0,") != std::string::npos);
    }
    SECTION("text stream") {
        cfg.output_format = OutputFormat::text;
        std::string out = run_suite_to_string(cfg);
        CHECK(out.find("pass syl_bin") != std::string::npos);
    }
}

TEST_CASE("config parsing reports the offending field") {
    CHECK_THROWS_WITH(config_from_json({{"identities", {"nope"}}}),
                      Catch::Matchers::ContainsSubstring("identities"));
    CHECK_THROWS_WITH(config_from_json({{"output_format", "yaml"}}),
                      Catch::Matchers::ContainsSubstring("output_format"));
    CHECK_THROWS_WITH(config_from_json({{"grid", {1, 2}}}),
                      Catch::Matchers::ContainsSubstring("grid"));

    nlohmann::json good{{"seed", 9},
                        {"identities", {"thm21", "rcg"}},
                        {"grid", {{2, 2}, {2, 3}}},
                        {"draws_per_cell", 3},
                        {"tolerance", 1e-8},
                        {"p_modulus_max", 0.5},
                        {"output_format", "csv"}};
    RunConfig cfg = config_from_json(good);
    CHECK(cfg.seed == 9);
    CHECK(cfg.identities.size() == 2);
    CHECK(cfg.grid.size() == 2);
    CHECK(cfg.output_format == OutputFormat::csv);

    RunConfig bad = cfg;
    bad.draws_per_cell = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.p_modulus_max = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("replay reproduces the recorded residual exactly") {
    RunConfig cfg;
    cfg.seed = 77;
    cfg.identities = {IdentityId::THM21, IdentityId::RCG, IdentityId::WARNAAR_LEMMA,
                      IdentityId::LEMMA32, IdentityId::SEC5_HPRIME};
    cfg.grid = {{2, 2}};
    cfg.draws_per_cell = 1;
    std::string report = run_suite_to_string(cfg);

    CheckContext ctx;
    ctx.tolerance = cfg.tolerance;
    for (std::size_t i = 0; i < cfg.identities.size(); ++i) {
        std::istringstream is(report);
        ReplayOutcome out = replay_from_report(is, i, ctx);
        INFO("case " << i << ": " << out.recorded["identity"]);
        CHECK(out.identical);
    }

    std::istringstream is(report);
    CHECK_THROWS_AS(replay_from_report(is, 99, ctx), std::out_of_range);
}

TEST_CASE("identity tags round-trip and all have descriptions") {
    for (IdentityId id : all_identities) {
        auto back = identity_from_string(to_string(id));
        REQUIRE(back.has_value());
        CHECK(*back == id);
        CHECK(!describe(id).empty());
    }
    CHECK(!identity_from_string("bogus").has_value());
}
