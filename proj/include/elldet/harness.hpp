#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "elldet/sampling.hpp"

namespace elldet {

enum class OutputFormat { json, csv, text };

inline std::string_view to_string(OutputFormat f) {
    switch (f) {
        case OutputFormat::json: return "json";
        case OutputFormat::csv: return "csv";
        case OutputFormat::text: return "text";
    }
    return "?";
}

inline std::optional<OutputFormat> format_from_string(std::string_view s) {
    if (s == "json") return OutputFormat::json;
    if (s == "csv") return OutputFormat::csv;
    if (s == "text") return OutputFormat::text;
    return std::nullopt;
}

struct RunConfig {
    std::uint64_t seed = 0;
    std::vector<IdentityId> identities;
    std::vector<std::pair<int, int>> grid;
    int draws_per_cell = 1;
    double tolerance = 1e-8;
    double p_modulus_max = 0.5;
    OutputFormat output_format = OutputFormat::json;
    int jobs = 1;
    Backend backend = Backend::f128;

    void validate() const {
        if (draws_per_cell < 1) throw std::invalid_argument("config: draws_per_cell must be >= 1");
        if (!(tolerance > 0)) throw std::invalid_argument("config: tolerance must be > 0");
        if (!(p_modulus_max > 0 && p_modulus_max < 1))
            throw std::invalid_argument("config: p_modulus_max must lie in (0, 1)");
        if (identities.empty()) throw std::invalid_argument("config: identities must be nonempty");
        if (grid.empty()) throw std::invalid_argument("config: grid must be nonempty");
        for (auto [r1, r2] : grid)
            if (r1 < 0 || r2 < 0 || r1 + r2 < 1)
                throw std::invalid_argument("config: grid cells need r1, r2 >= 0, r1 + r2 >= 1");
        if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    }
};

struct SuiteSummary {
    std::size_t total = 0;
    std::size_t passed = 0;
    double worst_residual = 0.0;
    nlohmann::json worst_case;
    std::chrono::duration<double> wall_time{0};
};

/// One scheduled check: the parameters are sampled from a stream keyed by
/// (seed, identity, r1, r2, draw), so results do not depend on scheduling.
struct CaseResult {
    IdentityId id;
    int r1 = 0, r2 = 0, draw = 0;
    IdentityReport report;
};

namespace detail {

inline nlohmann::json case_to_json(const CaseResult& c) {
    nlohmann::json j;
    j["identity"] = std::string(to_string(c.id));
    j["r1"] = c.r1;
    j["r2"] = c.r2;
    j["draw"] = c.draw;
    j["lhs"] = side_to_json(c.report.lhs);
    j["rhs"] = side_to_json(c.report.rhs);
    j["rel_residual"] = c.report.rel_residual;
    j["tolerance"] = c.report.tolerance;
    j["passed"] = c.report.passed;
    j["params"] = c.report.params_echo;
    j["diagnostics"] = c.report.diagnostics;
    return j;
}

inline SamplerOptions sampler_options(const RunConfig& cfg) {
    SamplerOptions opt;
    opt.p_modulus_max = cfg.p_modulus_max;
    return opt;
}

inline CaseResult run_case(IdentityId id, int r1, int r2, int draw, const RunConfig& cfg) {
    CaseResult c;
    c.id = id;
    c.r1 = r1;
    c.r2 = r2;
    c.draw = draw;
    Rng rng(cfg.seed, Rng::stream_tag(static_cast<std::uint64_t>(id),
                                      static_cast<std::uint64_t>(r1),
                                      static_cast<std::uint64_t>(r2),
                                      static_cast<std::uint64_t>(draw)));
    ParamBundle bundle = sample_params(id, r1, r2, rng, sampler_options(cfg));
    CheckContext ctx;
    ctx.tolerance = cfg.tolerance;
    ctx.backend = cfg.backend;
    c.report = run_identity_check(id, bundle, ctx);
    return c;
}

} // namespace detail

/// Header line of a report stream: schema version, generator, config echo.
inline nlohmann::json report_header(const RunConfig& cfg) {
    nlohmann::json grid = nlohmann::json::array();
    for (auto [r1, r2] : cfg.grid) grid.push_back({r1, r2});
    nlohmann::json ids = nlohmann::json::array();
    for (IdentityId id : cfg.identities) ids.push_back(std::string(to_string(id)));
    return {{"schema", 1},
            {"rng", std::string(Rng::algorithm())},
            {"seed", cfg.seed},
            {"identities", ids},
            {"grid", grid},
            {"draws_per_cell", cfg.draws_per_cell},
            {"tolerance", cfg.tolerance},
            {"p_modulus_max", cfg.p_modulus_max},
            {"backend", cfg.backend == Backend::f128 ? "f128" : "f64"}};
}

/// Runs every (identity, cell, draw) of the configuration. Tasks are pure
/// and independently seeded, so the optional parallelism cannot change the
/// output; results stream in deterministic (identity, cell, draw) order.
/// Wall time is reported only on the summary object, never serialized into
/// the byte-compared formats.
inline SuiteSummary run_suite(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    struct Task {
        IdentityId id;
        int r1, r2, draw;
    };
    std::vector<Task> tasks;
    for (IdentityId id : cfg.identities)
        for (auto [r1, r2] : cfg.grid)
            for (int d = 0; d < cfg.draws_per_cell; ++d) tasks.push_back({id, r1, r2, d});

    std::vector<CaseResult> results(tasks.size());
    if (cfg.jobs <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const Task& t = tasks[i];
            results[i] = detail::run_case(t.id, t.r1, t.r2, t.draw, cfg);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                const Task& t = tasks[i];
                results[i] = detail::run_case(t.id, t.r1, t.r2, t.draw, cfg);
            }
        };
        std::vector<std::future<void>> pool;
        for (int w = 0; w < cfg.jobs; ++w) pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool) f.get();
    }

    SuiteSummary s;
    s.total = results.size();
    if (cfg.output_format == OutputFormat::json) {
        out << report_header(cfg).dump() << "\n";
    } else if (cfg.output_format == OutputFormat::csv) {
        out << "identity,r1,r2,draw,residual,passed\n";
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
        const CaseResult& c = results[i];
        if (c.report.passed) ++s.passed;
        if (c.report.rel_residual > s.worst_residual) {
            s.worst_residual = c.report.rel_residual;
            s.worst_case = detail::case_to_json(c);
        }
        switch (cfg.output_format) {
            case OutputFormat::json:
                out << detail::case_to_json(c).dump() << "\n";
                break;
            case OutputFormat::csv: {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.17g", c.report.rel_residual);
                out << to_string(c.id) << ',' << c.r1 << ',' << c.r2 << ',' << c.draw << ','
                    << buf << ',' << (c.report.passed ? "true" : "false") << "\n";
                break;
            }
            case OutputFormat::text: {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.3e", c.report.rel_residual);
                out << (c.report.passed ? "pass " : "FAIL ") << to_string(c.id) << " r1=" << c.r1
                    << " r2=" << c.r2 << " draw=" << c.draw << " residual=" << buf << "\n";
                break;
            }
        }
    }
    s.wall_time = std::chrono::steady_clock::now() - t0;

    nlohmann::json summary{{"summary",
                            {{"total", s.total},
                             {"passed", s.passed},
                             {"worst_residual", s.worst_residual},
                             {"worst_case", s.worst_case}}}};
    switch (cfg.output_format) {
        case OutputFormat::json:
            out << summary.dump() << "\n";
            break;
        case OutputFormat::csv:
            break; // the CSV stream carries only the per-check rows
        case OutputFormat::text: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3e", s.worst_residual);
            out << s.passed << "/" << s.total << " passed, worst residual " << buf << ", "
                << s.wall_time.count() << " s\n";
            break;
        }
    }
    return s;
}

inline std::string run_suite_to_string(const RunConfig& cfg, SuiteSummary* summary = nullptr) {
    std::ostringstream os;
    SuiteSummary s = run_suite(cfg, os);
    if (summary) *summary = s;
    return os.str();
}

// ---------------------------------------------------------------------------
// Config file and replay
// ---------------------------------------------------------------------------

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("config field '" + field + "': " + why);
    };
    if (j.contains("seed")) {
        if (!j["seed"].is_number()) fail("seed", "must be an integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("identities")) {
        if (!j["identities"].is_array()) fail("identities", "must be an array of names");
        for (const auto& v : j["identities"]) {
            auto id = identity_from_string(v.get<std::string>());
            if (!id) fail("identities", "unknown identity '" + v.get<std::string>() + "'");
            cfg.identities.push_back(*id);
        }
    }
    if (j.contains("grid")) {
        if (!j["grid"].is_array()) fail("grid", "must be an array of [r1, r2] pairs");
        for (const auto& v : j["grid"]) {
            if (!v.is_array() || v.size() != 2) fail("grid", "each cell must be [r1, r2]");
            cfg.grid.emplace_back(v[0].get<int>(), v[1].get<int>());
        }
    }
    if (j.contains("draws_per_cell")) cfg.draws_per_cell = j["draws_per_cell"].get<int>();
    if (j.contains("tolerance")) cfg.tolerance = j["tolerance"].get<double>();
    if (j.contains("p_modulus_max")) cfg.p_modulus_max = j["p_modulus_max"].get<double>();
    if (j.contains("output_format")) {
        auto f = format_from_string(j["output_format"].get<std::string>());
        if (!f) fail("output_format", "must be json, csv, or text");
        cfg.output_format = *f;
    }
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    if (j.contains("backend")) {
        std::string b = j["backend"].get<std::string>();
        if (b == "f64") cfg.backend = Backend::f64;
        else if (b == "f128") cfg.backend = Backend::f128;
        else fail("backend", "must be f64 or f128");
    }
    return cfg;
}

/// Rebuild the exact parameter bundle of a recorded case and re-run it.
inline IdentityReport replay_case(const nlohmann::json& case_json, const CheckContext& ctx) {
    auto id = identity_from_string(case_json.at("identity").get<std::string>());
    if (!id) throw std::invalid_argument("replay: unknown identity in case");
    const nlohmann::json& pj = case_json.at("params");
    const int r1 = case_json.at("r1").get<int>();
    const int r2 = case_json.at("r2").get<int>();
    auto get_c = [&](const char* name) {
        const auto& v = pj.at(name);
        return cplx(v.at(0).get<double>(), v.at(1).get<double>());
    };

    ParamBundle bundle = [&]() -> ParamBundle {
        switch (*id) {
            case IdentityId::SYL_BIN:
                return SylvesterBinomialParams{get_c("s1"), get_c("s2"), r1, r2};
            case IdentityId::FKX:
                return HypergeomParams{get_c("s1"), get_c("s2"), r1, r2};
            case IdentityId::THM21:
            case IdentityId::THM21_ALT:
            case IdentityId::CN_SUM:
            case IdentityId::LAPLACE_XCHECK:
                return EllipticFParams{BaseNome(get_c("q"), get_c("p")), get_c("s1"), get_c("s2"),
                                       get_c("t1"), get_c("t2"), r1, r2};
            case IdentityId::COR22:
            case IdentityId::COR23:
                return UVParams{BaseNome(get_c("q"), cplx(0, 0)), get_c("s1"), get_c("s2"), r1,
                                r2};
            case IdentityId::WARNAAR_LEMMA: {
                WarnaarParams p;
                p.bn = BaseNome(get_c("q"), get_c("p"));
                p.n = pj.at("n").get<int>();
                p.c = get_c("c");
                for (const auto& v : pj.at("A"))
                    p.A.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
                for (const auto& v : pj.at("x"))
                    p.x.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
                return p;
            }
            case IdentityId::LEMMA32: {
                Lemma32Params p;
                p.bn = BaseNome(get_c("q"), get_c("p"));
                p.r1 = pj.at("r1").get<int>();
                p.r2 = pj.at("r2").get<int>();
                p.a = get_c("a");
                p.kvec = pj.at("kvec").get<std::vector<int>>();
                return p;
            }
            case IdentityId::THM41:
            case IdentityId::RCG:
                return EllipticGParams{BaseNome(get_c("q"), get_c("p")), get_c("a"), get_c("b"),
                                       get_c("c"), get_c("d"), get_c("e"), get_c("f"), r1, r2};
            case IdentityId::SEC5_LHS:
            case IdentityId::SEC5_HPRIME:
            case IdentityId::SEC5_RHS: {
                EllipticGParams p{BaseNome(get_c("q"), get_c("p")), get_c("a"), get_c("b"),
                                  get_c("c"), cplx(1, 0), get_c("e"), get_c("f"), r1, r2};
                p.d = p.a * p.bn.q / p.c;
                return p;
            }
        }
        throw std::logic_error("replay: unhandled identity");
    }();
    return run_identity_check(*id, bundle, ctx);
}

/// `elldet replay`: load a JSON-lines report, pick the case with the given
/// index (0-based over the per-check lines), re-run, and compare residuals.
struct ReplayOutcome {
    nlohmann::json recorded;
    IdentityReport rerun;
    bool identical = false;
};

inline ReplayOutcome replay_from_report(std::istream& in, std::size_t index,
                                        const CheckContext& ctx) {
    std::string line;
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (!j.contains("identity")) continue; // header or summary
        if (seen++ != index) continue;
        ReplayOutcome out;
        out.recorded = j;
        out.rerun = replay_case(j, ctx);
        out.identical = out.rerun.rel_residual == j.at("rel_residual").get<double>();
        return out;
    }
    throw std::out_of_range("replay: case index " + std::to_string(index) +
                            " not present in report (found " + std::to_string(seen) + " cases)");
}

} // namespace elldet
