// elldet: numerically verifies a catalog of determinant and multiple-sum
// identities for elliptic Sylvester-type matrices over random complex
// parameters and reports residuals.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "elldet/elldet.hpp"

namespace {

std::vector<elldet::IdentityId> parse_identities(const std::string& csv) {
    std::vector<elldet::IdentityId> out;
    if (csv == "all") {
        out.assign(elldet::all_identities.begin(), elldet::all_identities.end());
        return out;
    }
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto id = elldet::identity_from_string(tok);
        if (!id) throw CLI::ValidationError("--identities", "unknown identity '" + tok + "'");
        out.push_back(*id);
    }
    return out;
}

std::vector<std::pair<int, int>> parse_grid(const std::string& csv) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto x = tok.find('x');
        if (x == std::string::npos)
            throw CLI::ValidationError("--grid", "cells look like R1xR2, e.g. 2x3");
        out.emplace_back(std::stoi(tok.substr(0, x)), std::stoi(tok.substr(x + 1)));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"elldet: residual verification of elliptic determinant identities"};
    app.require_subcommand(1);

    // --- run ---------------------------------------------------------------
    auto* run = app.add_subcommand("run", "sample parameters and check identities");
    std::string config_path, identities_csv, grid_csv, format = "json", out_path;
    std::uint64_t seed = 0;
    int draws = 0, jobs = 0;
    double tol = 0.0, pmax = 0.0;
    bool use_f64 = false;
    run->add_option("--config", config_path, "JSON config file mirroring the run options");
    run->add_option("--identities", identities_csv, "comma list of identity tags, or 'all'");
    run->add_option("--grid", grid_csv, "comma list of R1xR2 cells, e.g. 2x2,2x3");
    run->add_option("--draws", draws, "parameter draws per grid cell");
    run->add_option("--seed", seed, "64-bit seed of the sampling streams");
    run->add_option("--tol", tol, "pass/fail residual tolerance");
    run->add_option("--p-mod-max", pmax, "largest nome modulus sampled");
    run->add_option("--format", format, "json | csv | text");
    run->add_option("--jobs", jobs, "parallel workers (results are order-independent)");
    run->add_option("--out", out_path, "write the report here instead of stdout");
    run->add_flag("--f64", use_f64, "evaluate in plain double instead of binary128");

    // --- replay ------------------------------------------------------------
    auto* replay = app.add_subcommand("replay", "re-run one recorded case from a JSON report");
    std::string report_path;
    std::size_t case_index = 0;
    double replay_tol = 1e-8;
    bool replay_f64 = false;
    replay->add_option("--report", report_path, "JSON-lines report file")->required();
    replay->add_option("--case", case_index, "0-based index over the per-check lines")->required();
    replay->add_option("--tol", replay_tol, "tolerance for the re-run");
    replay->add_flag("--f64", replay_f64, "replay in plain double");

    // --- list --------------------------------------------------------------
    auto* list = app.add_subcommand("list", "print the identity tags and what each one checks");

    // --- dump --------------------------------------------------------------
    auto* dump = app.add_subcommand("dump", "build one matrix and print its JSON form");
    std::string dump_family = "F";
    std::uint64_t dump_seed = 0;
    int dump_r1 = 2, dump_r2 = 2;
    dump->add_option("--family", dump_family, "B | M | F | U | V | G | H | Fp | Gp | Hp");
    dump->add_option("--r1", dump_r1, "top block width parameter");
    dump->add_option("--r2", dump_r2, "bottom block width parameter");
    dump->add_option("--seed", dump_seed, "seed of the parameter draw");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            elldet::RunConfig cfg;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw std::runtime_error("cannot open config file " + config_path);
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(in);
                } catch (const nlohmann::json::parse_error& e) {
                    throw std::runtime_error("config parse error in " + config_path + ": " +
                                             e.what());
                }
                cfg = elldet::config_from_json(j);
            }
            if (!identities_csv.empty()) cfg.identities = parse_identities(identities_csv);
            if (!grid_csv.empty()) cfg.grid = parse_grid(grid_csv);
            if (run->count("--draws")) cfg.draws_per_cell = draws;
            if (run->count("--seed")) cfg.seed = seed;
            if (run->count("--tol")) cfg.tolerance = tol;
            if (run->count("--p-mod-max")) cfg.p_modulus_max = pmax;
            if (run->count("--jobs")) cfg.jobs = jobs;
            if (run->count("--format")) {
                auto f = elldet::format_from_string(format);
                if (!f) throw CLI::ValidationError("--format", "must be json, csv, or text");
                cfg.output_format = *f;
            }
            if (use_f64) cfg.backend = elldet::Backend::f64;

            elldet::SuiteSummary summary;
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                if (!out) throw std::runtime_error("cannot open output file " + out_path);
                summary = elldet::run_suite(cfg, out);
            } else {
                summary = elldet::run_suite(cfg, std::cout);
            }
            std::fprintf(stderr, "%zu/%zu passed, worst residual %.3e, %.2f s\n", summary.passed,
                         summary.total, summary.worst_residual, summary.wall_time.count());
            return summary.passed == summary.total ? 0 : 1;
        }

        if (*replay) {
            std::ifstream in(report_path);
            if (!in) throw std::runtime_error("cannot open report " + report_path);
            elldet::CheckContext ctx;
            ctx.tolerance = replay_tol;
            ctx.backend = replay_f64 ? elldet::Backend::f64 : elldet::Backend::f128;
            elldet::ReplayOutcome out = elldet::replay_from_report(in, case_index, ctx);
            std::printf("recorded residual: %.17g\n",
                        out.recorded.at("rel_residual").get<double>());
            std::printf("re-run residual:   %.17g\n", out.rerun.rel_residual);
            std::printf("identical: %s\n", out.identical ? "yes" : "no");
            return out.identical ? 0 : 1;
        }

        if (*list) {
            for (elldet::IdentityId id : elldet::all_identities)
                std::printf("%-15s %s\n", std::string(elldet::to_string(id)).c_str(),
                            std::string(elldet::describe(id)).c_str());
            return 0;
        }

        if (*dump) {
            elldet::Rng rng(dump_seed, elldet::Rng::stream_tag(0xd00d));
            auto draw = [&] { return rng.sample_annulus(0.2, 2.0); };
            elldet::BaseNome bn(draw(), rng.sample_annulus(0.05, 0.5));
            nlohmann::json out;
            if (dump_family == "B") {
                elldet::SylvesterBinomialParams p{draw(), draw(), dump_r1, dump_r2};
                out = matrix_to_json(build_B(p), "B", dump_r1, dump_r2,
                                     {{"s1", elldet::cplx_json(p.s1)},
                                      {"s2", elldet::cplx_json(p.s2)}});
            } else if (dump_family == "M") {
                elldet::HypergeomParams p{draw(), draw(), dump_r1, dump_r2};
                out = matrix_to_json(build_M(p), "M", dump_r1, dump_r2,
                                     {{"s1", elldet::cplx_json(p.s1)},
                                      {"s2", elldet::cplx_json(p.s2)}});
            } else if (dump_family == "F") {
                elldet::EllipticFParams p{bn, draw(), draw(), draw(), draw(), dump_r1, dump_r2};
                out = matrix_to_json(build_F(p), "F", dump_r1, dump_r2, elldet::f_params_echo(p));
            } else if (dump_family == "U" || dump_family == "V") {
                elldet::UVParams p{elldet::BaseNome(bn.q, {0, 0}), draw(), draw(), dump_r1,
                                   dump_r2};
                out = matrix_to_json(dump_family == "U" ? build_U(p) : build_V(p), dump_family,
                                     dump_r1, dump_r2, elldet::uv_params_echo(p));
            } else {
                elldet::EllipticGParams p{bn,     draw(), draw(), draw(), draw(),
                                          draw(), draw(), dump_r1, dump_r2};
                if (dump_family == "G") out = matrix_to_json(build_G(p), "G", dump_r1, dump_r2,
                                                             elldet::g_params_echo(p));
                else if (dump_family == "H") out = matrix_to_json(build_H(p), "H", dump_r1,
                                                                  dump_r2, elldet::g_params_echo(p));
                else if (dump_family == "Fp") out = matrix_to_json(build_Fprime(p), "Fp", dump_r1,
                                                                   dump_r2, elldet::sec5_params_echo(p));
                else if (dump_family == "Gp") out = matrix_to_json(build_Gprime(p), "Gp", dump_r1,
                                                                   dump_r2, elldet::sec5_params_echo(p));
                else if (dump_family == "Hp") out = matrix_to_json(build_Hprime(p), "Hp", dump_r1,
                                                                   dump_r2, elldet::sec5_params_echo(p));
                else throw CLI::ValidationError("--family", "unknown family " + dump_family);
            }
            std::cout << out.dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
