#include "greenbp/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using namespace greenbp;

int main(int argc, char** argv) {
    CLI::App app{"exact Green's operators for two-point problems with one regular singular "
                 "endpoint at 0"};
    app.require_subcommand(1);

    auto* solve = app.add_subcommand(
        "solve", "solve a problem file; prints the Green's operator/kernel and a report as JSON");
    std::string solve_file;
    long solve_trunc = 0;
    std::string solve_out = "json";
    solve->add_option("file", solve_file, "problem JSON file")->required();
    solve->add_option("--truncation", solve_trunc, "override the series truncation order");
    solve->add_option("--out", solve_out, "output format (json)");

    auto* eval = app.add_subcommand("eval", "evaluate the solution for a forcing on a grid (CSV)");
    std::string eval_file, eval_forcing, eval_mode = "exact", eval_csv;
    long eval_grid = 11;
    double eval_rtol = 1e-10;
    eval->add_option("file", eval_file, "problem JSON file")->required();
    eval->add_option("--forcing", eval_forcing, "forcing expression or fixture name")->required();
    eval->add_option("--grid", eval_grid, "number of interior grid points");
    eval->add_option("--mode", eval_mode, "exact | quad");
    eval->add_option("--rel-tol", eval_rtol, "quadrature relative tolerance");
    eval->add_option("--csv", eval_csv, "output CSV path ('-' for stdout)")->required();

    auto* verify = app.add_subcommand("verify", "check the defining identities for a forcing");
    std::string ver_file, ver_forcing;
    verify->add_option("file", ver_file, "problem JSON file")->required();
    verify->add_option("--forcing", ver_forcing, "forcing expression or fixture name")->required();

    auto* kir = app.add_subcommand(
        "kirchhoff", "emit the tapered-plate slope problem and its paired load forcing");
    std::string k_beta = "9/10", k_nu = "1/3", k_load = "constant:1", k_t0 = "1", k_E0 = "1",
                k_b = "1", k_out;
    long k_trunc = 240;
    kir->add_option("--beta", k_beta, "clamping radius, in (0,1)");
    kir->add_option("--nu", k_nu, "Poisson ratio, in [0,1/2)");
    kir->add_option("--load", k_load, "constant:q0 or expr:<expression in x>");
    kir->add_option("--t0", k_t0, "center thickness");
    kir->add_option("--E0", k_E0, "Young modulus");
    kir->add_option("--b", k_b, "physical radius scale");
    kir->add_option("--truncation", k_trunc, "series truncation order");
    kir->add_option("--out", k_out, "write the problem JSON to this file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve) {
            if (solve_out != "json")
                throw ParseError("--out: only \"json\" is supported");
            ProblemSpec spec = parse_problem(solve_file);
            if (solve_trunc > 0) spec.truncation = solve_trunc;
            std::cout << cmd_solve(spec) << "\n";
        } else if (*eval) {
            ProblemSpec spec = parse_problem(eval_file);
            EvalOptions opt;
            opt.grid = eval_grid;
            opt.rel_tol = eval_rtol;
            if (eval_mode == "quad")
                opt.quadrature = true;
            else if (eval_mode != "exact")
                throw ParseError("--mode: expected \"exact\" or \"quad\"");
            std::string csv = cmd_eval(spec, eval_forcing, opt);
            if (eval_csv == "-") {
                std::cout << csv;
            } else {
                std::ofstream out(eval_csv);
                if (!out) throw ParseError("cannot write CSV file: " + eval_csv);
                out << csv;
            }
        } else if (*verify) {
            ProblemSpec spec = parse_problem(ver_file);
            try {
                std::cout << cmd_verify(spec, ver_forcing) << "\n";
            } catch (const VerificationFailed& e) {
                std::cerr << "verification failed: " << e.what() << "\n";
                return 1;
            }
        } else if (*kir) {
            KirchhoffConfig cfg;
            cfg.beta = parse_rational(k_beta);
            cfg.nu = parse_rational(k_nu);
            cfg.t0 = parse_rational(k_t0);
            cfg.E0 = parse_rational(k_E0);
            cfg.b = parse_rational(k_b);
            cfg.truncation = k_trunc;
            if (k_load.rfind("constant:", 0) == 0) {
                cfg.constant_load = true;
                cfg.q0 = parse_rational(k_load.substr(9));
            } else if (k_load.rfind("expr:", 0) == 0) {
                cfg.constant_load = false;
                cfg.load_expr = k_load.substr(5);
            } else {
                throw ParseError("--load: expected constant:q0 or expr:<expression>");
            }
            auto [spec, rhs] = kirchhoff_preset(cfg);
            std::string problem = problem_to_json(spec);
            std::string forcing = rhs.to_string();
            if (k_out.empty()) {
                // single document: the problem plus the forcing it pairs with
                nlohmann::json doc;
                doc["problem"] = nlohmann::json::parse(problem);
                doc["forcing"] = forcing;
                std::cout << doc.dump(2) << "\n";
            } else {
                std::ofstream out(k_out);
                if (!out) throw ParseError("cannot write problem file: " + k_out);
                out << problem << "\n";
                std::cout << "wrote " << k_out << "\nforcing: " << forcing << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
