#include "illiq/cli.hpp"
#include "illiq/closedform.hpp"
#include "illiq/experiments.hpp"
#include "illiq/hash.hpp"
#include "illiq/pdesolve.hpp"
#include "illiq/simulate.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace illiq {

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    std::string method = "fd";
    int paths = 10000;
    std::uint64_t seed = 0;
    std::string study;
    std::vector<int> ns;
    std::vector<double> spreads;
    std::string grid;
};

// Exceptions carrying an exit code.
struct Failure {
    int code;
    std::string message;
};

std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Failure{exit_parse, "cannot read " + path};
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void parse_grid_flag(const std::string& text, GridSpec& grid)
{
    int np = 0;
    int nt = 0;
    char comma = 0;
    std::istringstream is(text);
    if (!(is >> np >> comma >> nt) || comma != ',' || !is.eof()) {
        throw Failure{exit_parse, "--grid expects np,nt (got '" + text + "')"};
    }
    grid.n_p = np;
    grid.n_t = nt;
}

Config load(const Options& opt)
{
    if (opt.config.empty()) throw Failure{exit_parse, "--config is required"};
    Config cfg = load_config(read_file(opt.config));
    if (!opt.grid.empty()) {
        parse_grid_flag(opt.grid, cfg.grid);
        validate(cfg.grid, cfg.game.market);
    }
    return cfg;
}

std::string file_hash(const fs::path& p) { return sha256_hex(read_file(p.string())); }

void write_atomic(const fs::path& path, const std::string& text)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw Failure{exit_parse, "cannot write " + tmp.string()};
        f << text;
        if (!f.flush()) throw Failure{exit_parse, "cannot write " + tmp.string()};
    }
    fs::rename(tmp, path);
}

class Manifest {
public:
    Manifest(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)) {}

    void set(const std::string& key, json value) { extra_[key] = std::move(value); }
    void output(const std::string& name) { outputs_.push_back(name); }

    void write() const
    {
        json files = json::array();
        for (const auto& name : outputs_) files.push_back({{"file", name}, {"sha256", file_hash(dir_ / name)}});
        json m = extra_;
        m["command"] = command_;
        m["tool_version"] = ILLIQ_VERSION;
        m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        m["outputs"] = files;
        write_atomic(dir_ / ("manifest_" + command_ + ".json"), m.dump(2) + "\n");
    }

private:
    std::string command_;
    fs::path dir_;
    json extra_ = json::object();
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path prepare_out(const Options& opt)
{
    fs::path dir(opt.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Failure{exit_parse, "cannot create output directory " + dir.string()};
    return dir;
}

json certificate_json(const CostCertificate& c)
{
    return {{"passed", c.passed},         {"failure", c.failure},       {"eps_floor", c.eps_floor},
            {"marginal_monotone", c.marginal_monotone},                 {"z_lo", c.z_lo},
            {"z_hi", c.z_hi},             {"samples", c.samples},       {"min_slope", c.min_slope},
            {"max_slope", c.max_slope}};
}

int cmd_check(const Options& opt, std::ostream& out)
{
    const Config cfg = load(opt);
    const CostCertificate cert = scan_game(cfg.game);
    json report = {{"config_hash", game_hash(cfg.game)},
                   {"grid_hash", grid_hash(cfg.grid)},
                   {"players", cfg.game.n_players()},
                   {"certificate", certificate_json(cert)},
                   {"max_payoff_slope", cfg.game.max_payoff_slope()}};
    if (cert.eps_floor > 0.0) report["speed_bound"] = apriori_speed_bound(cfg.game, cert);
    out << report.dump(2) << '\n';
    return cert.passed ? exit_ok : exit_certification;
}

Solution run_method(const std::string& method, const GameSpec& game, const GridSpec& grid)
{
    if (method == "fd") return solve_fd(game, grid);
    if (method == "picard") return solve_picard(game, grid);
    if (method == "closed") {
        if (!has_closed_form(game)) {
            throw Failure{exit_mismatch, "no closed form for this game (needs linear cost and risk-neutral "
                                         "players, or a single CARA player)"};
        }
        return closed_solution(game, grid);
    }
    throw Failure{exit_parse, "unknown method '" + method + "'"};
}

void write_surplus_csv(const Solution& sol, const std::vector<Eigen::MatrixXd>& surp, const fs::path& path)
{
    std::ofstream f(path);
    if (!f) throw Failure{exit_parse, "cannot write " + path.string()};
    f << "t,p";
    for (std::size_t j = 1; j <= surp.size(); ++j) f << ",surplus_" << j;
    f << '\n' << std::setprecision(17);
    for (Eigen::Index k = 0; k < sol.n_t(); ++k) {
        for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
            f << sol.times(k) << ',' << sol.prices(i);
            for (const auto& s : surp) f << ',' << s(k, i);
            f << '\n';
        }
    }
}

int cmd_solve(const Options& opt, std::ostream& out)
{
    const Config cfg = load(opt);
    const fs::path dir = prepare_out(opt);
    Manifest manifest("solve", dir);
    const Solution sol = run_method(opt.method, cfg.game, cfg.grid);

    write_solution_csv(sol, (dir / "solution.csv").string());
    write_surplus_csv(sol, surplus(sol, cfg.game, gauss_hermite(cfg.grid.quad_nodes)), dir / "surplus.csv");

    const CostCertificate cert = sol.meta.certificate.eps_floor > 0.0 ? sol.meta.certificate : scan_game(cfg.game);
    const double bound = apriori_speed_bound(cfg.game, cert);
    const double max_speed = max_abs_speed(sol);
    const double res = (sol.n_t() >= 5 && sol.n_p() >= 5) ? residual(sol, cfg.game).overall : 0.0;
    json summary = {{"method", opt.method},
                    {"n_t", sol.n_t()},
                    {"n_p", sol.n_p()},
                    {"max_residual", res},
                    {"max_abs_speed", max_speed},
                    {"speed_bound", bound},
                    {"speed_bound_ok", max_speed <= bound + 1e-6}};
    if (opt.method != "closed" && has_closed_form(cfg.game)) {
        const Solution ref = closed_solution(cfg.game, sol.grid);
        double worst = 0.0;
        for (std::size_t j = 0; j < sol.n_players(); ++j) {
            const auto& a = sol.values[j];
            const auto& b = ref.values[j];
            for (Eigen::Index k = 0; k < sol.n_t(); ++k) {
                for (Eigen::Index i = 1; i + 1 < sol.n_p(); ++i) {
                    worst = std::max(worst, std::abs(a(k, i) - b(k, i)) / (1.0 + std::abs(b(k, i))));
                }
            }
        }
        summary["closed_form_rel_diff"] = worst;
    }
    if (!sol.meta.picard_history.empty()) summary["picard_tau"] = sol.meta.picard_tau;
    write_atomic(dir / "solve.json", summary.dump(2) + "\n");

    out << "max residual: " << res << '\n';
    out << "max |speed|: " << max_speed << " (a-priori bound " << bound << ", "
        << (max_speed <= bound + 1e-6 ? "ok" : "VIOLATED") << ")\n";
    if (summary.contains("closed_form_rel_diff")) {
        out << "relative difference to closed form: " << summary["closed_form_rel_diff"].get<double>() << '\n';
    }

    manifest.set("config_hash", game_hash(cfg.game));
    manifest.set("grid_hash", grid_hash(cfg.grid));
    manifest.set("method", opt.method);
    manifest.set("seed", nullptr);
    for (const char* f : {"solution.csv", "surplus.csv", "solve.json"}) manifest.output(f);
    manifest.write();
    return max_speed <= bound + 1e-6 ? exit_ok : exit_solver;
}

int cmd_simulate(const Options& opt, std::ostream& out)
{
    const Config cfg = load(opt);
    const fs::path dir = prepare_out(opt);
    const fs::path sol_path = dir / "solution.csv";
    const fs::path man_path = dir / "manifest_solve.json";
    if (!fs::exists(sol_path) || !fs::exists(man_path)) {
        throw Failure{exit_parse, "no solution in " + dir.string() + " (run solve with the same --out first)"};
    }
    json solved;
    try {
        solved = json::parse(read_file(man_path.string()));
    } catch (const json::parse_error& e) {
        throw Failure{exit_parse, std::string("malformed solve manifest: ") + e.what()};
    }
    const std::string config_hash = game_hash(cfg.game);
    if (solved.value("config_hash", "") != config_hash) {
        throw Failure{exit_hash, "solution was computed for a different config (hash mismatch)"};
    }
    if (solved.value("grid_hash", "") != grid_hash(cfg.grid)) {
        throw Failure{exit_hash, "solution was computed on a different grid (hash mismatch)"};
    }
    std::string recorded;
    for (const auto& f : solved.value("outputs", json::array())) {
        if (f.value("file", "") == "solution.csv") recorded = f.value("sha256", "");
    }
    if (recorded != file_hash(sol_path)) throw Failure{exit_hash, "solution.csv does not match its manifest"};

    Manifest manifest("simulate", dir);
    const Solution sol = read_solution_csv(sol_path.string());
    if (sol.n_players() != cfg.game.n_players()) throw Failure{exit_hash, "solution player count differs from config"};

    SimulationSettings settings;
    settings.n_paths = opt.paths;
    settings.seed = opt.seed;
    settings.n_steps = 500;
    // keep the path CSV around a million rows
    const long long rows = static_cast<long long>(opt.paths) * (settings.n_steps + 1);
    settings.record_every = static_cast<int>(std::clamp<long long>((rows + 999999) / 1000000, 1, settings.n_steps));

    const PathBundle bundle = simulate_paths(sol, cfg.game, settings);
    const auto est = realized_objectives(bundle);
    const auto targets = solution_objectives(sol, cfg.game);
    const auto z = mc_consistency(bundle, sol, cfg.game);
    write_paths_csv(bundle, (dir / "paths.csv").string());
    write_atomic(dir / "simulation.json", summary_json(bundle, est, targets, z).dump(2) + "\n");

    for (std::size_t j = 0; j < est.size(); ++j) {
        out << "player " << j + 1 << ": mean " << est[j].mean << " +- " << est[j].std_error << ", solution "
            << targets[j] << ", z = " << z[j] << '\n';
    }
    manifest.set("config_hash", config_hash);
    manifest.set("grid_hash", grid_hash(cfg.grid));
    manifest.set("seed", opt.seed);
    manifest.set("paths", opt.paths);
    manifest.set("n_steps", settings.n_steps);
    manifest.output("paths.csv");
    manifest.output("simulation.json");
    manifest.write();
    return exit_ok;
}

int cmd_sweep(const Options& opt, std::ostream& out)
{
    const fs::path dir = prepare_out(opt);
    Manifest manifest("sweep", dir);
    manifest.set("study", opt.study);
    manifest.set("seed", nullptr);

    if (opt.study == "figure") {
        for (int id = 1; id <= figure_count; ++id) {
            const std::string name = "figure" + std::to_string(id) + ".csv";
            write_csv(figure_grids(id), (dir / name).string());
            manifest.output(name);
            out << "wrote " << name << '\n';
        }
        if (!opt.config.empty()) {
            const Config cfg = load(opt);
            manifest.set("config_hash", game_hash(cfg.game));
        }
        manifest.write();
        return exit_ok;
    }

    const Config cfg = load(opt);
    const GameSpec& game = cfg.game;
    const std::vector<int> ns = opt.ns.empty() ? std::vector<int>{1, 10, 100} : opt.ns;
    SweepResult r;
    if (opt.study == "zero_sum") {
        r = zero_sum_check(game, cfg.grid);
    } else if (opt.study == "predator") {
        if (!game.all_risk_neutral()) throw Failure{exit_mismatch, "predator study needs risk-neutral players"};
        r = predator_sweep(game, game.players.front().endowment, ns, cfg.grid);
    } else if (opt.study == "split") {
        if (!game.all_risk_neutral()) throw Failure{exit_mismatch, "split study needs risk-neutral players"};
        r = split_sweep(game, game.players.front().endowment, ns, cfg.grid);
    } else if (opt.study == "spread") {
        const std::vector<double> s =
            opt.spreads.empty() ? std::vector<double>{0.0, 0.001, 0.002, 0.003, 0.004} : opt.spreads;
        double C = 100.0;
        if (const auto* sc = std::get_if<SmoothedSpreadCost>(&game.cost.kind)) C = sc->C;
        r = spread_sweep(game, s, C, cfg.grid);
    } else if (opt.study == "cara2") {
        if (game.n_players() != 2 || !game.all_cara()) throw Failure{exit_mismatch, "cara2 needs two CARA players"};
        r = cara_two_player_study(game, game.players.front().endowment,
                                  {game.players[0].utility.alpha, game.players[1].utility.alpha}, cfg.grid);
    } else {
        throw Failure{exit_parse, "unknown study '" + opt.study + "'"};
    }

    write_csv(r, (dir / (opt.study + ".csv")).string());
    write_atomic(dir / (opt.study + ".json"), to_json(r).dump(2) + "\n");
    for (const auto& a : r.assertions) {
        out << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.metric << " (threshold " << a.threshold << ")\n";
    }
    manifest.set("config_hash", r.game_hash);
    manifest.set("grid_hash", r.grid_hash);
    manifest.output(opt.study + ".csv");
    manifest.output(opt.study + ".json");
    manifest.write();
    if (const Assertion* f = r.first_failure()) throw Failure{exit_assertion, "assertion failed: " + f->name};
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Equilibrium trading speeds and values for option holders in an illiquid market", "illiq"};
    app.set_version_flag("--version", ILLIQ_VERSION);
    app.require_subcommand(1);
    Options opt;
    app.add_option("--config", opt.config, "JSON game configuration");
    app.add_option("--out", opt.out, "output directory");
    app.add_option("--method", opt.method, "solver")->check(CLI::IsMember({"fd", "picard", "closed"}));
    app.add_option("--paths", opt.paths, "Monte-Carlo paths")->check(CLI::PositiveNumber);
    app.add_option("--seed", opt.seed, "random seed");
    app.add_option("--study", opt.study, "sweep study")
        ->check(CLI::IsMember({"zero_sum", "predator", "split", "spread", "cara2", "figure"}));
    app.add_option("--N", opt.ns, "player counts, comma separated")->delimiter(',');
    app.add_option("--s", opt.spreads, "spreads, comma separated")->delimiter(',');
    app.add_option("--grid", opt.grid, "grid size np,nt");
    for (const auto& [name, help] : std::vector<std::pair<const char*, const char*>>{
             {"check", "certify the cost function and report the speed bound"},
             {"solve", "solve the game and write value and speed grids"},
             {"simulate", "simulate equilibrium paths from a solved game"},
             {"sweep", "run a study and check its assertions"}}) {
        app.add_subcommand(name, help)->fallthrough();
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << ILLIQ_VERSION << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_parse;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "check") return cmd_check(opt, out);
        if (command == "solve") return cmd_solve(opt, out);
        if (command == "simulate") return cmd_simulate(opt, out);
        if (opt.study.empty()) throw Failure{exit_parse, "--study is required"};
        return cmd_sweep(opt, out);
    } catch (const Failure& f) {
        err << "error: " << f.message << '\n';
        return f.code;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return exit_parse;
    } catch (const ValidationError& e) {
        err << "invalid config: " << e.what() << '\n';
        return exit_parse;
    } catch (const CertificationError& e) {
        err << "certification failed: " << e.what() << '\n';
        return exit_certification;
    } catch (const PreconditionError& e) {
        err << "not applicable: " << e.what() << '\n';
        return exit_mismatch;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << '\n';
        return exit_solver;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_solver;
    }
}

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace illiq
