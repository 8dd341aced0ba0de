#include "illiq/solution.hpp"
#include "illiq/grid.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace illiq {

Solution make_solution(const GridSpec& grid, double T, std::size_t n_players)
{
    Solution sol;
    sol.grid = grid;
    sol.times = time_nodes(grid.n_t, T);
    sol.prices = price_nodes(grid);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(grid.n_t, grid.n_p);
    sol.values.assign(n_players, zero);
    sol.gradients.assign(n_players, zero);
    sol.speeds.assign(n_players, zero);
    sol.aggregate_speed = zero;
    sol.meta.n_t_requested = grid.n_t;
    return sol;
}

double max_abs_speed(const Solution& sol)
{
    double m = 0.0;
    for (const auto& s : sol.speeds) m = std::max(m, s.cwiseAbs().maxCoeff());
    return m;
}

void write_solution_csv(const Solution& sol, std::ostream& os)
{
    const std::size_t n = sol.n_players();
    os << "t,p";
    for (const char* name : {"v_", "grad_", "speed_"}) {
        for (std::size_t j = 1; j <= n; ++j) os << ',' << name << j;
    }
    os << ",agg_speed\n";
    os << std::setprecision(17);
    for (Eigen::Index k = 0; k < sol.n_t(); ++k) {
        for (Eigen::Index i = 0; i < sol.n_p(); ++i) {
            os << sol.times(k) << ',' << sol.prices(i);
            for (const auto* fields : {&sol.values, &sol.gradients, &sol.speeds}) {
                for (std::size_t j = 0; j < n; ++j) os << ',' << (*fields)[j](k, i);
            }
            os << ',' << sol.aggregate_speed(k, i) << '\n';
        }
    }
}

void write_solution_csv(const Solution& sol, const std::string& path)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_solution_csv(sol, os);
}

Solution read_solution_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw ParseError("solution CSV is empty");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 6 || header[0] != "t" || header[1] != "p" || header.back() != "agg_speed" ||
        (header.size() - 3) % 3 != 0) {
        throw ParseError("solution CSV header is not t,p,v_*,grad_*,speed_*,agg_speed");
    }
    const std::size_t n = (header.size() - 3) / 3;
    for (std::size_t j = 0; j < n; ++j) {
        if (header[2 + j] != "v_" + std::to_string(j + 1) || header[2 + n + j] != "grad_" + std::to_string(j + 1) ||
            header[2 + 2 * n + j] != "speed_" + std::to_string(j + 1)) {
            throw ParseError("solution CSV header columns out of order");
        }
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(header.size());
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("solution CSV: bad number '" + cell + "'");
            }
        }
        if (row.size() != header.size()) throw ParseError("solution CSV: ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("solution CSV has no rows");

    std::size_t n_p = 1;
    while (n_p < rows.size() && rows[n_p][0] == rows[0][0]) ++n_p;
    if (rows.size() % n_p != 0 || n_p < 2) throw ParseError("solution CSV is not a full (t, p) grid");
    const std::size_t n_t = rows.size() / n_p;
    if (n_t < 2) throw ParseError("solution CSV needs at least two time layers");

    Solution sol;
    sol.grid.n_p = static_cast<int>(n_p);
    sol.grid.n_t = static_cast<int>(n_t);
    sol.grid.p_min = rows[0][1];
    sol.grid.p_max = rows[n_p - 1][1];
    sol.times.resize(static_cast<Eigen::Index>(n_t));
    sol.prices.resize(static_cast<Eigen::Index>(n_p));
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_t), static_cast<Eigen::Index>(n_p));
    sol.values.assign(n, zero);
    sol.gradients.assign(n, zero);
    sol.speeds.assign(n, zero);
    sol.aggregate_speed = zero;
    for (std::size_t k = 0; k < n_t; ++k) {
        for (std::size_t i = 0; i < n_p; ++i) {
            const auto& r = rows[k * n_p + i];
            if (r[1] != rows[i][1] || r[0] != rows[k * n_p][0]) throw ParseError("solution CSV is not a full (t, p) grid");
            sol.times(static_cast<Eigen::Index>(k)) = r[0];
            sol.prices(static_cast<Eigen::Index>(i)) = r[1];
            for (std::size_t j = 0; j < n; ++j) {
                sol.values[j](k, i) = r[2 + j];
                sol.gradients[j](k, i) = r[2 + n + j];
                sol.speeds[j](k, i) = r[2 + 2 * n + j];
            }
            sol.aggregate_speed(k, i) = r.back();
        }
    }
    sol.meta.scheme = "csv";
    sol.meta.n_t_requested = sol.grid.n_t;
    return sol;
}

Solution read_solution_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path);
    return read_solution_csv(is);
}

}  // namespace illiq
