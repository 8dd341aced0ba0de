#include "illiq/model.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace illiq {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double logistic(double u)
{
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

// w * log(1 + exp(x / w)) without overflow
double softplus(double x, double w)
{
    const double u = x / w;
    return w * (std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))));
}

// max |c(u)| for the derivative of a cubic Hermite segment, which is quadratic in u
double segment_max_slope(const MonotoneCubic& c, Eigen::Index k)
{
    const auto& x = c.knots();
    const double a = x(k);
    const double b = x(k + 1);
    double best = std::max(std::abs(c.slope(a)), std::abs(c.slope(b)));
    // vertex of the quadratic derivative: sample the quadratic at three points
    const double s0 = c.slope(a);
    const double sm = c.slope(0.5 * (a + b));
    const double s1 = c.slope(b);
    const double curv = s0 - 2.0 * sm + s1;
    if (curv != 0.0) {
        const double u = 0.5 - 0.25 * (s1 - s0) / curv;
        if (u > 0.0 && u < 1.0) best = std::max(best, std::abs(c.slope(a + u * (b - a))));
    }
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// CostFunction

bool CostFunction::is_linear() const { return linear_kappa().has_value(); }

std::optional<double> CostFunction::linear_kappa() const
{
    if (auto* l = std::get_if<LinearCost>(&kind)) return l->kappa;
    if (auto* s = std::get_if<SmoothedSpreadCost>(&kind); s && s->s == 0.0) return s->kappa;
    return std::nullopt;
}

std::optional<double> CostFunction::analytic_floor() const
{
    if (auto* l = std::get_if<LinearCost>(&kind)) return l->kappa;
    if (auto* s = std::get_if<SmoothedSpreadCost>(&kind)) return s->kappa;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Payoff

Payoff::Payoff() : node_(std::make_shared<const PayoffNode>(PayoffNode{ZeroPayoff{}})) {}

Payoff Payoff::smoothed_call(double strike, double cap, double width)
{
    if (!(width > 0.0)) throw ValidationError("payoff width must be > 0");
    if (!(cap > 0.0)) throw ValidationError("payoff cap must be > 0");
    if (!std::isfinite(strike)) throw ValidationError("payoff strike must be finite");
    return Payoff(std::make_shared<const PayoffNode>(PayoffNode{SmoothedCall{strike, cap, width}}));
}

Payoff Payoff::smoothed_digital(double strike, double width)
{
    if (!(width > 0.0)) throw ValidationError("payoff width must be > 0");
    if (!std::isfinite(strike)) throw ValidationError("payoff strike must be finite");
    return Payoff(std::make_shared<const PayoffNode>(PayoffNode{SmoothedDigital{strike, width}}));
}

Payoff Payoff::scaled(Payoff inner, double factor)
{
    if (!std::isfinite(factor)) throw ValidationError("payoff factor must be finite");
    return Payoff(std::make_shared<const PayoffNode>(PayoffNode{Scaled{std::move(inner), factor}}));
}

Payoff Payoff::negated(Payoff inner)
{
    return Payoff(std::make_shared<const PayoffNode>(PayoffNode{Negated{std::move(inner)}}));
}

Payoff Payoff::sum(std::vector<Payoff> terms)
{
    return Payoff(std::make_shared<const PayoffNode>(PayoffNode{Sum{std::move(terms)}}));
}

Payoff Payoff::custom_grid(Eigen::VectorXd p, Eigen::VectorXd values)
{
    MonotoneCubic curve(std::move(p), std::move(values));
    double s = 0.0;
    for (Eigen::Index k = 0; k + 1 < curve.knots().size(); ++k) s = std::max(s, segment_max_slope(curve, k));
    return Payoff(std::make_shared<const PayoffNode>(PayoffNode{CustomGrid{std::move(curve), 1.01 * s}}));
}

bool Payoff::is_zero() const
{
    return std::visit(overloaded{
                          [](const ZeroPayoff&) { return true; },
                          [](const Scaled& s) { return s.factor == 0.0 || s.inner.is_zero(); },
                          [](const Negated& n) { return n.inner.is_zero(); },
                          [](const Sum& s) {
                              return std::all_of(s.terms.begin(), s.terms.end(),
                                                 [](const Payoff& t) { return t.is_zero(); });
                          },
                          [](const CustomGrid& g) { return g.curve.values().isZero(0.0); },
                          [](const auto&) { return false; },
                      },
                      node().kind);
}

double payoff_value(const Payoff& h, double p)
{
    return std::visit(overloaded{
                          [](const ZeroPayoff&) { return 0.0; },
                          [p](const SmoothedCall& c) {
                              return softplus(p - c.strike, c.width) - softplus(p - c.strike - c.cap, c.width);
                          },
                          [p](const SmoothedDigital& d) { return logistic((p - d.strike) / d.width); },
                          [p](const Scaled& s) { return s.factor * payoff_value(s.inner, p); },
                          [p](const Negated& n) { return -payoff_value(n.inner, p); },
                          [p](const Sum& s) {
                              double acc = 0.0;
                              for (const auto& t : s.terms) acc += payoff_value(t, p);
                              return acc;
                          },
                          [p](const CustomGrid& g) {
                              if (p <= g.curve.lo()) return g.curve.values()(0);
                              if (p >= g.curve.hi()) return g.curve.values()(g.curve.values().size() - 1);
                              return g.curve.value(p);
                          },
                      },
                      h.node().kind);
}

double payoff_slope(const Payoff& h, double p)
{
    return std::visit(overloaded{
                          [](const ZeroPayoff&) { return 0.0; },
                          [p](const SmoothedCall& c) {
                              return logistic((p - c.strike) / c.width) -
                                     logistic((p - c.strike - c.cap) / c.width);
                          },
                          [p](const SmoothedDigital& d) {
                              const double s = logistic((p - d.strike) / d.width);
                              return s * (1.0 - s) / d.width;
                          },
                          [p](const Scaled& s) { return s.factor * payoff_slope(s.inner, p); },
                          [p](const Negated& n) { return -payoff_slope(n.inner, p); },
                          [p](const Sum& s) {
                              double acc = 0.0;
                              for (const auto& t : s.terms) acc += payoff_slope(t, p);
                              return acc;
                          },
                          [p](const CustomGrid& g) {
                              if (p <= g.curve.lo() || p >= g.curve.hi()) return 0.0;
                              return g.curve.slope(p);
                          },
                      },
                      h.node().kind);
}

double payoff_sup_slope(const Payoff& h)
{
    return std::visit(overloaded{
                          [](const ZeroPayoff&) { return 0.0; },
                          [](const SmoothedCall& c) { return std::tanh(c.cap / (4.0 * c.width)); },
                          [](const SmoothedDigital& d) { return 1.0 / (4.0 * d.width); },
                          [](const Scaled& s) { return std::abs(s.factor) * payoff_sup_slope(s.inner); },
                          [](const Negated& n) { return payoff_sup_slope(n.inner); },
                          [](const Sum& s) {
                              double acc = 0.0;
                              for (const auto& t : s.terms) acc += payoff_sup_slope(t);
                              return acc;
                          },
                          [](const CustomGrid& g) { return g.slope_bound; },
                      },
                      h.node().kind);
}

double payoff_bound(const Payoff& h)
{
    return std::visit(overloaded{
                          [](const ZeroPayoff&) { return 0.0; },
                          [](const SmoothedCall& c) { return c.cap; },
                          [](const SmoothedDigital&) { return 1.0; },
                          [](const Scaled& s) { return std::abs(s.factor) * payoff_bound(s.inner); },
                          [](const Negated& n) { return payoff_bound(n.inner); },
                          [](const Sum& s) {
                              double acc = 0.0;
                              for (const auto& t : s.terms) acc += payoff_bound(t);
                              return acc;
                          },
                          [](const CustomGrid& g) { return g.curve.values().cwiseAbs().maxCoeff(); },
                      },
                      h.node().kind);
}

double payoff_feature_scale(const Payoff& h)
{
    constexpr double none = std::numeric_limits<double>::infinity();
    return std::visit(overloaded{
                          [](const ZeroPayoff&) { return none; },
                          [](const SmoothedCall& c) { return std::min(c.width, c.cap); },
                          [](const SmoothedDigital& d) { return d.width; },
                          [](const Scaled& s) { return s.factor == 0.0 ? none : payoff_feature_scale(s.inner); },
                          [](const Negated& n) { return payoff_feature_scale(n.inner); },
                          [](const Sum& s) {
                              double m = none;
                              for (const auto& t : s.terms) m = std::min(m, payoff_feature_scale(t));
                              return m;
                          },
                          [](const CustomGrid& g) {
                              const auto& k = g.curve.knots();
                              return (k.tail(k.size() - 1) - k.head(k.size() - 1)).minCoeff();
                          },
                      },
                      h.node().kind);
}

// ---------------------------------------------------------------------------

double Utility::operator()(double x) const
{
    return is_cara() ? -std::exp(-alpha * x) : x;
}

bool GameSpec::all_risk_neutral() const
{
    return std::all_of(players.begin(), players.end(), [](const PlayerSpec& pl) { return !pl.utility.is_cara(); });
}

bool GameSpec::all_cara() const
{
    return std::all_of(players.begin(), players.end(), [](const PlayerSpec& pl) { return pl.utility.is_cara(); });
}

double GameSpec::max_payoff_slope() const
{
    double h = 0.0;
    for (const auto& pl : players) h = std::max(h, payoff_sup_slope(pl.endowment));
    return h;
}

GridSpec default_grid(const MarketParams& m)
{
    GridSpec g;
    const double half = 6.0 * m.horizon_scale();
    g.p_min = m.p0 - half;
    g.p_max = m.p0 + half;
    return g;
}

// ---------------------------------------------------------------------------
// Validation

void validate(const GameSpec& game)
{
    const auto& m = game.market;
    if (!(m.sigma > 0.0) || !std::isfinite(m.sigma)) throw ValidationError("sigma must be > 0");
    if (!(m.lambda > 0.0) || !std::isfinite(m.lambda)) throw ValidationError("lambda must be > 0");
    if (!(m.T > 0.0) || !std::isfinite(m.T)) throw ValidationError("T must be > 0");
    if (!std::isfinite(m.p0)) throw ValidationError("p0 must be finite");

    std::visit(overloaded{
                   [](const LinearCost& c) {
                       if (!(c.kappa > 0.0)) throw ValidationError("kappa must be > 0");
                   },
                   [](const SmoothedSpreadCost& c) {
                       if (!(c.kappa > 0.0)) throw ValidationError("kappa must be > 0");
                       if (!(c.s >= 0.0)) throw ValidationError("s must be >= 0");
                       if (!(c.C > 0.0)) throw ValidationError("C must be > 0");
                   },
                   [](const TableCost& c) {
                       if (!c.curve.contains(0.0)) throw ValidationError("cost table must cover z = 0");
                       if (std::abs(c.curve.value(0.0)) > 1e-12) throw ValidationError("cost table must have g(0) = 0");
                   },
               },
               game.cost.kind);

    if (game.players.empty()) throw ValidationError("at least one player is required");
    for (std::size_t j = 0; j < game.players.size(); ++j) {
        const auto& u = game.players[j].utility;
        if (u.is_cara() && !(u.alpha > 0.0 && std::isfinite(u.alpha))) {
            throw ValidationError("alpha must be > 0 for CARA player " + std::to_string(j + 1));
        }
    }
}

void validate(const GridSpec& grid, const MarketParams& market)
{
    if (!(grid.p_min < market.p0 && market.p0 < grid.p_max)) throw ValidationError("grid must satisfy p_min < p0 < p_max");
    if (grid.n_p < 3) throw ValidationError("n_p must be >= 3");
    if (grid.n_p % 2 == 0) throw ValidationError("n_p must be odd");
    if (grid.n_t < 2) throw ValidationError("n_t must be >= 2");
    if (grid.quad_nodes < 8) throw ValidationError("quad_nodes must be >= 8");
    const double half = 6.0 * market.horizon_scale();
    const double slack = 1e-9 * (1.0 + std::abs(market.p0));
    if (grid.p_min > market.p0 - half + slack || grid.p_max < market.p0 + half - slack) {
        throw ValidationError("grid must cover p0 +- 6 sigma sqrt(T)");
    }
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!obj.is_object()) throw ParseError(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ParseError("unknown key '" + key + "' in " + where);
        }
    }
}

double number(const json& obj, const char* key, const std::string& where)
{
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError("missing '" + std::string(key) + "' in " + where);
    if (!it->is_number()) throw ParseError("'" + std::string(key) + "' in " + where + " must be a number");
    return it->get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where)
{
    return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::string kind_of(const json& obj, const std::string& where)
{
    auto it = obj.find("kind");
    if (it == obj.end() || !it->is_string()) throw ParseError("missing string 'kind' in " + where);
    return it->get<std::string>();
}

Eigen::VectorXd vector_of(const json& arr, const std::string& where)
{
    if (!arr.is_array()) throw ParseError(where + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw ParseError(where + " must contain numbers");
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    return v;
}

Payoff parse_payoff(const json& obj, const MarketParams& m, const std::string& where)
{
    reject_unknown(obj, {"kind", "K", "cap", "width", "factor", "grid", "inner", "terms"}, where);
    const std::string kind = kind_of(obj, where);
    const double scale = m.horizon_scale();
    if (kind == "smoothed_call") {
        return Payoff::smoothed_call(number(obj, "K", where), number_or(obj, "cap", 10.0 * scale, where),
                                     number_or(obj, "width", 0.05 * scale, where));
    }
    if (kind == "smoothed_digital") {
        return Payoff::smoothed_digital(number(obj, "K", where), number_or(obj, "width", 0.05 * scale, where));
    }
    if (kind == "scaled") {
        if (!obj.contains("inner")) throw ParseError("missing 'inner' in " + where);
        return Payoff::scaled(parse_payoff(obj["inner"], m, where + ".inner"), number(obj, "factor", where));
    }
    if (kind == "negated") {
        if (!obj.contains("inner")) throw ParseError("missing 'inner' in " + where);
        return Payoff::negated(parse_payoff(obj["inner"], m, where + ".inner"));
    }
    if (kind == "sum") {
        if (!obj.contains("terms") || !obj["terms"].is_array()) throw ParseError("missing array 'terms' in " + where);
        std::vector<Payoff> terms;
        for (std::size_t i = 0; i < obj["terms"].size(); ++i) {
            terms.push_back(parse_payoff(obj["terms"][i], m, where + ".terms[" + std::to_string(i) + "]"));
        }
        return Payoff::sum(std::move(terms));
    }
    if (kind == "custom_grid") {
        if (!obj.contains("grid")) throw ParseError("missing 'grid' in " + where);
        const json& g = obj["grid"];
        reject_unknown(g, {"p", "values"}, where + ".grid");
        if (!g.contains("p") || !g.contains("values")) throw ParseError(where + ".grid needs 'p' and 'values'");
        return Payoff::custom_grid(vector_of(g["p"], where + ".grid.p"), vector_of(g["values"], where + ".grid.values"));
    }
    if (kind == "zero") return Payoff();
    throw ParseError("unknown payoff kind '" + kind + "' in " + where);
}

CostFunction parse_cost(const json& obj)
{
    const std::string where = "cost";
    reject_unknown(obj, {"kind", "kappa", "s", "C", "table"}, where);
    const std::string kind = kind_of(obj, where);
    if (kind == "linear") return CostFunction::linear(number(obj, "kappa", where));
    if (kind == "smoothed_spread") {
        return CostFunction::smoothed_spread(number(obj, "kappa", where), number_or(obj, "s", 0.0, where),
                                             number_or(obj, "C", 100.0, where));
    }
    if (kind == "table") {
        if (!obj.contains("table")) throw ParseError("missing 'table' in cost");
        const json& t = obj["table"];
        reject_unknown(t, {"z", "g"}, "cost.table");
        if (!t.contains("z") || !t.contains("g")) throw ParseError("cost.table needs 'z' and 'g'");
        return CostFunction::table(vector_of(t["z"], "cost.table.z"), vector_of(t["g"], "cost.table.g"));
    }
    throw ParseError("unknown cost kind '" + kind + "'");
}

Utility parse_utility(const json& obj, const std::string& where)
{
    reject_unknown(obj, {"kind", "alpha"}, where);
    const std::string kind = kind_of(obj, where);
    if (kind == "risk_neutral") {
        if (obj.contains("alpha")) throw ParseError("risk-neutral utility takes no 'alpha' in " + where);
        return Utility::risk_neutral();
    }
    if (kind == "cara") return Utility::cara(number(obj, "alpha", where));
    throw ParseError("unknown utility kind '" + kind + "' in " + where);
}

}  // namespace

Config load_config(std::string_view text)
{
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    reject_unknown(root, {"market", "cost", "players", "grid"}, "config");
    for (const char* key : {"market", "cost", "players"}) {
        if (!root.contains(key)) throw ParseError("missing '" + std::string(key) + "' in config");
    }

    Config cfg;
    const json& mj = root["market"];
    reject_unknown(mj, {"sigma", "lambda", "T", "p0"}, "market");
    cfg.game.market = {number(mj, "sigma", "market"), number(mj, "lambda", "market"), number(mj, "T", "market"),
                       number(mj, "p0", "market")};
    // market first: payoff defaults scale with sigma sqrt(T)
    validate(GameSpec{cfg.game.market, CostFunction::linear(1.0), {PlayerSpec{}}});

    cfg.game.cost = parse_cost(root["cost"]);

    const json& pj = root["players"];
    if (!pj.is_array()) throw ParseError("'players' must be an array");
    for (std::size_t i = 0; i < pj.size(); ++i) {
        const std::string where = "players[" + std::to_string(i) + "]";
        reject_unknown(pj[i], {"utility", "payoff"}, where);
        if (!pj[i].contains("utility") || !pj[i].contains("payoff")) {
            throw ParseError(where + " needs 'utility' and 'payoff'");
        }
        cfg.game.players.push_back({parse_utility(pj[i]["utility"], where + ".utility"),
                                    parse_payoff(pj[i]["payoff"], cfg.game.market, where + ".payoff")});
    }
    validate(cfg.game);

    cfg.grid = default_grid(cfg.game.market);
    if (root.contains("grid")) {
        const json& gj = root["grid"];
        reject_unknown(gj, {"p_min", "p_max", "n_p", "n_t", "quad_nodes"}, "grid");
        auto integer = [&](const char* key, int fallback) {
            if (!gj.contains(key)) return fallback;
            if (!gj[key].is_number_integer()) throw ParseError(std::string("'") + key + "' in grid must be an integer");
            return gj[key].get<int>();
        };
        cfg.grid.p_min = number_or(gj, "p_min", cfg.grid.p_min, "grid");
        cfg.grid.p_max = number_or(gj, "p_max", cfg.grid.p_max, "grid");
        cfg.grid.n_p = integer("n_p", cfg.grid.n_p);
        cfg.grid.n_t = integer("n_t", cfg.grid.n_t);
        cfg.grid.quad_nodes = integer("quad_nodes", cfg.grid.quad_nodes);
    }
    validate(cfg.grid, cfg.game.market);
    return cfg;
}

GameSpec load_game(std::string_view text) { return load_config(text).game; }

// ---------------------------------------------------------------------------
// Canonical JSON

namespace {

json to_json_vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

json to_json(const Payoff& h)
{
    return std::visit(overloaded{
                          [](const ZeroPayoff&) { return json{{"kind", "zero"}}; },
                          [](const SmoothedCall& c) {
                              return json{{"kind", "smoothed_call"}, {"K", c.strike}, {"cap", c.cap}, {"width", c.width}};
                          },
                          [](const SmoothedDigital& d) {
                              return json{{"kind", "smoothed_digital"}, {"K", d.strike}, {"width", d.width}};
                          },
                          [](const Scaled& s) {
                              return json{{"kind", "scaled"}, {"factor", s.factor}, {"inner", to_json(s.inner)}};
                          },
                          [](const Negated& n) { return json{{"kind", "negated"}, {"inner", to_json(n.inner)}}; },
                          [](const Sum& s) {
                              json terms = json::array();
                              for (const auto& t : s.terms) terms.push_back(to_json(t));
                              return json{{"kind", "sum"}, {"terms", terms}};
                          },
                          [](const CustomGrid& g) {
                              return json{{"kind", "custom_grid"},
                                          {"grid", {{"p", to_json_vec(g.curve.knots())}, {"values", to_json_vec(g.curve.values())}}}};
                          },
                      },
                      h.node().kind);
}

json to_json(const GameSpec& game)
{
    json j;
    const auto& m = game.market;
    j["market"] = {{"sigma", m.sigma}, {"lambda", m.lambda}, {"T", m.T}, {"p0", m.p0}};
    j["cost"] = std::visit(overloaded{
                               [](const LinearCost& c) { return json{{"kind", "linear"}, {"kappa", c.kappa}}; },
                               [](const SmoothedSpreadCost& c) {
                                   return json{{"kind", "smoothed_spread"}, {"kappa", c.kappa}, {"s", c.s}, {"C", c.C}};
                               },
                               [](const TableCost& c) {
                                   return json{{"kind", "table"},
                                               {"table", {{"z", to_json_vec(c.curve.knots())}, {"g", to_json_vec(c.curve.values())}}}};
                               },
                           },
                           game.cost.kind);
    j["players"] = json::array();
    for (const auto& pl : game.players) {
        json u = pl.utility.is_cara() ? json{{"kind", "cara"}, {"alpha", pl.utility.alpha}} : json{{"kind", "risk_neutral"}};
        j["players"].push_back({{"utility", u}, {"payoff", to_json(pl.endowment)}});
    }
    return j;
}

json to_json(const GridSpec& grid)
{
    return {{"p_min", grid.p_min}, {"p_max", grid.p_max}, {"n_p", grid.n_p}, {"n_t", grid.n_t}, {"quad_nodes", grid.quad_nodes}};
}

}  // namespace illiq
