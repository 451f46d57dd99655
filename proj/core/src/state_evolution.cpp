#include "sslgmm/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "sslgmm/csv.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/potentials.hpp"
#include "sslgmm/quadrature.hpp"

namespace sslgmm {

namespace {

constexpr double zero_threshold = 1e-5;
constexpr int coarse_points = 81;
constexpr double coarse_chi_min = 1e-6;
constexpr int max_bisection = 200;

void check_chi(double chi) {
    if (!(chi > 0.0) || !std::isfinite(chi)) throw InvalidArgument("chi must be positive and finite");
}

OrderParams advance(const OrderParams& current, const ModelParams& params, double chi, int nodes) {
    check_chi(chi);
    const double s2 = params.sigma2;
    double f_mean = 0.0;
    double f2_mean = 0.0;
    if (params.alpha_u > 0.0) {
        const auto in = se_integrals(params, chi, current.k, current.v, nodes, false);
        f_mean = in.f_mean;
        f2_mean = in.f2_mean;
    }
    const double k = chi * (params.alpha_l + params.alpha_u * f_mean) / s2;
    const double v = chi * chi * (params.alpha_l + params.alpha_u * f2_mean) / s2;
    return make_order_params(chi, k, v, params.lambda0, current.iter + 1);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<double> coarse_grid(const ModelParams& params) {
    // RMLE stops short of t = chi/sigma2 = 1: beyond it the effective potential jumps and
    // the pointwise response misses the delta contribution.
    const double hi = params.mode == EstimatorMode::Rmle ? params.sigma2 * (1.0 - 1e-6) : 10.0 * params.sigma2;
    std::vector<double> grid(coarse_points);
    const double a = std::log(coarse_chi_min);
    const double b = std::log(hi);
    for (int i = 0; i < coarse_points; ++i) grid[i] = std::exp(a + (b - a) * i / (coarse_points - 1));
    grid.back() = hi;
    return grid;
}

SeOptions tightened(const SeOptions& options) {
    SeOptions o = options;
    o.eps = std::min(options.eps, 1e-12);
    return o;
}

LambdaChiRow evaluate_row(const ModelParams& params, double chi, SeBranch branch, const SeOptions& options) {
    LambdaChiRow row;
    row.chi = chi;
    const auto fp = se_fixed_point(params, chi, branch_init(branch, chi, params.lambda0), options);
    row.k_star = fp.op.k;
    row.v_star = fp.op.v;
    row.phase = fixed_point_tag(fp);
    try {
        row.lambda = lambda_from_chi(params, chi, fp.op, options.quadrature_nodes);
    } catch (const SingularityError&) {
        row.lambda = NAN;
        row.phase = "singular";
    }
    if (!fp.converged) row.lambda = NAN;
    return row;
}

std::mutex table_mutex;
std::map<std::string, std::unique_ptr<LambdaChiTable>> table_cache;

}  // namespace

OrderParams make_order_params(double chi, double k, double v, double lambda0, int iter) {
    return {chi, k, v, k * k / lambda0 + v, iter};
}

SeIntegrals se_integrals(const ModelParams& params, double chi, double k, double v, int nodes, bool with_t) {
    const double t = chi / params.sigma2;
    const double rho = params.rho;
    const double v_tilde = k * k / params.lambda0 + v;
    const double mean = k / (params.lambda0 * params.sigma2);
    const double scale = std::sqrt(std::max(v_tilde, 0.0) / params.sigma2);

    SeIntegrals out;
    auto accumulate = [&](double weight, double sign, double cls, double z) {
        const auto e = evaluate_potential(params.mode, sign * mean + scale * z, t, rho, with_t);
        out.f_mean += weight * cls * sign * e.f_val;
        out.f2_mean += weight * cls * e.f_val * e.f_val;
        if (with_t) {
            out.t_mean += weight * cls * e.t_val;
            out.t2_mean += weight * cls * e.t_val * e.t_val;
        }
    };
    if (scale == 0.0) {
        accumulate(1.0, 1.0, rho, 0.0);
        accumulate(1.0, -1.0, 1.0 - rho, 0.0);
        return out;
    }
    // Both potentials vary fastest around p0 = -ln(rho/(1-rho))/2; for RMLE the width there
    // shrinks like |1-t|^{3/2} and the minimizer jumps once t > 1.
    const double p0 = -0.5 * std::log(rho / (1.0 - rho));
    const double width =
        params.mode == EstimatorMode::Rmle ? std::max(0.5 * std::pow(std::abs(1.0 - t), 1.5), 1e-9) : 1.0;
    const int order = std::max(8, nodes / 20);
    for (double sign : {1.0, -1.0}) {
        const double cls = sign > 0.0 ? rho : 1.0 - rho;
        if (cls == 0.0) continue;
        const double feature = (p0 - sign * mean) / scale;
        const auto cuts = graded_breakpoints(feature, width / scale);
        const auto& rule = gauss_legendre_rule(order);
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
            const double half = 0.5 * (cuts[j + 1] - cuts[j]);
            const double mid = 0.5 * (cuts[j + 1] + cuts[j]);
            for (int i = 0; i < rule.size(); ++i) {
                const double z = mid + half * rule.nodes()[i];
                accumulate(half * rule.weights()[i] * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi),
                           sign, cls, z);
            }
        }
    }
    return out;
}

OrderParams se_step_rmle(const OrderParams& current, const ModelParams& params, double chi_fixed, int nodes) {
    ModelParams p = params;
    p.mode = EstimatorMode::Rmle;
    return advance(current, p, chi_fixed, nodes);
}

OrderParams se_step_bayes(const OrderParams& current, const ModelParams& params, double chi_fixed, int nodes) {
    ModelParams p = params;
    p.mode = EstimatorMode::Bayes;
    return advance(current, p, chi_fixed, nodes);
}

OrderParams se_step(const OrderParams& current, const ModelParams& params, double chi_fixed, int nodes) {
    return advance(current, params, chi_fixed, nodes);
}

SeFixedPoint se_fixed_point(const ModelParams& params, double chi, const OrderParams& init,
                            const SeOptions& options) {
    params.validate();
    SeFixedPoint out;
    OrderParams cur = make_order_params(chi, init.k, init.v, params.lambda0, 0);
    for (int it = 1; it <= options.max_iter; ++it) {
        OrderParams next = advance(cur, params, chi, options.quadrature_nodes);
        if (options.damping > 0.0) {
            next.k = (1.0 - options.damping) * next.k + options.damping * cur.k;
            next.v = (1.0 - options.damping) * next.v + options.damping * cur.v;
            next.v_tilde = next.k * next.k / params.lambda0 + next.v;
        }
        if (!std::isfinite(next.k) || !std::isfinite(next.v)) {
            out.op = cur;
            out.iterations = it;
            out.residual = INFINITY;
            return out;
        }
        const double change = std::abs(next.k - cur.k) + std::abs(next.v - cur.v);
        cur = next;
        out.iterations = it;
        out.residual = change;
        if (change < options.eps * (1.0 + std::abs(cur.k) + std::abs(cur.v))) {
            out.converged = true;
            break;
        }
    }
    out.op = cur;
    return out;
}

std::vector<OrderParams> se_trajectory(const ModelParams& params, double chi, const OrderParams& init, int steps,
                                       int nodes) {
    std::vector<OrderParams> traj;
    traj.reserve(steps + 1);
    traj.push_back(make_order_params(chi, init.k, init.v, params.lambda0, 0));
    for (int s = 0; s < steps; ++s) traj.push_back(advance(traj.back(), params, chi, nodes));
    return traj;
}

double lambda_from_chi(const ModelParams& params, double chi, const OrderParams& fixed_point, int nodes) {
    check_chi(chi);
    double t_mean = 0.0;
    if (params.alpha_u > 0.0) t_mean = se_integrals(params, chi, fixed_point.k, fixed_point.v, nodes, true).t_mean;
    return 1.0 / chi - params.alpha() / params.sigma2 + params.alpha_u * t_mean / params.sigma2;
}

std::string_view to_string(SeBranch branch) {
    return branch == SeBranch::Informed ? "informed" : "uninformed";
}

SeBranch parse_se_branch(std::string_view text) {
    if (text == "informed") return SeBranch::Informed;
    if (text == "uninformed") return SeBranch::Uninformed;
    throw InvalidArgument("unknown SE branch '" + std::string(text) + "'");
}

OrderParams branch_init(SeBranch branch, double chi, double lambda0) {
    if (branch == SeBranch::Informed) return make_order_params(chi, 1.0, 0.0, lambda0);
    return make_order_params(chi, 1e-6, 1e-6, lambda0);
}

std::string fixed_point_tag(const SeFixedPoint& fp) {
    if (!fp.converged) return "nonconverged";
    const bool k_zero = std::abs(fp.op.k) < zero_threshold;
    const bool v_zero = std::abs(fp.op.v) < zero_threshold;
    if (k_zero && v_zero) return "undetected";
    if (k_zero) return "random";
    return "detected";
}

LambdaChiTable build_lambda_chi_table(const ModelParams& params, const std::vector<double>& chi_grid,
                                      SeBranch branch, const SeOptions& options) {
    params.validate();
    for (std::size_t i = 1; i < chi_grid.size(); ++i) {
        if (!(chi_grid[i] > chi_grid[i - 1])) throw InvalidArgument("chi grid must be strictly increasing");
    }
    LambdaChiTable table;
    table.rows.reserve(chi_grid.size());
    for (double chi : chi_grid) table.rows.push_back(evaluate_row(params, chi, branch, options));

    const LambdaChiRow* prev = nullptr;
    for (const auto& row : table.rows) {
        if (!std::isfinite(row.lambda)) continue;
        if (prev && !(row.lambda < prev->lambda)) {
            table.monotone = false;
            table.transition_chis.push_back(row.chi);
        }
        prev = &row;
    }
    return table;
}

void write_lambda_chi_csv(std::ostream& out, const LambdaChiTable& table) {
    CsvWriter csv(out, "lambda-chi/1", {"chi", "lambda", "k_star", "v_star", "phase"});
    for (const auto& r : table.rows) {
        csv.cell(r.chi).cell(r.lambda).cell(r.k_star).cell(r.v_star).cell(r.phase);
        csv.end_row();
    }
}

LambdaChiTable read_lambda_chi_csv(std::istream& in) {
    LambdaChiTable table;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "chi,lambda,k_star,v_star,phase") throw InvalidArgument("unexpected lambda-chi header");
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell[5];
        for (auto& c : cell) std::getline(ss, c, ',');
        LambdaChiRow r;
        r.chi = std::strtod(cell[0].c_str(), nullptr);
        r.lambda = std::strtod(cell[1].c_str(), nullptr);
        r.k_star = std::strtod(cell[2].c_str(), nullptr);
        r.v_star = std::strtod(cell[3].c_str(), nullptr);
        r.phase = cell[4];
        table.rows.push_back(r);
    }
    const LambdaChiRow* prev = nullptr;
    for (const auto& row : table.rows) {
        if (!std::isfinite(row.lambda)) continue;
        if (prev && !(row.lambda < prev->lambda)) {
            table.monotone = false;
            table.transition_chis.push_back(row.chi);
        }
        prev = &row;
    }
    return table;
}

std::string lambda_chi_cache_key(const ModelParams& params, SeBranch branch, int nodes) {
    std::ostringstream s;
    s << "v2;rho=" << format_double(params.rho) << ";lambda0=" << format_double(params.lambda0)
      << ";sigma2=" << format_double(params.sigma2) << ";alpha_l=" << format_double(params.alpha_l)
      << ";alpha_u=" << format_double(params.alpha_u) << ";mode=" << to_string(params.mode)
      << ";branch=" << to_string(branch) << ";nodes=" << nodes << ";points=" << coarse_points;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s.str())));
    return buf;
}

const LambdaChiTable& cached_lambda_chi_table(const ModelParams& params, SeBranch branch,
                                              const SeOptions& options) {
    const std::string key = lambda_chi_cache_key(params, branch, options.quadrature_nodes);
    {
        std::lock_guard lock(table_mutex);
        auto it = table_cache.find(key);
        if (it != table_cache.end()) return *it->second;
    }

    std::unique_ptr<LambdaChiTable> table;
    std::filesystem::path file;
    if (const char* dir = std::getenv("SSL_GMM_LAB_CACHE"); dir && *dir) {
        file = std::filesystem::path(dir) / ("lambda_chi_" + key + ".csv");
        std::ifstream in(file);
        if (in) {
            try {
                table = std::make_unique<LambdaChiTable>(read_lambda_chi_csv(in));
                if (table->rows.size() != std::size_t(coarse_points)) table.reset();
            } catch (const Error&) {
                table.reset();
            }
        }
    }
    if (!table) {
        table = std::make_unique<LambdaChiTable>(
            build_lambda_chi_table(params, coarse_grid(params), branch, tightened(options)));
        if (!file.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(file.parent_path(), ec);
            const auto tmp = file.string() + ".tmp";
            {
                std::ofstream out(tmp);
                write_lambda_chi_csv(out, *table);
            }
            std::filesystem::rename(tmp, file, ec);
        }
    }

    std::lock_guard lock(table_mutex);
    auto [it, inserted] = table_cache.try_emplace(key, std::move(table));
    return *it->second;
}

double chi_from_lambda(const ModelParams& params, double lambda, SeBranch branch, const SeOptions& options) {
    params.validate();
    if (!std::isfinite(lambda)) throw InvalidArgument("lambda must be finite");
    const auto& table = cached_lambda_chi_table(params, branch, options);
    const SeOptions tight = tightened(options);

    const LambdaChiRow* prev = nullptr;
    for (const auto& row : table.rows) {
        if (!std::isfinite(row.lambda)) {
            prev = nullptr;
            continue;
        }
        if (row.lambda == lambda) return row.chi;
        if (prev && prev->lambda > lambda && row.lambda < lambda) {
            double lo = prev->chi;
            double hi = row.chi;
            double mid = 0.5 * (lo + hi);
            for (int it = 0; it < max_bisection; ++it) {
                mid = 0.5 * (lo + hi);
                const auto r = evaluate_row(params, mid, branch, tight);
                if (!std::isfinite(r.lambda)) {
                    throw ConvergenceError("lambda(chi) undefined inside bracket at chi=" + format_double(mid),
                                           r.lambda);
                }
                const double diff = r.lambda - lambda;
                if (std::abs(diff) <= 1e-11 * std::max(1.0, std::abs(lambda))) return mid;
                if (diff > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo <= 1e-15 * hi) break;
            }
            return 0.5 * (lo + hi);
        }
        prev = &row;
    }
    throw OutOfRange("no chi on the " + std::string(to_string(branch)) + " branch gives lambda=" +
                     format_double(lambda));
}

}  // namespace sslgmm
