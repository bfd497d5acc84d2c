#include "nmips/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nmips {

std::string_view provenance_name(Provenance p)
{
    switch (p) {
    case Provenance::Analytic: return "analytic";
    case Provenance::FDM: return "fdm";
    case Provenance::CrankNicolson: return "crank-nicolson";
    }
    return "?";
}

Point SolutionGrid::node(std::size_t flat_index) const
{
    Point p{};
    for (std::size_t a = axes.size(); a-- > 0;) {
        const std::size_t len = axes[a].size();
        p[static_cast<std::size_t>(axis_vars[a])] = axes[a][flat_index % len];
        flat_index /= len;
    }
    return p;
}

PointSet SolutionGrid::all_points() const
{
    PointSet ps(node_count());
    for (std::size_t i = 0; i < node_count(); ++i) ps.set(i, node(i));
    return ps;
}

namespace {

    std::vector<double> linspace(double lo, double hi, int n)
    {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
        return v;
    }

    // Periodic nodes j/nx, j = 0..nx-1 (x = 1 coincides with x = 0).
    std::vector<double> periodic_nodes(const Interval& b, int nx)
    {
        std::vector<double> v(static_cast<std::size_t>(nx));
        for (int j = 0; j < nx; ++j) v[static_cast<std::size_t>(j)] = b.lo + (b.hi - b.lo) * j / nx;
        return v;
    }

    void require_family(const TaskSpec& task, Family f, const char* who)
    {
        if (task.family != f) {
            throw std::invalid_argument(std::string(who) + ": wrong family " + std::string(family_name(task.family)));
        }
    }

    // Factorised cyclic tridiagonal matrix with constant bands (Sherman-Morrison).
    class CyclicTridiagonal {
    public:
        CyclicTridiagonal(std::size_t n, double lower, double diag, double upper)
            : n_(n)
            , lower_(lower)
            , upper_(upper)
        {
            if (n < 3) throw DataError("cyclic solve needs at least 3 unknowns");
            // Corner entries: A[0][n-1] = lower, A[n-1][0] = upper.
            gamma_ = -diag;
            diag_.assign(n, diag);
            diag_[0] = diag - gamma_;
            diag_[n - 1] = diag - upper * lower / gamma_;
            factor();
            std::vector<double> u(n, 0.0);
            u[0] = gamma_;
            u[n - 1] = upper;
            z_ = thomas(u);
            denom_ = 1.0 + z_[0] + lower * z_[n - 1] / gamma_;
            if (std::abs(denom_) < 1e-300) throw DataError("singular cyclic system");
        }

        std::vector<double> solve(const std::vector<double>& rhs) const
        {
            std::vector<double> x = thomas(rhs);
            const double fact = (x[0] + lower_ * x[n_ - 1] / gamma_) / denom_;
            for (std::size_t i = 0; i < n_; ++i) x[i] -= fact * z_[i];
            return x;
        }

    private:
        void factor()
        {
            cp_.assign(n_, 0.0);
            inv_.assign(n_, 0.0);
            double piv = diag_[0];
            for (std::size_t i = 0; i < n_; ++i) {
                if (i > 0) piv = diag_[i] - lower_ * cp_[i - 1];
                if (std::abs(piv) < 1e-300) throw DataError("singular tridiagonal system");
                inv_[i] = 1.0 / piv;
                cp_[i] = upper_ * inv_[i];
            }
        }

        std::vector<double> thomas(const std::vector<double>& r) const
        {
            std::vector<double> y(n_);
            y[0] = r[0] * inv_[0];
            for (std::size_t i = 1; i < n_; ++i) y[i] = (r[i] - lower_ * y[i - 1]) * inv_[i];
            for (std::size_t i = n_ - 1; i-- > 0;) y[i] -= cp_[i] * y[i + 1];
            return y;
        }

        std::size_t n_;
        double lower_;
        double upper_;
        double gamma_ = 0.0;
        double denom_ = 1.0;
        std::vector<double> diag_, cp_, inv_, z_;
    };

} // namespace

Dataset gen_analytic(const TaskSpec& task, std::size_t n_points, std::mt19937_64& rng)
{
    if (!family_is_analytic(task.family)) {
        throw std::invalid_argument("gen_analytic: " + std::string(family_name(task.family)) + " is not analytic");
    }
    Dataset d;
    d.variables = task.variables();
    d.provenance = Provenance::Analytic;
    d.task_id = task.task_id;
    for (std::size_t i = 0; i < n_points; ++i) {
        Point p{};
        for (Var v : d.variables) {
            const auto& b = task.bounds(v);
            p[static_cast<std::size_t>(v)] = std::uniform_real_distribution<double>(b.lo, b.hi)(rng);
        }
        d.points.push_back(p);
        d.values.push_back(analytic_value(task, p));
    }
    return d;
}

SolutionGrid solve_burgers_fdm(const TaskSpec& task, const BurgersOptions& opt)
{
    require_family(task, Family::Burgers1D, "solve_burgers_fdm");
    if (opt.nx < 3 || opt.nt < 1 || opt.store_every < 1) throw std::invalid_argument("solve_burgers_fdm: bad grid");
    const auto& bx = task.bounds(Var::X);
    const auto& bt = task.bounds(Var::T);
    const auto nx = static_cast<std::size_t>(opt.nx);
    const double dx = (bx.hi - bx.lo) / opt.nx;
    const double dt = (bt.hi - bt.lo) / opt.nt;
    const double diff = task.params[0] / std::numbers::pi;
    const double r = diff * dt / (dx * dx);

    SolutionGrid g;
    g.axis_vars = {Var::T, Var::X};
    g.axes.resize(2);
    g.axes[1] = periodic_nodes(bx, opt.nx);
    g.dx = dx;
    g.dt = dt;

    std::vector<double> u(nx);
    for (std::size_t j = 0; j < nx; ++j) u[j] = ic_value(task, make_point(g.axes[1][j], 0, 0, bt.lo));
    std::vector<double> next(nx);
    std::vector<double> flux(nx); // flux[j] at interface j+1/2

    auto store = [&](int step) {
        g.axes[0].push_back(bt.lo + step * dt);
        g.values.insert(g.values.end(), u.begin(), u.end());
    };
    store(0);
    for (int n = 1; n <= opt.nt; ++n) {
        double umax = 0.0;
        for (double v : u) umax = std::max(umax, std::abs(v));
        if (umax * dt / dx + 2.0 * r > 1.0) {
            throw DataError("solve_burgers_fdm: CFL violation (max|u| dt/dx + 2 nu dt/(pi dx^2) = "
                            + std::to_string(umax * dt / dx + 2.0 * r) + " > 1)");
        }
        for (std::size_t j = 0; j < nx; ++j) {
            const double ul = u[j];
            const double ur = u[(j + 1) % nx];
            const double speed = std::max(std::abs(ul), std::abs(ur));
            flux[j] = 0.25 * (ul * ul + ur * ur) - 0.5 * speed * (ur - ul);
        }
        for (std::size_t j = 0; j < nx; ++j) {
            const std::size_t jm = (j + nx - 1) % nx;
            const std::size_t jp = (j + 1) % nx;
            next[j] = u[j] - dt / dx * (flux[j] - flux[jm]) + r * (u[jp] - 2.0 * u[j] + u[jm]);
        }
        u.swap(next);
        if (n % opt.store_every == 0 || n == opt.nt) store(n);
    }
    for (double v : g.values) {
        if (!std::isfinite(v)) throw DataError("solve_burgers_fdm: non-finite value");
    }
    return g;
}

SolutionGrid solve_adv_diff_cn(const TaskSpec& task, const CrankNicolsonOptions& opt)
{
    require_family(task, Family::AdvDiff1D, "solve_adv_diff_cn");
    if (opt.nx < 3 || opt.nt < 1 || opt.store_every < 1) throw std::invalid_argument("solve_adv_diff_cn: bad grid");
    const auto& bx = task.bounds(Var::X);
    const auto& bt = task.bounds(Var::T);
    const auto nx = static_cast<std::size_t>(opt.nx);
    const double dx = (bx.hi - bx.lo) / opt.nx;
    const double dt = (bt.hi - bt.lo) / opt.nt;
    const double beta = task.params[0];
    const double alpha = task.params[1];

    // L u_j = lo * u_{j-1} + mid * u_j + hi * u_{j+1}
    const double lo = beta / (2.0 * dx) + alpha / (dx * dx);
    const double mid = -2.0 * alpha / (dx * dx);
    const double hi = -beta / (2.0 * dx) + alpha / (dx * dx);
    const double h = 0.5 * dt;
    const CyclicTridiagonal lhs(nx, -h * lo, 1.0 - h * mid, -h * hi);

    SolutionGrid g;
    g.axis_vars = {Var::T, Var::X};
    g.axes.resize(2);
    g.axes[1] = periodic_nodes(bx, opt.nx);
    g.dx = dx;
    g.dt = dt;
    std::vector<double> u(nx);
    for (std::size_t j = 0; j < nx; ++j) u[j] = ic_value(task, make_point(g.axes[1][j], 0, 0, bt.lo));
    g.axes[0].push_back(bt.lo);
    g.values.insert(g.values.end(), u.begin(), u.end());
    std::vector<double> rhs(nx);
    for (int n = 1; n <= opt.nt; ++n) {
        for (std::size_t j = 0; j < nx; ++j) {
            const double um = u[(j + nx - 1) % nx];
            const double up = u[(j + 1) % nx];
            rhs[j] = u[j] + h * (lo * um + mid * u[j] + hi * up);
        }
        u = lhs.solve(rhs);
        if (n % opt.store_every == 0 || n == opt.nt) {
            g.axes[0].push_back(bt.lo + n * dt);
            g.values.insert(g.values.end(), u.begin(), u.end());
        }
    }
    for (double v : g.values) {
        if (!std::isfinite(v)) throw DataError("solve_adv_diff_cn: non-finite value");
    }
    return g;
}

double total_variation(const SolutionGrid& grid, std::size_t time_level)
{
    const std::size_t nx = grid.axes.back().size();
    const double* row = grid.values.data() + time_level * nx;
    double tv = 0.0;
    for (std::size_t j = 0; j < nx; ++j) tv += std::abs(row[(j + 1) % nx] - row[j]);
    return tv;
}

Dataset sample_grid(const SolutionGrid& grid, std::size_t n_points, std::mt19937_64& rng)
{
    const std::size_t total = grid.node_count();
    if (n_points > total) {
        throw std::invalid_argument("sample_grid: requested " + std::to_string(n_points) + " of "
                                    + std::to_string(total) + " nodes");
    }
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first n_points entries are a uniform sample.
    for (std::size_t i = 0; i < n_points; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, total - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    Dataset d;
    std::vector<Var> vars;
    for (Var v : {Var::X, Var::Y, Var::Z}) {
        if (std::find(grid.axis_vars.begin(), grid.axis_vars.end(), v) != grid.axis_vars.end()) vars.push_back(v);
    }
    vars.push_back(Var::T);
    d.variables = vars;
    for (std::size_t i = 0; i < n_points; ++i) {
        d.points.push_back(grid.node(idx[i]));
        d.values.push_back(grid.values[idx[i]]);
    }
    return d;
}

double field_rms(const Dataset& data)
{
    if (data.values.empty()) return 0.0;
    double s = 0.0;
    for (double v : data.values) s += v * v;
    return std::sqrt(s / static_cast<double>(data.values.size()));
}

Dataset add_noise(const Dataset& data, double sigma_frac, std::mt19937_64& rng)
{
    if (!(sigma_frac >= 0.0)) throw std::invalid_argument("add_noise: sigma_frac must be >= 0");
    Dataset out = data;
    out.noise_sigma_frac = sigma_frac;
    if (sigma_frac == 0.0) return out;
    std::normal_distribution<double> noise(0.0, sigma_frac * field_rms(data));
    for (double& v : out.values) v += noise(rng);
    return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path)
{
    std::string text;
    for (Var v : data.variables) {
        text += var_name(v);
        text += ',';
    }
    text += "u\n";
    char buf[40];
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Point p = data.points.at(i);
        for (Var v : data.variables) {
            std::snprintf(buf, sizeof(buf), "%.17g,", p[static_cast<std::size_t>(v)]);
            text += buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g\n", data.values[i]);
        text += buf;
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << text;
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("cannot rename " + tmp.string() + ": " + ec.message());
}

namespace {

    std::vector<std::string_view> split(std::string_view line)
    {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) return out;
            start = comma + 1;
        }
    }

} // namespace

Dataset load_dataset(const std::filesystem::path& path, const std::vector<Var>& expected)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ":1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Dataset d;
    const auto head = split(line);
    if (head.size() < 2 || head.back() != "u") throw DataError(path.string() + ":1: header must end with column u");
    for (std::size_t i = 0; i + 1 < head.size(); ++i) {
        auto v = var_from_name(head[i]);
        if (!v) throw DataError(path.string() + ":1: unknown column '" + std::string(head[i]) + "'");
        d.variables.push_back(*v);
    }
    if (!expected.empty() && d.variables != expected) {
        throw DataError(path.string() + ":1: header does not match the task's variables");
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != head.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(head.size())
                            + " fields, got " + std::to_string(cells.size()));
        }
        std::vector<double> nums(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto cell = cells[c];
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), nums[c]);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(nums[c])) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed number '"
                                + std::string(cell) + "'");
            }
        }
        Point p{};
        for (std::size_t i = 0; i < d.variables.size(); ++i) p[static_cast<std::size_t>(d.variables[i])] = nums[i];
        d.points.push_back(p);
        d.values.push_back(nums.back());
    }
    if (d.values.empty()) throw DataError(path.string() + ": no records");
    return d;
}

Dataset generate_dataset(const TaskSpec& task, std::size_t n_points, std::mt19937_64& rng)
{
    Dataset d;
    switch (task.family) {
    case Family::Burgers1D:
        d = sample_grid(solve_burgers_fdm(task), n_points, rng);
        d.provenance = Provenance::FDM;
        break;
    case Family::AdvDiff1D:
        d = sample_grid(solve_adv_diff_cn(task), n_points, rng);
        d.provenance = Provenance::CrankNicolson;
        break;
    default:
        d = gen_analytic(task, n_points, rng);
        break;
    }
    d.task_id = task.task_id;
    return d;
}

SolutionGrid heldout_grid(const TaskSpec& task, int per_axis, std::size_t max_nodes)
{
    if (per_axis < 2) throw std::invalid_argument("heldout_grid: per_axis must be >= 2");
    if (task.family == Family::Burgers1D) {
        BurgersOptions opt;
        opt.store_every = std::max(1, (opt.nt + per_axis - 2) / (per_axis - 1));
        return solve_burgers_fdm(task, opt);
    }
    if (task.family == Family::AdvDiff1D) {
        SolutionGrid full = solve_adv_diff_cn(task);
        const std::size_t levels = full.axes[0].size();
        const std::size_t stride = std::max<std::size_t>(1, (levels - 1 + static_cast<std::size_t>(per_axis) - 2)
                                                                / static_cast<std::size_t>(per_axis - 1));
        if (stride == 1) return full;
        SolutionGrid g = full;
        g.axes[0].clear();
        g.values.clear();
        const std::size_t nx = full.axes[1].size();
        for (std::size_t k = 0; k < levels; k += stride) {
            g.axes[0].push_back(full.axes[0][k]);
            g.values.insert(g.values.end(), full.values.begin() + static_cast<std::ptrdiff_t>(k * nx),
                            full.values.begin() + static_cast<std::ptrdiff_t>((k + 1) * nx));
        }
        return g;
    }
    const auto vars = task.variables();
    const auto dims = static_cast<double>(vars.size());
    int n = per_axis;
    while (n > 2 && std::pow(static_cast<double>(n), dims) > static_cast<double>(max_nodes)) --n;
    SolutionGrid g;
    g.axis_vars = vars;
    for (Var v : vars) g.axes.push_back(linspace(task.bounds(v).lo, task.bounds(v).hi, n));
    std::size_t total = 1;
    for (const auto& a : g.axes) total *= a.size();
    g.values.resize(total);
    for (std::size_t i = 0; i < total; ++i) g.values[i] = analytic_value(task, g.node(i));
    g.dx = g.axes[0].size() > 1 ? g.axes[0][1] - g.axes[0][0] : 0.0;
    g.dt = g.axes.back().size() > 1 ? g.axes.back()[1] - g.axes.back()[0] : 0.0;
    return g;
}

} // namespace nmips
