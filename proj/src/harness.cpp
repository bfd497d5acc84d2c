#include "nmips/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nmips {

using json = nlohmann::json;

namespace {

    constexpr std::uint64_t kIcTag = 11;
    constexpr std::uint64_t kDataTag = 12;
    constexpr std::uint64_t kCondTag = 13;
    constexpr std::uint64_t kNoiseTag = 14;

    std::string lower(std::string_view s)
    {
        std::string out(s);
        for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    }

    Family parse_family(const std::string& name)
    {
        for (Family f : kAllFamilies) {
            if (lower(family_name(f)) == lower(name)) return f;
        }
        throw ConfigError("unknown family '" + name + "'");
    }

    void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
    {
        if (!obj.is_object()) throw ConfigError(where + ": expected an object");
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!allowed.contains(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
        }
    }

    template <class T>
    void read(const json& obj, const char* key, T& out, const std::string& where)
    {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        const std::string name = where + "." + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(name + ": expected a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
            if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw ConfigError(name + ": must be >= 0");
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(name + ": expected a number");
            out = v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(name + ": expected a string");
            out = v.get<std::string>();
        } else {
            try {
                out = v.get<T>();
            } catch (const json::exception&) {
                throw ConfigError(name + ": wrong type");
            }
        }
    }

    // Shortest text that parses back to the same double.
    std::string format_double(double v)
    {
        char buf[40];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    }

    std::string join_params(const std::vector<double>& p)
    {
        std::string s;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i) s += ';';
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%g", p[i]);
            s += buf;
        }
        return s;
    }

    std::string csv_quote(const std::string& s)
    {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    }

    std::vector<std::string> csv_split(const std::string& line)
    {
        std::vector<std::string> out(1);
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    out.back() += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    out.back() += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                out.emplace_back();
            } else {
                out.back() += c;
            }
        }
        return out;
    }

    void write_text(const std::filesystem::path& path, const std::string& text)
    {
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

    void ensure_dir(const std::filesystem::path& dir)
    {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
    }

    std::string dataset_file(const ExperimentConfig& cfg, int task)
    {
        return lower(family_name(cfg.family)) + "_task" + std::to_string(task) + ".csv";
    }

    json ic_json(const ICSpec& ic)
    {
        json comps = json::array();
        for (const auto& c : ic.components) comps.push_back({c.amplitude, c.wavenumber, c.phase});
        const char* mode = ic.mode == IcMode::SineSum ? "sine_sum"
                           : ic.mode == IcMode::SineProduct ? "sine_product"
                                                            : "taylor_green";
        return {{"mode", mode}, {"components", comps}};
    }

} // namespace

std::vector<std::vector<double>> ExperimentConfig::task_params() const
{
    return params.empty() ? default_params(family) : params;
}

std::vector<std::uint64_t> ExperimentConfig::resolved_seeds() const
{
    if (!seeds.empty()) return seeds;
    if (const char* env = std::getenv("NMIPS_SEED"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0') throw ConfigError("NMIPS_SEED is not an unsigned integer");
        return {v};
    }
    return {1};
}

void ExperimentConfig::validate() const
{
    try {
        solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    if (data_points == 0) throw ConfigError("data_points must be positive");
    if (head_len < 1) throw ConfigError("head_len must be >= 1");
    if (num_adfs < 0 || num_adf_args < 0) throw ConfigError("num_adfs and num_adf_args must be >= 0");
    if (num_adfs > 0 && num_adf_args < 1) throw ConfigError("num_adf_args must be >= 1 when ADFs are used");
    if (heldout_per_axis < 2) throw ConfigError("heldout_per_axis must be >= 2");
    if (!(fitness.lambda_phys >= 0.0)) throw ConfigError("lambda_phys must be >= 0");
    if (fitness.opt.max_steps < 0) throw ConfigError("const_opt.max_steps must be >= 0");
    if (!(fitness.opt.learning_rate > 0.0)) throw ConfigError("const_opt.learning_rate must be positive");
    for (double s : noise_levels) {
        if (!(s >= 0.0)) throw ConfigError("noise levels must be >= 0");
    }
    const auto p = task_params();
    if (p.empty()) throw ConfigError("at least one task is required");
    for (const auto& v : p) {
        if (v.size() != family_param_count(family)) {
            throw ConfigError(std::string(family_name(family)) + " expects " + std::to_string(family_param_count(family))
                              + " parameters per task");
        }
        for (double x : v) {
            if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("task parameters must be strictly positive");
        }
    }
}

ExperimentConfig parse_config(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"family", "params", "data_points", "interior_points", "ic_points", "bc_points", "data_seed", "seeds",
                    "noise_levels", "head_len", "num_adfs", "num_adf_args", "heldout_per_axis", "output_dir", "solver",
                    "const_opt", "lambda_phys"},
                   "config");
    ExperimentConfig cfg;
    std::string family = std::string(family_name(cfg.family));
    read(j, "family", family, "config");
    cfg.family = parse_family(family);
    read(j, "params", cfg.params, "config");
    read(j, "data_points", cfg.data_points, "config");
    read(j, "interior_points", cfg.interior_points, "config");
    read(j, "ic_points", cfg.ic_points, "config");
    read(j, "bc_points", cfg.bc_points, "config");
    read(j, "data_seed", cfg.data_seed, "config");
    read(j, "seeds", cfg.seeds, "config");
    read(j, "noise_levels", cfg.noise_levels, "config");
    read(j, "head_len", cfg.head_len, "config");
    read(j, "num_adfs", cfg.num_adfs, "config");
    read(j, "num_adf_args", cfg.num_adf_args, "config");
    read(j, "heldout_per_axis", cfg.heldout_per_axis, "config");
    read(j, "output_dir", cfg.output_dir, "config");
    read(j, "lambda_phys", cfg.fitness.lambda_phys, "config");
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        reject_unknown(s,
                       {"pop_size", "rmp", "mutation_prob", "generations", "max_evals", "transfer_interval", "de_scale",
                        "de_crossover_rate", "transfer_enabled", "transfer_epochs", "transfer_learning_rate",
                        "workers"},
                       "solver");
        auto& sc = cfg.solver;
        read(s, "pop_size", sc.pop_size, "solver");
        read(s, "rmp", sc.rmp, "solver");
        read(s, "mutation_prob", sc.mutation_prob, "solver");
        read(s, "generations", sc.generations, "solver");
        read(s, "max_evals", sc.max_evals, "solver");
        read(s, "transfer_interval", sc.transfer_interval, "solver");
        read(s, "de_scale", sc.de_scale, "solver");
        read(s, "de_crossover_rate", sc.de_crossover_rate, "solver");
        read(s, "transfer_enabled", sc.transfer_enabled, "solver");
        read(s, "transfer_epochs", sc.transfer_epochs, "solver");
        read(s, "transfer_learning_rate", sc.transfer_learning_rate, "solver");
        read(s, "workers", sc.workers, "solver");
    }
    if (j.contains("const_opt")) {
        const json& c = j.at("const_opt");
        reject_unknown(c, {"max_steps", "learning_rate", "include_physics_terms"}, "const_opt");
        read(c, "max_steps", cfg.fitness.opt.max_steps, "const_opt");
        read(c, "learning_rate", cfg.fitness.opt.learning_rate, "const_opt");
        read(c, "include_physics_terms", cfg.fitness.opt.include_physics_terms, "const_opt");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg)
{
    const auto& s = cfg.solver;
    json j = {
        {"family", family_name(cfg.family)},
        {"params", cfg.task_params()},
        {"data_points", cfg.data_points},
        {"interior_points", cfg.interior_points},
        {"ic_points", cfg.ic_points},
        {"bc_points", cfg.bc_points},
        {"data_seed", cfg.data_seed},
        {"seeds", cfg.resolved_seeds()},
        {"noise_levels", cfg.noise_levels},
        {"head_len", cfg.head_len},
        {"num_adfs", cfg.num_adfs},
        {"num_adf_args", cfg.num_adf_args},
        {"heldout_per_axis", cfg.heldout_per_axis},
        {"output_dir", cfg.output_dir},
        {"lambda_phys", cfg.fitness.lambda_phys},
        {"solver",
         {{"pop_size", s.pop_size},
          {"rmp", s.rmp},
          {"mutation_prob", s.mutation_prob},
          {"generations", s.generations},
          {"max_evals", s.max_evals},
          {"transfer_interval", s.transfer_interval},
          {"de_scale", s.de_scale},
          {"de_crossover_rate", s.de_crossover_rate},
          {"transfer_enabled", s.transfer_enabled},
          {"transfer_epochs", s.transfer_epochs},
          {"transfer_learning_rate", s.transfer_learning_rate},
          {"workers", s.workers}}},
        {"const_opt",
         {{"max_steps", cfg.fitness.opt.max_steps},
          {"learning_rate", cfg.fitness.opt.learning_rate},
          {"include_physics_terms", cfg.fitness.opt.include_physics_terms}}},
    };
    return j.dump(2);
}

std::vector<TaskSpec> build_tasks(const ExperimentConfig& cfg)
{
    auto rng = derived_stream(cfg.data_seed, kIcTag, 0);
    return make_family_tasks(cfg.family, cfg.task_params(), rng);
}

std::vector<Dataset> build_datasets(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks)
{
    std::vector<Dataset> out;
    for (const auto& t : tasks) {
        auto rng = derived_stream(cfg.data_seed, kDataTag, static_cast<std::uint64_t>(t.task_id));
        out.push_back(generate_dataset(t, cfg.data_points, rng));
    }
    return out;
}

std::vector<ConditionSet> build_conditions(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks)
{
    std::vector<ConditionSet> out;
    for (const auto& t : tasks) {
        auto rng = derived_stream(cfg.data_seed, kCondTag, static_cast<std::uint64_t>(t.task_id));
        out.push_back(sample_conditions(t, cfg.interior_points, cfg.ic_points, cfg.bc_points, rng));
    }
    return out;
}

std::vector<SolutionGrid> build_grids(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks)
{
    std::vector<SolutionGrid> out;
    for (const auto& t : tasks) out.push_back(heldout_grid(t, cfg.heldout_per_axis));
    return out;
}

namespace {

    void key_of(const NodePtr& n, std::string& out)
    {
        char buf[48];
        switch (n->kind) {
        case NodeKind::Variable: out += var_name(n->var); return;
        case NodeKind::Constant: std::snprintf(buf, sizeof(buf), "c%d", n->index); out += buf; return;
        case NodeKind::Literal: std::snprintf(buf, sizeof(buf), "l%a", n->literal); out += buf; return;
        case NodeKind::AdfArg: std::snprintf(buf, sizeof(buf), "a%d", n->index); out += buf; return;
        case NodeKind::AdfCall: std::snprintf(buf, sizeof(buf), "F%d", n->index); out += buf; break;
        case NodeKind::Function: out += op_name(n->op); break;
        }
        out += '(';
        for (std::size_t i = 0; i < n->children.size(); ++i) {
            if (i) out += ',';
            key_of(n->children[i], out);
        }
        out += ')';
    }

} // namespace

std::string structure_key(const ExprTree& tree)
{
    std::string out;
    if (tree.empty()) return out;
    key_of(tree.root(), out);
    for (std::size_t i = 0; i < tree.adfs().size(); ++i) {
        out += "|F" + std::to_string(i) + "=";
        if (tree.adfs()[i]) key_of(tree.adfs()[i], out);
    }
    out += "|k";
    for (double c : tree.constants()) out += format_double(c) + ";";
    return out;
}

PdeProblem::PdeProblem(std::vector<TaskSpec> tasks, std::vector<Dataset> datasets,
                       std::vector<ConditionSet> conditions, FitnessConfig fitness, int head_len, int num_adfs,
                       int num_adf_args)
    : tasks_(std::move(tasks))
    , datasets_(std::move(datasets))
    , conditions_(std::move(conditions))
    , fitness_(fitness)
{
    if (tasks_.empty()) throw std::invalid_argument("PdeProblem: no tasks");
    if (datasets_.size() != tasks_.size() || conditions_.size() != tasks_.size()) {
        throw std::invalid_argument("PdeProblem: one dataset and condition set per task required");
    }
    for (std::size_t j = 0; j < tasks_.size(); ++j) {
        if (datasets_[j].size() == 0) throw DataError("PdeProblem: empty dataset for task " + std::to_string(j));
    }
    std::vector<SymbolLibrary> libs;
    for (const auto& t : tasks_) libs.push_back(t.library);
    spec_ = build_encoding_space(libs, head_len, num_adfs, num_adf_args);
}

Evaluation PdeProblem::evaluate(const Chromosome& chromosome, int task) const
{
    if (task < 0 || task >= task_count()) throw std::out_of_range("PdeProblem: task index");
    const auto t = static_cast<std::size_t>(task);
    ExprTree tree = decode(chromosome, spec_, tasks_[t].library);
    auto key = std::make_pair(task, structure_key(tree));
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) {
            ++hits_;
            return it->second;
        }
    }
    auto [loss, tuned] = factorial_cost(tree, tasks_[t], datasets_[t], conditions_[t], fitness_);
    Evaluation e{loss.total, std::move(tuned)};
    std::lock_guard lock(mutex_);
    if (cache_.size() >= 200'000) cache_.clear();
    cache_.emplace(std::move(key), e);
    return e;
}

std::size_t PdeProblem::cache_hits() const
{
    std::lock_guard lock(mutex_);
    return hits_;
}

std::string results_header() { return "family,task_id,params,seed,mse,best_cost,evals,generations,wall_s,transfer,expression"; }

std::string to_csv(const ResultRow& r)
{
    std::string s = r.family + "," + std::to_string(r.task_id) + "," + join_params(r.params) + ","
                    + std::to_string(r.seed) + "," + format_double(r.mse) + "," + format_double(r.best_cost) + ","
                    + std::to_string(r.evals) + "," + std::to_string(r.generations) + ",";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", r.wall_s);
    s += buf;
    s += r.transfer ? ",true," : ",false,";
    s += csv_quote(r.expression);
    return s;
}

void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path)
{
    std::string text = results_header() + "\n";
    for (const auto& r : rows) text += to_csv(r) + "\n";
    write_text(path, text);
}

std::vector<ResultRow> read_results(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != results_header()) throw DataError(path.string() + ": bad results header");
    std::vector<ResultRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = csv_split(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (f.size() != 11) throw DataError(where + ": expected 11 fields");
        try {
            ResultRow r;
            r.family = f[0];
            r.task_id = std::stoi(f[1]);
            std::stringstream ps(f[2]);
            for (std::string tok; std::getline(ps, tok, ';');) r.params.push_back(std::stod(tok));
            r.seed = std::stoull(f[3]);
            r.mse = std::stod(f[4]);
            r.best_cost = std::stod(f[5]);
            r.evals = std::stol(f[6]);
            r.generations = std::stoi(f[7]);
            r.wall_s = std::stod(f[8]);
            if (f[9] != "true" && f[9] != "false") throw std::invalid_argument("transfer flag");
            r.transfer = f[9] == "true";
            r.expression = f[10];
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw DataError(where + ": malformed field");
        }
    }
    return rows;
}

namespace {

    std::vector<ResultRow> run_seeds(const ExperimentConfig& cfg, const PdeProblem& problem,
                                     const std::vector<SolutionGrid>& grids, bool transfer, std::ostream* log)
    {
        std::vector<ResultRow> rows;
        const auto& tasks = problem.tasks();
        for (std::uint64_t seed : cfg.resolved_seeds()) {
            SolverConfig sc = cfg.solver;
            sc.master_seed = seed;
            sc.transfer_enabled = transfer;
            if (log) *log << "run\t" << family_name(cfg.family) << "\tseed=" << seed << "\ttransfer=" << transfer << '\n';
            const auto t0 = std::chrono::steady_clock::now();
            EvolveOptions opts;
            opts.log = log;
            const EvolveResult res = evolve(problem, sc, opts);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (std::size_t j = 0; j < tasks.size(); ++j) {
                const auto& best = res.archive.best[j];
                ResultRow r;
                r.family = std::string(family_name(cfg.family));
                r.task_id = tasks[j].task_id;
                r.params = tasks[j].params;
                r.seed = seed;
                r.best_cost = best.cost;
                r.evals = res.evaluations;
                r.generations = res.generations;
                r.wall_s = wall;
                r.transfer = transfer;
                const ExprTree tree = best.tree ? *best.tree : parse_expr("0");
                r.expression = to_infix(tree);
                r.mse = test_mse(tree, grids[j]);
                rows.push_back(std::move(r));
            }
        }
        return rows;
    }

    PdeProblem make_problem(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks,
                            const std::vector<Dataset>& datasets)
    {
        return PdeProblem(tasks, datasets, build_conditions(cfg, tasks), cfg.fitness, cfg.head_len, cfg.num_adfs,
                          cfg.num_adf_args);
    }

} // namespace

std::vector<ResultRow> solve_runs(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks,
                                  const std::vector<Dataset>& datasets, const std::vector<SolutionGrid>& grids,
                                  bool transfer, std::ostream* log)
{
    cfg.validate();
    const PdeProblem problem = make_problem(cfg, tasks, datasets);
    return run_seeds(cfg, problem, grids, transfer, log);
}

std::vector<std::filesystem::path> cmd_generate(const ExperimentConfig& cfg)
{
    cfg.validate();
    const std::filesystem::path dir = cfg.output_dir;
    ensure_dir(dir);
    const auto tasks = build_tasks(cfg);
    const auto data = build_datasets(cfg, tasks);
    std::vector<std::filesystem::path> files;
    json manifest = {{"family", family_name(cfg.family)},
                     {"data_seed", cfg.data_seed},
                     {"data_points", cfg.data_points},
                     {"tasks", json::array()}};
    for (std::size_t j = 0; j < tasks.size(); ++j) {
        const auto path = dir / dataset_file(cfg, tasks[j].task_id);
        save_dataset(data[j], path);
        files.push_back(path);
        manifest["tasks"].push_back({{"task_id", tasks[j].task_id},
                                     {"params", tasks[j].params},
                                     {"ic", ic_json(tasks[j].ic)},
                                     {"file", path.filename().string()},
                                     {"provenance", provenance_name(data[j].provenance)},
                                     {"rows", data[j].size()}});
    }
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return files;
}

namespace {

    std::vector<Dataset> load_generated(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks)
    {
        const std::filesystem::path dir = cfg.output_dir;
        const auto mpath = dir / "manifest.json";
        std::ifstream in(mpath);
        if (!in) throw DataError("missing dataset manifest " + mpath.string() + " (run generate first)");
        json m;
        try {
            m = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError("unreadable manifest " + mpath.string() + ": " + e.what());
        }
        auto mismatch = [&](const std::string& what) {
            throw ConfigError("config mismatch with dataset manifest: " + what);
        };
        try {
            if (m.at("family").get<std::string>() != family_name(cfg.family)) mismatch("family");
            if (m.at("data_seed").get<std::uint64_t>() != cfg.data_seed) mismatch("data_seed");
            if (m.at("data_points").get<std::size_t>() != cfg.data_points) mismatch("data_points");
            const auto& mt = m.at("tasks");
            if (mt.size() != tasks.size()) mismatch("task count");
            std::vector<Dataset> out;
            for (std::size_t j = 0; j < tasks.size(); ++j) {
                if (mt[j].at("params").get<std::vector<double>>() != tasks[j].params) {
                    mismatch("parameters of task " + std::to_string(j));
                }
                if (mt[j].at("ic") != ic_json(tasks[j].ic)) mismatch("initial condition of task " + std::to_string(j));
                Dataset d = load_dataset(dir / mt[j].at("file").get<std::string>(), tasks[j].variables());
                d.task_id = tasks[j].task_id;
                out.push_back(std::move(d));
            }
            return out;
        } catch (const json::exception& e) {
            throw DataError("malformed manifest " + mpath.string() + ": " + e.what());
        }
    }

    std::string expression_file(std::uint64_t seed, int task)
    {
        return "seed" + std::to_string(seed) + "_task" + std::to_string(task) + ".txt";
    }

} // namespace

std::vector<ResultRow> cmd_solve(const ExperimentConfig& cfg, std::ostream* log)
{
    cfg.validate();
    const auto tasks = build_tasks(cfg);
    const auto data = load_generated(cfg, tasks);
    const auto grids = build_grids(cfg, tasks);
    auto rows = solve_runs(cfg, tasks, data, grids, cfg.solver.transfer_enabled, log);
    const std::filesystem::path dir = cfg.output_dir;
    write_results(rows, dir / "results.csv");
    for (const auto& r : rows) write_text(dir / expression_file(r.seed, r.task_id), r.expression + "\n");
    json run = {{"command", "solve"}, {"config", json::parse(config_to_json(cfg))}, {"results", "results.csv"}};
    write_text(dir / "run_manifest.json", run.dump(2) + "\n");
    return rows;
}

std::vector<ResultRow> cmd_eval(const ExperimentConfig& cfg, const std::string& expression, int task)
{
    cfg.validate();
    const ExprTree tree = parse_expr(expression);
    const auto tasks = build_tasks(cfg);
    if (task >= static_cast<int>(tasks.size()) || task < -1) {
        throw ConfigError("unknown task " + std::to_string(task) + " (family has " + std::to_string(tasks.size())
                          + " tasks)");
    }
    std::vector<ResultRow> rows;
    for (std::size_t j = 0; j < tasks.size(); ++j) {
        if (task >= 0 && static_cast<int>(j) != task) continue;
        ResultRow r;
        r.family = std::string(family_name(cfg.family));
        r.task_id = tasks[j].task_id;
        r.params = tasks[j].params;
        r.mse = test_mse(tree, heldout_grid(tasks[j], cfg.heldout_per_axis));
        r.best_cost = r.mse;
        r.expression = to_infix(tree);
        rows.push_back(std::move(r));
    }
    return rows;
}

AblationSummary cmd_ablate(const ExperimentConfig& cfg, std::ostream* log)
{
    cfg.validate();
    const auto tasks = build_tasks(cfg);
    const auto data = build_datasets(cfg, tasks);
    const auto grids = build_grids(cfg, tasks);
    const PdeProblem problem = make_problem(cfg, tasks, data);
    const auto with = run_seeds(cfg, problem, grids, true, log);
    const auto without = run_seeds(cfg, problem, grids, false, log);

    AblationSummary s;
    const std::size_t k = tasks.size();
    s.mean_with.assign(k, 0.0);
    s.mean_without.assign(k, 0.0);
    for (std::size_t i = 0; i < with.size(); ++i) {
        AblationRow r{with[i].task_id, with[i].seed, with[i].mse, without[i].mse};
        s.rows.push_back(r);
        s.mean_with[static_cast<std::size_t>(r.task_id)] += r.mse_with;
        s.mean_without[static_cast<std::size_t>(r.task_id)] += r.mse_without;
    }
    const auto runs = static_cast<double>(cfg.resolved_seeds().size());
    for (std::size_t j = 0; j < k; ++j) {
        s.mean_with[j] /= runs;
        s.mean_without[j] /= runs;
        s.avg_with += s.mean_with[j] / static_cast<double>(k);
        s.avg_without += s.mean_without[j] / static_cast<double>(k);
    }

    const std::filesystem::path dir = cfg.output_dir;
    ensure_dir(dir);
    const std::string fam(family_name(cfg.family));
    std::string text = "family,task_id,seed,mse_with_transfer,mse_without_transfer,delta\n";
    for (const auto& r : s.rows) {
        text += fam + "," + std::to_string(r.task_id) + "," + std::to_string(r.seed) + "," + format_double(r.mse_with)
                + "," + format_double(r.mse_without) + "," + format_double(r.delta()) + "\n";
    }
    write_text(dir / "ablation.csv", text);
    std::string summary = "family,task_id,mean_mse_with_transfer,mean_mse_without_transfer,mean_delta\n";
    for (std::size_t j = 0; j < k; ++j) {
        summary += fam + "," + std::to_string(j) + "," + format_double(s.mean_with[j]) + ","
                   + format_double(s.mean_without[j]) + "," + format_double(s.mean_without[j] - s.mean_with[j]) + "\n";
    }
    summary += fam + ",avg," + format_double(s.avg_with) + "," + format_double(s.avg_without) + ","
               + format_double(s.avg_without - s.avg_with) + "\n";
    write_text(dir / "ablation_summary.csv", summary);
    write_results(with, dir / "results_transfer.csv");
    write_results(without, dir / "results_no_transfer.csv");
    return s;
}

std::vector<NoiseRow> cmd_noise_sweep(const ExperimentConfig& cfg, std::ostream* log)
{
    cfg.validate();
    const auto tasks = build_tasks(cfg);
    const auto clean = build_datasets(cfg, tasks);
    const auto grids = build_grids(cfg, tasks);
    const std::filesystem::path dir = cfg.output_dir;
    ensure_dir(dir);
    std::vector<NoiseRow> out;
    std::string text = "noise_level,sigma," + results_header() + "\n";
    for (std::size_t li = 0; li < cfg.noise_levels.size(); ++li) {
        const double level = cfg.noise_levels[li];
        std::vector<Dataset> noisy;
        std::vector<double> sigma;
        const auto level_dir = dir / ("noise_" + format_double(level));
        ensure_dir(level_dir);
        for (std::size_t j = 0; j < tasks.size(); ++j) {
            auto rng = derived_stream(cfg.data_seed, kNoiseTag + li * 1000, j);
            noisy.push_back(add_noise(clean[j], level, rng));
            sigma.push_back(level * field_rms(clean[j]));
            save_dataset(noisy.back(), level_dir / dataset_file(cfg, tasks[j].task_id));
        }
        const auto rows = solve_runs(cfg, tasks, noisy, grids, cfg.solver.transfer_enabled, log);
        for (const auto& r : rows) {
            NoiseRow nr{level, sigma[static_cast<std::size_t>(r.task_id)], r};
            text += format_double(level) + "," + format_double(nr.sigma) + "," + to_csv(r) + "\n";
            out.push_back(std::move(nr));
        }
    }
    write_text(dir / "noise_sweep.csv", text);
    return out;
}

} // namespace nmips
