// Command-line front end: training, population runs, stability analysis,
// horizon sweeps, reporting, and the scan/gradient verifiers.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "thg/checkpoint.hpp"
#include "thg/config.hpp"
#include "thg/dynamics.hpp"
#include "thg/envs.hpp"
#include "thg/gradcheck.hpp"
#include "thg/horizon.hpp"
#include "thg/io.hpp"
#include "thg/network.hpp"
#include "thg/ppo.hpp"

namespace fs = std::filesystem;
using thg::Config;

namespace {

const std::set<std::string> kTrainKeys = {
    "env", "cell", "arch", "seed", "run_id", "checkpoint_every",
    "pi_epochs", "vf_epochs", "pi_lr", "vf_lr", "lr_tmax", "grad_clip_norm", "clip_eps",
    "vf_coeff", "entropy_coeff", "gae_lambda", "gamma", "minibatch_count", "minibatch_size",
    "kl_max", "sample_steps", "total_iterations",
    "tmaze_len_low", "tmaze_len_high", "n_low", "n_high", "l_low", "l_high", "tau"};

std::vector<long long> parse_ll_list(const std::string& s) {
    std::vector<long long> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = thg::trim(tok);
        if (!tok.empty()) out.push_back(std::stoll(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty list: " + s);
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

/// Fill in Table 1 defaults for whatever the config leaves unset.
void apply_train_defaults(Config& cfg) {
    auto def = [&](const std::string& k, const std::string& v) {
        if (!cfg.has(k)) cfg.set(k, v);
    };
    def("env", "tmaze");
    const bool lookup = cfg.get("env") == "lookup";
    def("cell", "gru");
    def("arch", lookup ? (cfg.get("cell") == "hybrid" ? "lookup-hybrid" : "lookup-standard")
                       : "tmaze-small");
    def("pi_epochs", lookup ? "10" : "20");
    def("vf_epochs", "10");
    def("pi_lr", "0.005");
    def("vf_lr", "0.001");
    def("lr_tmax", "250");
    def("grad_clip_norm", "1");
    def("clip_eps", "0.2");
    def("vf_coeff", "1");
    def("entropy_coeff", "0.01");
    def("gae_lambda", "0.98");
    def("gamma", "0.998");
    def("minibatch_count", lookup ? "8" : "2");
    def("minibatch_size", lookup ? "256" : "25");
    def("kl_max", "0.2");
    def("sample_steps", lookup ? "250" : "1400");
    def("total_iterations", "250");
    def("checkpoint_every", "0");
    def("tmaze_len_low", "1");
    def("tmaze_len_high", "3");
    def("n_low", "1");
    def("n_high", "20");
    def("l_low", "1");
    def("l_high", "3");
    def("tau", "4");
}

thg::PpoConfig ppo_from_config(const Config& cfg) {
    thg::PpoConfig p;
    p.pi_epochs = cfg.get_int("pi_epochs");
    p.vf_epochs = cfg.get_int("vf_epochs");
    p.pi_lr = cfg.get_double("pi_lr");
    p.vf_lr = cfg.get_double("vf_lr");
    p.lr_tmax = cfg.get_int("lr_tmax");
    p.grad_clip_norm = cfg.get_double("grad_clip_norm");
    p.clip_eps = cfg.get_double("clip_eps");
    p.vf_coeff = cfg.get_double("vf_coeff");
    p.entropy_coeff = cfg.get_double("entropy_coeff");
    p.gae_lambda = cfg.get_double("gae_lambda");
    p.gamma = cfg.get_double("gamma");
    p.minibatch_count = cfg.get_int("minibatch_count");
    p.minibatch_size = cfg.get_int("minibatch_size");
    p.kl_max = cfg.get_double("kl_max");
    p.sample_steps = cfg.get_int("sample_steps");
    p.total_iterations = cfg.get_int("total_iterations");
    p.validate();
    return p;
}

struct ResolvedTrain {
    thg::TrainSetup setup;
    std::string env_kind, cell_token, arch_tag, run_id;
    int checkpoint_every = 0;
    int tau = 4;
};

ResolvedTrain resolve_train(const Config& cfg) {
    cfg.require_known(kTrainKeys);
    if (!cfg.has("seed")) throw std::invalid_argument("config: seed is required (no wall-clock default)");
    ResolvedTrain r;
    r.env_kind = cfg.get("env");
    if (r.env_kind != "tmaze" && r.env_kind != "lookup")
        throw std::invalid_argument("config: env must be tmaze or lookup");
    r.cell_token = cfg.get("cell");
    r.arch_tag = cfg.get("arch");
    r.tau = cfg.get_int("tau");
    r.checkpoint_every = cfg.get_int("checkpoint_every");
    thg::TrainSetup& s = r.setup;
    s.arch = thg::parse_arch(r.arch_tag);
    s.family = r.cell_token == "hybrid" ? thg::CellFamily::BMRU : thg::parse_family(r.cell_token);
    if ((s.arch == thg::ArchKind::LookupHybrid) != (r.cell_token == "hybrid"))
        throw std::invalid_argument("config: cell=hybrid requires arch=lookup-hybrid and vice versa");
    s.seed = static_cast<uint64_t>(cfg.get_ll("seed"));
    s.ppo = ppo_from_config(cfg);
    s.dropout = (s.arch == thg::ArchKind::LookupStandard || s.arch == thg::ArchKind::LookupHybrid);
    if (r.env_kind == "tmaze") {
        int lo = cfg.get_int("tmaze_len_low"), hi = cfg.get_int("tmaze_len_high");
        s.obs_width = thg::TMaze::kObsWidth;
        s.make_env = [lo, hi](uint64_t seed) -> std::unique_ptr<thg::Env> {
            return std::make_unique<thg::TMazeRangeEnv>(lo, hi, seed);
        };
    } else {
        int nl = cfg.get_int("n_low"), nh = cfg.get_int("n_high");
        int ll = cfg.get_int("l_low"), lh = cfg.get_int("l_high");
        int tau = r.tau;
        s.obs_width = thg::LookupTreeMaze::obs_width_for(tau);
        s.make_env = [nl, nh, ll, lh, tau](uint64_t seed) -> std::unique_ptr<thg::Env> {
            return std::make_unique<thg::LookupTreeMaze>(nl, nh, ll, lh, tau, seed);
        };
    }
    r.run_id = cfg.get_or("run_id", r.env_kind + "-" + r.cell_token + "-s" + cfg.get("seed"));
    return r;
}

thg::Checkpoint make_checkpoint(const ResolvedTrain& r, const thg::TrainResult& tr) {
    thg::Checkpoint ck;
    ck.actor_arch = ck.critic_arch = r.arch_tag;
    ck.actor_family = ck.critic_family = thg::family_name(r.setup.family);
    ck.actor_in = ck.critic_in = r.setup.obs_width;
    ck.actor_out = 4;
    ck.critic_out = 1;
    ck.actor = tr.policy;
    ck.critic = tr.critic;
    ck.actor_opt = tr.policy_opt;
    ck.critic_opt = tr.critic_opt;
    return ck;
}

void write_metrics_csv(const fs::path& path, const std::vector<thg::MetricsRow>& rows) {
    thg::CsvWriter csv(path, {"iteration", "mean_reward", "pi_loss", "vf_loss", "entropy", "approx_kl",
                              "lr_pi", "lr_vf"});
    for (const auto& m : rows)
        csv.write_row({std::to_string(m.iteration), thg::fmt_double(m.mean_reward),
                       thg::fmt_double(m.pi_loss), thg::fmt_double(m.vf_loss), thg::fmt_double(m.entropy),
                       thg::fmt_double(m.approx_kl), thg::fmt_double(m.lr_pi), thg::fmt_double(m.lr_vf)});
}

int run_train(Config cfg, bool quiet = false) {
    apply_train_defaults(cfg);
    ResolvedTrain r = resolve_train(cfg);
    fs::path run_dir = thg::out_root() / r.run_id;
    fs::create_directories(run_dir);
    thg::RunManifest man;
    man.run_id = r.run_id;
    man.seed = r.setup.seed;
    man.config = cfg.entries();
    man.metrics_path = (run_dir / "metrics.csv").string();
    man.write(run_dir / "manifest.txt");
    try {
        auto callback = [&](int it, const thg::TrainResult& tr) {
            if (!quiet) {
                const thg::MetricsRow& m = tr.history.back();
                std::printf("[%s] iter %d mean_reward %.4f pi_loss %.4f kl %.4f\n", r.run_id.c_str(), it,
                            m.mean_reward, m.pi_loss, m.approx_kl);
                std::fflush(stdout);
            }
            if (r.checkpoint_every > 0 && (it + 1) % r.checkpoint_every == 0)
                thg::save_checkpoint(run_dir / ("checkpoint-" + std::to_string(it) + ".bin"),
                                     make_checkpoint(r, tr));
        };
        thg::TrainResult tr = thg::train(r.setup, callback);
        thg::save_checkpoint(run_dir / "checkpoint.bin", make_checkpoint(r, tr));
        write_metrics_csv(run_dir / "metrics.csv", tr.history);
        man.checkpoint_hash = std::to_string(thg::fnv1a(thg::read_file_bytes(run_dir / "checkpoint.bin")));
        man.status = "done";
        man.write(run_dir / "manifest.txt");
    } catch (const std::exception& e) {
        man.status = "failed";
        man.error = e.what();
        man.write(run_dir / "manifest.txt");
        std::cerr << "train failed: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int run_population(Config base, const std::vector<long long>& seeds) {
    std::set<long long> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) {
        std::cerr << "population: duplicate seeds\n";
        return 1;
    }
    fs::create_directories(thg::out_root());
    thg::CsvWriter index(thg::out_root() / "population-index.csv", {"seed", "run_id", "status"});
    int failures = 0;
    for (long long seed : seeds) {
        Config cfg = base;
        cfg.set("seed", std::to_string(seed));
        Config resolved = cfg;
        apply_train_defaults(resolved);
        std::string run_id = resolved.get_or(
            "run_id", resolved.get("env") + "-" + resolved.get("cell") + "-s" + std::to_string(seed));
        if (resolved.has("run_id")) {
            run_id = resolved.get("run_id") + "-s" + std::to_string(seed);
            cfg.set("run_id", run_id);
        }
        int rc = run_train(cfg);
        failures += rc != 0;
        index.write_row({std::to_string(seed), run_id, rc == 0 ? "done" : "failed"});
    }
    return failures == 0 ? 0 : 1;
}

int run_vaa(const std::string& ckpt_path, const std::string& env_kind, int M, double eps, int tau,
            std::string model_id, const std::string& out_path) {
    thg::Checkpoint ck = thg::load_checkpoint(ckpt_path);
    if (model_id.empty()) model_id = fs::path(ckpt_path).parent_path().filename().string();
    thg::TaskStates ts = thg::task_initial_states(ck.actor, env_kind, tau);
    thg::IdleMap map(ck.actor, ts.idle_obs);
    thg::StabilityReport rep = thg::vaa(map, ts.initial_states, M, eps);
    std::vector<std::string> row = {model_id,
                                    ck.actor_family,
                                    std::to_string(rep.initial_set_size),
                                    std::to_string(rep.iterations),
                                    thg::fmt_double(rep.eps),
                                    thg::fmt_double(rep.vaa),
                                    std::to_string(rep.cluster_count),
                                    rep.multistable ? "multistable" : "monostable"};
    const std::vector<std::string> header = {"model", "family", "H", "M", "eps", "vaa", "clusters",
                                             "classification"};
    if (!out_path.empty()) {
        thg::CsvWriter csv(out_path, header);
        csv.write_row(row);
    }
    for (size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << header[i] << '=' << row[i];
    std::cout << '\n';
    return 0;
}

thg::GreedyEpisode run_oracle_episode(const std::string& env_kind, long long T, int tau, thg::Rng& rng) {
    thg::GreedyEpisode g;
    if (env_kind == "tmaze") {
        thg::TMaze env(static_cast<int>(T), rng.next_u64());
        thg::Tensor2 obs = env.reset();
        thg::TMazeOracle oracle;
        oracle.observe_reset(obs);
        while (!env.done()) {
            thg::StepResult sr = env.step(oracle.act(obs));
            g.reward += sr.reward;
            ++g.steps;
            g.timeout = sr.truncated;
            obs = std::move(sr.obs);
        }
        g.reached = env.reached_junction();
        g.reach_frac = g.reached ? 1.0 : 0.0;
    } else {
        thg::LookupTreeMaze env(static_cast<int>(T), static_cast<int>(T), 3, 3, tau, rng.next_u64());
        thg::Tensor2 obs = env.reset();
        thg::LookupOracle oracle;
        oracle.observe_reset(obs, tau);
        while (!env.done()) {
            thg::StepResult sr = env.step(oracle.act(obs));
            g.reward += sr.reward;
            ++g.steps;
            g.timeout = sr.truncated;
            obs = std::move(sr.obs);
        }
        g.reach_frac = static_cast<double>(env.junctions_reached()) / env.maze_count();
        g.reached = env.junctions_reached() > 0;
    }
    return g;
}

int run_sweep(const std::string& ckpt_path, bool oracle, const std::string& env_kind,
              const std::string& horizons_str, int episodes, uint64_t seed, int tau, std::string model_id,
              const std::string& out_path) {
    std::vector<long long> horizons = parse_ll_list(horizons_str);
    thg::Rng rng = thg::Rng::substream(seed, "sweep");
    thg::SweepResult res;
    if (oracle) {
        if (model_id.empty()) model_id = "oracle";
        res.model_id = model_id;
        res.env_kind = env_kind;
        for (long long T : horizons) {
            thg::SweepEntry e;
            e.horizon = T;
            e.episodes = episodes;
            double rs = 0, reach = 0;
            int succ = 0;
            for (int ep = 0; ep < episodes; ++ep) {
                thg::GreedyEpisode g = run_oracle_episode(env_kind, T, tau, rng);
                rs += g.reward;
                reach += g.reach_frac;
                succ += g.reward >= thg::kSolvedMeanReward;
            }
            e.mean_reward = rs / episodes;
            e.reach_frac = reach / episodes;
            e.success_frac = static_cast<double>(succ) / episodes;
            e.behavior = episodes >= 100 ? thg::classify_behavior(e) : "unclassified";
            res.entries.push_back(e);
        }
    } else {
        thg::Checkpoint ck = thg::load_checkpoint(ckpt_path);
        if (model_id.empty()) model_id = fs::path(ckpt_path).parent_path().filename().string();
        res = thg::horizon_sweep(ck.actor, env_kind, horizons, episodes, rng, tau, model_id);
    }
    const std::vector<std::string> header = {"model",       "env",          "horizon",    "episodes",
                                             "mean_reward", "success_frac", "reach_frac", "class"};
    std::unique_ptr<thg::CsvWriter> csv;
    if (!out_path.empty()) csv = std::make_unique<thg::CsvWriter>(out_path, header);
    for (const thg::SweepEntry& e : res.entries) {
        std::vector<std::string> row = {res.model_id,
                                        env_kind,
                                        std::to_string(e.horizon),
                                        std::to_string(e.episodes),
                                        thg::fmt_double(e.mean_reward),
                                        thg::fmt_double(e.success_frac),
                                        thg::fmt_double(e.reach_frac),
                                        e.behavior};
        if (csv) csv->write_row(row);
        for (size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << row[i];
        std::cout << '\n';
    }
    return 0;
}

int run_report(const std::string& dir) {
    std::vector<thg::PopulationEntry> models;
    int skipped = 0;
    if (!fs::is_directory(dir)) {
        std::cerr << "report: not a directory: " << dir << '\n';
        return 1;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        fs::path sweep_csv = entry.path() / "sweep.csv";
        fs::path vaa_csv = entry.path() / "vaa.csv";
        if (!fs::exists(sweep_csv) || !fs::exists(vaa_csv)) {
            ++skipped;
            continue;
        }
        thg::PopulationEntry m;
        m.model_id = entry.path().filename().string();
        m.regime = "default";
        {
            std::ifstream in(vaa_csv);
            std::string line;
            std::getline(in, line);  // header
            if (std::getline(in, line)) {
                auto cells = split_csv_line(line);
                if (cells.size() >= 8) {
                    m.family = cells[1];
                    m.vaa = std::stod(cells[5]);
                    m.clusters = std::stoi(cells[6]);
                }
            }
        }
        {
            std::ifstream in(sweep_csv);
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                auto cells = split_csv_line(line);
                if (cells.size() < 8) continue;
                thg::SweepEntry e;
                e.horizon = std::stoll(cells[2]);
                e.episodes = std::stoi(cells[3]);
                e.mean_reward = std::stod(cells[4]);
                e.success_frac = std::stod(cells[5]);
                e.reach_frac = std::stod(cells[6]);
                e.behavior = cells[7];
                m.sweep.entries.push_back(e);
            }
        }
        models.push_back(std::move(m));
    }
    if (models.size() < 2) {
        std::cerr << "report: need at least 2 completed runs with sweep.csv and vaa.csv (skipped "
                  << skipped << ")\n";
        return 1;
    }
    thg::PopulationReport rep = thg::population_report(models);
    {
        thg::CsvWriter csv(fs::path(dir) / "crosstab.csv", {"behavior", "stability", "regime", "count"});
        for (const auto& [key, count] : rep.crosstab) csv.write_row({key + "," + std::to_string(count)});
    }
    {
        thg::CsvWriter csv(fs::path(dir) / "scatter.csv", {"model", "vaa", "horizon", "mean_reward"});
        for (const auto& [id, v, T, r] : rep.scatter)
            csv.write_row({id, thg::fmt_double(v), std::to_string(T), thg::fmt_double(r)});
    }
    std::cout << "report: " << models.size() << " models aggregated, " << skipped << " skipped\n";
    return 0;
}

int run_scan_check(int cases, int max_len, uint64_t seed) {
    thg::Rng rng = thg::Rng::substream(seed, "scan-check");
    double worst_mingru = 0.0, worst_bmru = 0.0;
    for (int c = 0; c < cases; ++c) {
        thg::CellFamily f = c % 2 == 0 ? thg::CellFamily::MinGRU : thg::CellFamily::BMRU;
        int in_w = 1 + rng.uniform_int(6);
        int hid = 1 + rng.uniform_int(8);
        // Log-uniform lengths up to max_len so the long regime is exercised.
        int len = 1 + static_cast<int>(std::exp(rng.uniform() * std::log(static_cast<double>(max_len))));
        if (len > max_len) len = max_len;
        thg::ParamSet ps;
        thg::add_cell_params(ps, "c.", f, in_w, hid, rng);
        thg::Tensor2 h0(hid, 1);
        for (double& v : h0.data) v = rng.uniform(-1, 1);
        std::vector<thg::Tensor2> xs;
        for (int t = 0; t < len; ++t) {
            thg::Tensor2 x(in_w, 1);
            for (double& v : x.data) v = rng.uniform(-1, 1);
            xs.push_back(std::move(x));
        }
        auto scanned = thg::scan_forward(ps, f, "c.", h0, xs);
        auto sequential = thg::sequential_forward(ps, f, "c.", h0, xs);
        double d = 0.0;
        for (size_t t = 0; t < xs.size(); ++t) d = std::max(d, thg::max_dist(scanned[t], sequential[t]));
        (f == thg::CellFamily::MinGRU ? worst_mingru : worst_bmru) =
            std::max(f == thg::CellFamily::MinGRU ? worst_mingru : worst_bmru, d);
    }
    bool ok = worst_mingru < 1e-10 && worst_bmru == 0.0;
    std::printf("scan-check: cases=%d max_len=%d mingru_max_err=%.3g bmru_max_err=%.3g %s\n", cases,
                max_len, worst_mingru, worst_bmru, ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int run_gradcheck(const std::string& family, int input_w, int hidden, int len, uint64_t seed, double tol) {
    std::vector<thg::CellFamily> fams;
    if (family == "all")
        fams = {thg::CellFamily::GRU, thg::CellFamily::BRC, thg::CellFamily::nBRC, thg::CellFamily::MinGRU,
                thg::CellFamily::BMRU};
    else
        fams = {thg::parse_family(family)};
    bool all_pass = true;
    for (thg::CellFamily f : fams) {
        thg::GradCheckReport rep = thg::gradcheck_cell(f, input_w, hidden, len, seed, 1e-5, tol);
        all_pass = all_pass && rep.pass;
        std::printf("gradcheck %-6s entries=%zu max_rel_err=%.3g worst=%s[%zu] %s\n", thg::family_name(f),
                    rep.entries_checked, rep.max_rel_err, rep.worst_param.c_str(), rep.worst_index,
                    rep.pass ? "PASS" : "FAIL");
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recurrent-dynamics and horizon-generalization laboratory"};
    app.require_subcommand(1);

    // --- train ---
    std::string config_path, run_id_flag;
    std::vector<std::string> overrides;
    long long seed_flag = -1;
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--set", overrides, "override key=value (repeatable)");
        cmd->add_option("--seed", seed_flag, "root seed (required unless set in config)");
        cmd->add_option("--run-id", run_id_flag, "run directory name under THG_OUT_DIR");
    };
    CLI::App* train_cmd = app.add_subcommand("train", "train one policy/critic pair");
    add_train_flags(train_cmd);
    std::string env_flag, cell_flag, arch_flag;
    long long iters_flag = -1;
    train_cmd->add_option("--env", env_flag, "tmaze | lookup");
    train_cmd->add_option("--cell", cell_flag, "gru|brc|nbrc|mingru|bmru|hybrid");
    train_cmd->add_option("--arch", arch_flag, "architecture tag");
    train_cmd->add_option("--iters", iters_flag, "total training iterations");

    CLI::App* pop_cmd = app.add_subcommand("population", "independent runs over a seed list");
    std::string seeds_str;
    add_train_flags(pop_cmd);
    pop_cmd->add_option("--seeds", seeds_str, "comma-separated distinct seeds")->required();
    pop_cmd->add_option("--env", env_flag, "tmaze | lookup");
    pop_cmd->add_option("--cell", cell_flag, "cell family");
    pop_cmd->add_option("--arch", arch_flag, "architecture tag");
    pop_cmd->add_option("--iters", iters_flag, "total training iterations");

    CLI::App* vaa_cmd = app.add_subcommand("vaa", "stability report for a checkpoint");
    std::string ckpt_path, env_kind = "tmaze", out_path, model_id;
    int M = 1000, tau = 4;
    double eps = 1e-3;
    vaa_cmd->add_option("--checkpoint", ckpt_path)->required();
    vaa_cmd->add_option("--env", env_kind, "tmaze | lookup");
    vaa_cmd->add_option("--M", M, "iteration count");
    vaa_cmd->add_option("--eps", eps, "tolerance");
    vaa_cmd->add_option("--tau", tau, "lookup table length");
    vaa_cmd->add_option("--model-id", model_id);
    vaa_cmd->add_option("--out", out_path, "CSV output path");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "greedy horizon sweep");
    std::string horizons_str = "2,5,10,100,1000,10000";
    int episodes = 100;
    bool oracle = false;
    sweep_cmd->add_option("--checkpoint", ckpt_path);
    sweep_cmd->add_flag("--oracle", oracle, "use the scripted optimal agent");
    sweep_cmd->add_option("--env", env_kind, "tmaze | lookup");
    sweep_cmd->add_option("--horizons", horizons_str);
    sweep_cmd->add_option("--episodes", episodes);
    sweep_cmd->add_option("--seed", seed_flag)->required();
    sweep_cmd->add_option("--tau", tau);
    sweep_cmd->add_option("--model-id", model_id);
    sweep_cmd->add_option("--out", out_path, "CSV output path");

    CLI::App* report_cmd = app.add_subcommand("report", "aggregate a run directory");
    std::string report_dir;
    report_cmd->add_option("--dir", report_dir, "directory of run subdirectories");

    CLI::App* scan_cmd = app.add_subcommand("scan-check", "scan vs sequential verifier");
    int cases = 200, max_len = 4096;
    scan_cmd->add_option("--cases", cases);
    scan_cmd->add_option("--max-len", max_len);
    scan_cmd->add_option("--seed", seed_flag)->required();

    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "BPTT vs finite differences");
    std::string gc_family = "all";
    int gc_input = 3, gc_hidden = 6, gc_len = 12;
    double gc_tol = 1e-4;
    grad_cmd->add_option("--family", gc_family, "cell family or 'all'");
    grad_cmd->add_option("--input", gc_input);
    grad_cmd->add_option("--hidden", gc_hidden);
    grad_cmd->add_option("--len", gc_len);
    grad_cmd->add_option("--tol", gc_tol);
    grad_cmd->add_option("--seed", seed_flag)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd || *pop_cmd) {
            Config cfg;
            if (!config_path.empty()) cfg = thg::parse_config_file(config_path);
            for (const std::string& ov : overrides) parse_config_line(cfg, ov, 0);
            if (!env_flag.empty()) cfg.set("env", env_flag);
            if (!cell_flag.empty()) cfg.set("cell", cell_flag);
            if (!arch_flag.empty()) cfg.set("arch", arch_flag);
            if (iters_flag >= 0) cfg.set("total_iterations", std::to_string(iters_flag));
            if (!run_id_flag.empty()) cfg.set("run_id", run_id_flag);
            if (seed_flag >= 0) cfg.set("seed", std::to_string(seed_flag));
            if (*train_cmd) return run_train(cfg);
            return run_population(cfg, parse_ll_list(seeds_str));
        }
        if (*vaa_cmd) return run_vaa(ckpt_path, env_kind, M, eps, tau, model_id, out_path);
        if (*sweep_cmd) {
            if (!oracle && ckpt_path.empty())
                throw std::invalid_argument("sweep: --checkpoint required unless --oracle");
            return run_sweep(ckpt_path, oracle, env_kind, horizons_str, episodes,
                             static_cast<uint64_t>(seed_flag), tau, model_id, out_path);
        }
        if (*report_cmd) return run_report(report_dir.empty() ? thg::out_root().string() : report_dir);
        if (*scan_cmd) return run_scan_check(cases, max_len, static_cast<uint64_t>(seed_flag));
        if (*grad_cmd)
            return run_gradcheck(gc_family, gc_input, gc_hidden, gc_len, static_cast<uint64_t>(seed_flag),
                                 gc_tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
