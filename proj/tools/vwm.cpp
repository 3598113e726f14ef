// vwm: simulate studies, analyze run directories, print counterbalancing
// squares and host live sessions.
//
// Exit codes: 0 ok, 1 usage or input error, 2 internal error.

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "vwm/report.hpp"
#include "vwm/run_files.hpp"
#include "vwm/service/server.hpp"

namespace {

using namespace vwm;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(std::uint64_t flag) {
    const char* env = std::getenv("VWM_SEED");
    if (!env || !*env) return flag;
    std::uint64_t v = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw UsageError("VWM_SEED is not an unsigned integer: " + std::string(s));
    return v;
}

StudyConfig load_study(std::uint64_t seed, int participants, int trials_per_condition, const std::string& params) {
    StudyConfig cfg;
    cfg.seed = resolve_seed(seed);
    cfg.participants = participants;
    cfg.trials_per_condition = trials_per_condition;
    if (!params.empty()) apply_params(cfg, KeyValues::load(params));
    validate_study(cfg);
    return cfg;
}

RunManifest make_manifest(const std::string& command, const std::vector<std::string>& args, const StudyConfig& cfg,
                          const std::string& params_file, const fs::path& out) {
    RunManifest m;
    m.command = command;
    m.args = args;
    m.seed = cfg.seed;
    m.participants = cfg.participants;
    m.trials_per_condition = cfg.trials_per_condition;
    m.params_file = params_file;
    m.out = out.string();
    m.params = study_params(cfg);
    return m;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
    int participants = 16;
    std::uint64_t seed = 42;
    std::string out;
    std::string params;
    int trials_per_condition = 0;
};

// A previous run in `out` is replaced; anything else there is left alone.
void clear_previous_run(const fs::path& out) {
    if (!fs::exists(out)) return;
    if (!fs::is_directory(out)) throw UsageError(out.string() + " exists and is not a directory");
    if (fs::is_empty(out)) return;
    if (!fs::exists(out / "manifest.json"))
        throw UsageError(out.string() + " is not empty and holds no run manifest; pick another --out");
    fs::remove(out / "manifest.json");
    fs::remove(out / "trials.csv");
    fs::remove_all(out / "logs");
    fs::remove_all(out / "reports");
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
    if (a.participants <= 0) throw UsageError("--participants must be > 0");
    const auto cfg = load_study(a.seed, a.participants, a.trials_per_condition, a.params);
    const fs::path out(a.out);
    clear_previous_run(out);
    const bool created = !fs::exists(out);
    try {
        write_file_atomic(out / "manifest.json", manifest_json(make_manifest("simulate", argv, cfg, a.params, out)));
        const auto sessions = simulate_study(cfg);
        for (const auto& s : sessions) write_condition_logs(out, s.logs);
        const auto records = all_records(sessions);
        write_file_atomic(out / "trials.csv", to_csv(records));
        std::cout << cfg.participants << " participants, " << 4 * sessions.size() << " condition logs, "
                  << recorded_only(records).size() << " recorded trials -> " << out.string() << "\n";
    } catch (...) {
        std::error_code ec;
        if (created) {
            fs::remove_all(out, ec);
        } else {
            fs::remove(out / "manifest.json", ec);
            fs::remove(out / "trials.csv", ec);
            fs::remove_all(out / "logs", ec);
        }
        throw;
    }
    return 0;
}

// ---- analyze -----------------------------------------------------------------

struct AnalyzeArgs {
    std::string run_dir;
    std::string measure;
    std::string block;
    std::string out;
    bool lenient = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
    const fs::path run(a.run_dir);
    if (!fs::is_directory(run)) throw UsageError("no such run directory: " + run.string());
    if (!fs::exists(run / "manifest.json")) throw UsageError(run.string() + " has no manifest.json");
    const auto manifest = parse_manifest(read_file(run / "manifest.json"));
    const auto cfg = study_from_manifest(manifest);

    std::optional<Measure> only_measure;
    std::optional<Block> only_block;
    if (!a.measure.empty()) only_measure = parse_measure(a.measure);
    if (!a.block.empty()) only_block = parse_block(a.block);

    std::vector<fs::path> files;
    if (fs::is_directory(run / "logs"))
        for (const auto& e : fs::directory_iterator(run / "logs"))
            if (e.is_regular_file() && e.path().extension() == ".log") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::size_t problems = 0;
    const auto report_problem = [&](const std::string& where, const std::string& what) {
        std::cerr << where << ": " << what << "\n";
        ++problems;
    };
    for (int p = 0; p < manifest.participants; ++p)
        for (auto c : kConditions) {
            const auto path = run / "logs" / log_file_name(p, c);
            if (!fs::exists(path)) report_problem(path.string(), "missing log");
        }

    std::vector<TrialRecord> records;
    for (const auto& path : files) {
        const auto parsed = parse_log(read_file(path));
        for (const auto& issue : parsed.issues)
            report_problem(path.string() + ":" + std::to_string(issue.line), issue.message);
        try {
            const auto bar = make_bar_for(cfg, parsed.log.layout_seed);
            const auto recs = replay(parsed.log, bar);
            records.insert(records.end(), recs.begin(), recs.end());
        } catch (const std::exception& e) {
            report_problem(path.string(), e.what());
        }
    }
    if (problems > 0 && !a.lenient) {
        std::cerr << problems << " problem(s) in " << run.string() << "; rerun with --lenient to analyze the valid trials\n";
        return 1;
    }

    const auto recorded = recorded_only(records);
    if (recorded.empty()) {
        std::cout << "no recorded trials in " << run.string() << "; nothing to analyze\n";
        return 0;
    }

    const fs::path out = a.out.empty() ? run / "reports" : fs::path(a.out);
    const StatsConfig stats_cfg;
    std::vector<Measure> measures = only_measure ? std::vector<Measure>{*only_measure}
                                                 : std::vector<Measure>(kMeasures.begin(), kMeasures.end());
    for (auto m : measures) {
        const auto blocks = only_block ? std::vector<Block>{*only_block} : default_blocks(m);
        std::vector<BlockReport> reports;
        for (auto b : blocks) {
            try {
                reports.push_back(block_analysis(recorded, m, b, stats_cfg));
            } catch (const stats::StatsError& e) {
                std::cerr << "skipping " << to_string(m) << " " << to_string(b) << ": " << e.what() << "\n";
            }
        }
        if (reports.empty()) continue;
        const auto name = to_string(m);
        const auto text = text_report(reports, stats_cfg);
        write_file_atomic(out / (name + ".txt"), text);
        write_file_atomic(out / (name + "_effects.csv"), effects_csv(reports));
        write_file_atomic(out / (name + "_cells.csv"), cells_csv(reports));
        write_file_atomic(out / (name + "_contrasts.csv"), contrasts_csv(reports));
        std::cout << text << "\n";
    }
    if (!only_measure) {
        try {
            const auto cal = format_calibration(calibration_metrics(recorded));
            write_file_atomic(out / "calibration.txt", cal);
            std::cout << cal;
        } catch (const stats::StatsError& e) {
            std::cerr << "no calibration summary: " << e.what() << "\n";
        }
    }
    std::cout << "reports -> " << out.string() << "\n";
    return 0;
}

// ---- latinsquare -------------------------------------------------------------

int cmd_latinsquare(int n) {
    if (n < 2 || n % 2 != 0) throw UsageError("--n must be even and >= 2");
    for (const auto& row : balanced_latin_square(n)) {
        for (std::size_t j = 0; j < row.size(); ++j) std::cout << (j ? " " : "") << row[j] + 1;
        std::cout << "\n";
    }
    return 0;
}

// ---- serve -------------------------------------------------------------------

struct ServeArgs {
    int port = 7420;
    std::string host = "127.0.0.1";
    std::string out = "live";
    std::uint64_t seed = 42;
    std::string params;
    int trials_per_condition = 0;
    int sessions = 0;
};

int cmd_serve(const ServeArgs& a, const std::vector<std::string>& argv) {
    if (a.port < 0 || a.port > 65535) throw UsageError("--port must be in 0..65535");
    if (a.sessions < 0) throw UsageError("--sessions must be >= 0");
    if (a.trials_per_condition < 0) throw UsageError("--trials-per-condition must be >= 0");
    const auto cfg = load_study(a.seed, 0, a.trials_per_condition, a.params);
    const fs::path out(a.out);

    // Live runs append to the directory; a manifest from another setup is a conflict.
    const auto manifest = make_manifest("serve", argv, cfg, a.params, out);
    if (fs::exists(out / "manifest.json")) {
        const auto old = parse_manifest(read_file(out / "manifest.json"));
        if (old.command != "serve" || old.seed != cfg.seed || old.trials_per_condition != cfg.trials_per_condition ||
            old.params.entries() != manifest.params.entries())
            throw UsageError(out.string() + " holds a run with a different setup; pick another --out");
    } else if (fs::exists(out) && (!fs::is_directory(out) || !fs::is_empty(out))) {
        throw UsageError(out.string() + " is not empty and holds no run manifest; pick another --out");
    }

    // Block the stop signals before any thread starts; one thread waits for them.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    sigaddset(&set, SIGUSR1);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    service::Server server({cfg, out}, static_cast<unsigned short>(a.port), a.host);
    write_file_atomic(out / "manifest.json", manifest_json(manifest));

    std::atomic<int> ended{0};
    server.on_session_end([&](const service::SessionHandler& h) {
        if (h.plan())
            std::cout << "participant " << h.plan()->participant << (h.finished() ? " finished, " : " disconnected, ")
                      << h.records().size() << " trials" << std::endl;
        if (a.sessions > 0 && ++ended >= a.sessions) server.stop();
    });

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    std::cout << "listening on " << a.host << ":" << server.port() << std::endl;
    server.run();
    pthread_kill(waiter.native_handle(), SIGUSR1);
    waiter.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Virtual window manager study toolkit"};
    app.require_subcommand(1);
    const std::vector<std::string> args(argv + 1, argv + argc);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate participants and write logs, trials.csv and a manifest");
    simulate->add_option("--participants", sim.participants, "Number of simulated participants")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Study seed (VWM_SEED overrides)")->capture_default_str();
    simulate->add_option("--out", sim.out, "Output run directory")->required();
    simulate->add_option("--params", sim.params, "Parameter file (key = value)")->check(CLI::ExistingFile);
    simulate->add_option("--trials-per-condition", sim.trials_per_condition,
                         "Keep only the first N trials per condition (0 = full protocol)")
        ->check(CLI::NonNegativeNumber);

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Replay a run's logs and write statistics reports");
    analyze->add_option("run_dir", an.run_dir, "Run directory")->required();
    analyze->add_option("--measure", an.measure, "thumbnail, button, total or errors (default: all)");
    analyze->add_option("--block", an.block, "Overall, Large, Short, LL, LS, SL or SS (default: per measure)");
    analyze->add_option("--out", an.out, "Report directory (default: <run_dir>/reports)");
    analyze->add_flag("--lenient", an.lenient, "Analyze the valid trials even if some log lines are bad");

    int square_n = 0;
    auto* latin = app.add_subcommand("latinsquare", "Print a balanced Latin square");
    latin->add_option("--n", square_n, "Number of conditions (even)")->required();

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Host live sessions over TCP");
    serve->add_option("--port", sv.port, "TCP port (0 = any free port)")->capture_default_str();
    serve->add_option("--host", sv.host, "Listen address")->capture_default_str();
    serve->add_option("--out", sv.out, "Run directory for session logs")->capture_default_str();
    serve->add_option("--seed", sv.seed, "Study seed (VWM_SEED overrides)")->capture_default_str();
    serve->add_option("--params", sv.params, "Parameter file (key = value)")->check(CLI::ExistingFile);
    serve->add_option("--trials-per-condition", sv.trials_per_condition,
                      "Keep only the first N trials per condition (0 = full protocol)");
    serve->add_option("--sessions", sv.sessions, "Exit after this many sessions end (0 = run until signalled)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (*simulate) return cmd_simulate(sim, args);
        if (*analyze) return cmd_analyze(an);
        if (*latin) return cmd_latinsquare(square_n);
        if (*serve) return cmd_serve(sv, args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {  // ConfigError and bad names
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const service::ServiceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
