// Drives the built `vwm` binary through a shell.

#include <signal.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "vwm/report.hpp"
#include "vwm/run_files.hpp"
#include "vwm/service/server.hpp"

namespace vwm {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    int status = -1;
    std::string out;
};

Outcome run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + VWM_CLI + " " + args + " 2>&1";
    Outcome o;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return o;
    char buf[4096];
    while (auto n = std::fread(buf, 1, sizeof buf, p)) o.out.append(buf, n);
    const int st = ::pclose(p);
    o.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return o;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("vwm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
                std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

TEST_F(CliTest, SimulateWritesLogsCsvAndManifest) {
    const auto r = run("simulate --participants 16 --seed 42 --out " + path("run1"));
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir_ / "run1" / "manifest.json"));
    int logs = 0;
    for (const auto& e : fs::directory_iterator(dir_ / "run1" / "logs")) logs += e.path().extension() == ".log";
    EXPECT_EQ(logs, 64);

    const auto csv = read_file(dir_ / "run1" / "trials.csv");
    std::map<int, int> recorded;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, kRecordCsvHeader);
    while (std::getline(in, line)) {
        const auto rec = parse_csv_row(line);
        if (rec.recorded()) ++recorded[rec.participant];
    }
    EXPECT_EQ(recorded.size(), 16u);
    for (const auto& [p, n] : recorded) EXPECT_EQ(n, 208) << "participant " << p;

    const auto m = parse_manifest(read_file(dir_ / "run1" / "manifest.json"));
    EXPECT_EQ(m.command, "simulate");
    EXPECT_EQ(m.seed, 42u);
    EXPECT_EQ(m.participants, 16);
}

TEST_F(CliTest, SameCommandTwiceGivesIdenticalCsv) {
    ASSERT_EQ(run("simulate --participants 3 --seed 9 --out " + path("a")).status, 0);
    const auto first = read_file(dir_ / "a" / "trials.csv");
    ASSERT_EQ(run("simulate --participants 3 --seed 9 --out " + path("a")).status, 0);
    EXPECT_EQ(read_file(dir_ / "a" / "trials.csv"), first);
    ASSERT_EQ(run("simulate --participants 3 --seed 9 --out " + path("b")).status, 0);
    EXPECT_EQ(read_file(dir_ / "b" / "trials.csv"), first);
}

TEST_F(CliTest, ManifestReproducesTheRun) {
    ASSERT_EQ(run("simulate --participants 2 --seed 5 --trials-per-condition 12 --out " + path("a")).status, 0);
    const auto cfg = study_from_manifest(parse_manifest(read_file(dir_ / "a" / "manifest.json")));
    EXPECT_EQ(read_file(dir_ / "a" / "trials.csv"), to_csv(all_records(simulate_study(cfg))));
}

TEST_F(CliTest, SimulateUsageErrors) {
    auto r = run("simulate --participants 0 --out " + path("zero"));
    EXPECT_EQ(r.status, 1) << r.out;
    EXPECT_FALSE(fs::exists(dir_ / "zero"));

    write_file_atomic(dir_ / "bad.params", "jitter_px = 5\nnot_a_key = 1\n");
    r = run("simulate --participants 2 --params " + path("bad.params") + " --out " + path("bad"));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find("not_a_key"), std::string::npos) << r.out;
    EXPECT_FALSE(fs::exists(dir_ / "bad"));

    write_file_atomic(dir_ / "neg.params", "fitts_b = -1\n");
    EXPECT_EQ(run("simulate --participants 2 --params " + path("neg.params") + " --out " + path("neg")).status, 1);

    EXPECT_EQ(run("simulate --participants 2").status, 1);  // --out is required
    EXPECT_EQ(run("").status, 1);
    EXPECT_EQ(run("frobnicate").status, 1);
    EXPECT_EQ(run("--help").status, 0);

    // A directory that is not a run is never overwritten.
    write_file_atomic(dir_ / "mine" / "notes.txt", "keep");
    EXPECT_EQ(run("simulate --participants 1 --out " + path("mine")).status, 1);
    EXPECT_EQ(read_file(dir_ / "mine" / "notes.txt"), "keep");
}

TEST_F(CliTest, SeedFromEnvironment) {
    ASSERT_EQ(run("simulate --participants 2 --seed 1 --out " + path("env"), "VWM_SEED=77").status, 0);
    ASSERT_EQ(run("simulate --participants 2 --seed 77 --out " + path("flag")).status, 0);
    EXPECT_EQ(parse_manifest(read_file(dir_ / "env" / "manifest.json")).seed, 77u);
    EXPECT_EQ(read_file(dir_ / "env" / "trials.csv"), read_file(dir_ / "flag" / "trials.csv"));
    EXPECT_EQ(run("simulate --participants 2 --out " + path("x"), "VWM_SEED=abc").status, 1);
}

TEST_F(CliTest, AnalyzeWritesFourReports) {
    ASSERT_EQ(run("simulate --participants 16 --seed 42 --out " + path("run1")).status, 0);
    const auto r = run("analyze " + path("run1"));
    ASSERT_EQ(r.status, 0) << r.out;
    for (auto m : kMeasures) {
        const auto name = to_string(m);
        for (const auto& suffix : {".txt", "_effects.csv", "_cells.csv", "_contrasts.csv"})
            EXPECT_TRUE(fs::exists(dir_ / "run1" / "reports" / (name + suffix))) << name << suffix;
    }
    EXPECT_TRUE(fs::exists(dir_ / "run1" / "reports" / "calibration.txt"));
    const auto effects = read_file(dir_ / "run1" / "reports" / "thumbnail_effects.csv");
    EXPECT_EQ(std::count(effects.begin(), effects.end(), '\n'), 1 + 3 * 3);  // Overall, Large, Short
}

TEST_F(CliTest, AnalyzeSingleTable) {
    ASSERT_EQ(run("simulate --participants 8 --seed 3 --out " + path("r")).status, 0);
    const auto r = run("analyze " + path("r") + " --measure total --block LL --out " + path("rep"));
    ASSERT_EQ(r.status, 0) << r.out;
    std::set<std::string> files;
    for (const auto& e : fs::directory_iterator(dir_ / "rep")) files.insert(e.path().filename().string());
    EXPECT_EQ(files, (std::set<std::string>{"total.txt", "total_effects.csv", "total_cells.csv", "total_contrasts.csv"}));
    const auto effects = read_file(dir_ / "rep" / "total_effects.csv");
    EXPECT_EQ(std::count(effects.begin(), effects.end(), '\n'), 1 + 3);
    EXPECT_NE(effects.find("total,LL,"), std::string::npos);

    EXPECT_EQ(run("analyze " + path("r") + " --measure total --block Large").status, 1);
    EXPECT_EQ(run("analyze " + path("r") + " --measure speed").status, 1);
}

TEST_F(CliTest, AnalyzeStrictAndLenient) {
    ASSERT_EQ(run("simulate --participants 4 --seed 42 --out " + path("r")).status, 0);
    const auto log = dir_ / "r" / "logs" / log_file_name(2, kConditions[1]);
    auto text = read_file(log);
    // Replace line 20 with junk.
    std::size_t pos = 0;
    for (int i = 1; i < 20; ++i) pos = text.find('\n', pos) + 1;
    text.replace(pos, text.find('\n', pos) - pos, "junk,line");
    write_file_atomic(log, text);

    auto r = run("analyze " + path("r"));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find(log.filename().string() + ":20:"), std::string::npos) << r.out;
    r = run("analyze --lenient " + path("r"));
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir_ / "r" / "reports" / "errors.txt"));

    fs::remove(dir_ / "r" / "logs" / log_file_name(0, kConditions[3]));
    r = run("analyze " + path("r"));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find("missing log"), std::string::npos) << r.out;

    EXPECT_EQ(run("analyze " + path("nothing-here")).status, 1);
}

TEST_F(CliTest, AnalyzeWithoutRecordedTrials) {
    ASSERT_EQ(run("simulate --participants 2 --trials-per-condition 3 --out " + path("r")).status, 0);
    const auto r = run("analyze " + path("r"));
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("nothing to analyze"), std::string::npos) << r.out;
}

TEST_F(CliTest, LatinSquare) {
    const auto r = run("latinsquare --n 4");
    ASSERT_EQ(r.status, 0);
    std::vector<std::vector<int>> rows;
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        rows.emplace_back(std::istream_iterator<int>(ls), std::istream_iterator<int>());
    }
    ASSERT_EQ(rows.size(), 4u);
    std::set<std::pair<int, int>> adjacent;
    for (std::size_t i = 0; i < 4; ++i) {
        ASSERT_EQ(rows[i].size(), 4u);
        EXPECT_EQ(std::set<int>(rows[i].begin(), rows[i].end()), (std::set<int>{1, 2, 3, 4}));
        std::set<int> column;
        for (const auto& row : rows) column.insert(row[i]);
        EXPECT_EQ(column.size(), 4u);
        for (std::size_t j = 0; j + 1 < 4; ++j) adjacent.insert({rows[i][j], rows[i][j + 1]});
    }
    EXPECT_EQ(adjacent.size(), 12u);
    EXPECT_EQ(run("latinsquare --n 3").status, 1);
    EXPECT_EQ(run("latinsquare").status, 1);
}

// Starts `vwm serve` in the background; the first output line is the shell pid.
struct ServeProcess {
    FILE* pipe = nullptr;
    int pid = 0;
    unsigned short port = 0;
    std::string first_lines;

    explicit ServeProcess(const std::string& args) {
        const std::string cmd = std::string("sh -c 'echo $$; exec ") + VWM_CLI + " serve " + args + "' 2>&1";
        pipe = ::popen(cmd.c_str(), "r");
        char buf[512];
        if (pipe && std::fgets(buf, sizeof buf, pipe)) pid = std::atoi(buf);
        if (pipe && std::fgets(buf, sizeof buf, pipe)) {
            first_lines = buf;
            if (const char* colon = std::strrchr(buf, ':')) port = static_cast<unsigned short>(std::atoi(colon + 1));
        }
    }

    int wait() {
        char buf[512];
        while (std::fgets(buf, sizeof buf, pipe)) first_lines += buf;
        const int st = ::pclose(pipe);
        pipe = nullptr;
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    }

    ~ServeProcess() {
        if (pipe) {
            ::kill(pid, SIGKILL);
            ::pclose(pipe);
        }
    }
};

TEST_F(CliTest, ServeSmokeSessionIsAnalyzable) {
    ServeProcess serve("--port 0 --sessions 1 --trials-per-condition 2 --out " + path("live"));
    ASSERT_GT(serve.port, 0) << serve.first_lines;
    EXPECT_NE(serve.first_lines.find("listening on 127.0.0.1:"), std::string::npos);

    StudyConfig cfg;
    cfg.trials_per_condition = 2;
    const auto bar = make_bar_for(cfg, layout_seed_for(participant_seed(cfg.seed, 0)));
    const auto sim = run_session(plan_for(cfg, 0, bar.layout()), bar, cfg.agents);
    {
        service::Client client("127.0.0.1", serve.port);
        client.send(service::MessageType::Hello, {{"protocol", service::kProtocol}, {"participant", 0}});
        client.receive_until(service::MessageType::StateUpdate);
        for (const auto& log : sim.logs)
            for (const auto& trial : log.trials)
                for (const auto& ev : trial.events) {
                    client.send(service::MessageType::InputEvent, service::input_event_payload(ev));
                    service::WireMessage m;
                    do m = client.receive();
                    while (!(m.type == service::MessageType::StateUpdate && m.payload["ack"] == client.seq()) &&
                           m.type != service::MessageType::Error);
                    ASSERT_EQ(m.type, service::MessageType::StateUpdate) << m.payload.dump();
                }
        const auto rest = client.receive_until(service::MessageType::SessionEnd);
        ASSERT_EQ(rest.back().type, service::MessageType::SessionEnd) << rest.back().payload.dump();
        EXPECT_EQ(rest.back().payload["records"], 8);
    }
    EXPECT_EQ(serve.wait(), 0) << serve.first_lines;

    // Same bytes as a headless run of the same setup.
    ASSERT_EQ(run("simulate --participants 1 --trials-per-condition 2 --out " + path("sim")).status, 0);
    for (auto c : kConditions)
        EXPECT_EQ(read_file(dir_ / "live" / "logs" / log_file_name(0, c)),
                  read_file(dir_ / "sim" / "logs" / log_file_name(0, c)));

    const auto r = run("analyze " + path("live"));
    EXPECT_EQ(r.status, 0) << r.out;
}

TEST_F(CliTest, ServeStopsOnSignal) {
    ServeProcess serve("--port 0 --out " + path("live"));
    ASSERT_GT(serve.port, 0) << serve.first_lines;
    ::kill(serve.pid, SIGTERM);
    EXPECT_EQ(serve.wait(), 0);
    EXPECT_TRUE(fs::exists(dir_ / "live" / "manifest.json"));
}

TEST_F(CliTest, ServeOnBusyPortFails) {
    boost::asio::io_context ioc;
    boost::asio::ip::tcp::acceptor taken(ioc, {boost::asio::ip::make_address("127.0.0.1"), 0});
    const auto r = run("serve --port " + std::to_string(taken.local_endpoint().port()) + " --out " + path("busy"));
    EXPECT_EQ(r.status, 1) << r.out;
    EXPECT_FALSE(fs::exists(dir_ / "busy" / "manifest.json"));
}

}  // namespace
}  // namespace vwm
