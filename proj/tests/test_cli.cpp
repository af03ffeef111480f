// Drives the segedit executable as a separate process.
#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <csignal>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* const kCli = SEGEDIT_CLI_PATH;

struct Result {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

fs::path scratch() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() / ("segedit_cli_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

struct Cleanup {
    // Touching scratch() first makes its path outlive this object.
    Cleanup() { scratch(); }
    ~Cleanup() {
        std::error_code ec;
        fs::remove_all(scratch(), ec);
    }
} cleanup;

std::vector<char*> argv_of(std::vector<std::string>& args) {
    std::vector<char*> v;
    for (auto& a : args)
        v.push_back(a.data());
    v.push_back(nullptr);
    return v;
}

Result run(std::vector<std::string> args, const std::vector<std::string>& env = {}) {
    static int counter = 0;
    const fs::path out = scratch() / ("out" + std::to_string(counter) + ".txt");
    const fs::path err = scratch() / ("err" + std::to_string(counter++) + ".txt");
    args.insert(args.begin(), kCli);
    auto argv = argv_of(args);
    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        const int fo = open(out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        const int fe = open(err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        dup2(fo, 1);
        dup2(fe, 2);
        for (const auto& e : env)
            putenv(const_cast<char*>(e.c_str()));
        execv(kCli, argv.data());
        _exit(127);
    }
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::minutes(5);
    while (waitpid(pid, &status, WNOHANG) == 0) {
        if (std::chrono::steady_clock::now() > deadline) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            FAIL("segedit did not finish within 5 minutes");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string path(const fs::path& p) {
    return p.string();
}

// Shared fixture: a synthetic 4-segment scene written once.
const fs::path& scene() {
    static const fs::path dir = [] {
        const fs::path d = scratch() / "scene";
        const auto r = run({"synth", "--out", path(d), "--layout", "quadrants", "--seed", "3"});
        REQUIRE(r.code == 0);
        return d;
    }();
    return dir;
}

std::vector<std::string> project_args(const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"project", "--image", path(scene() / "target.png"), "--labels",
                               path(scene() / "labels.png"), "--out", path(out), "--steps", "25",
                               "--mean-samples", "200", "-q"};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
}

std::vector<std::string> edit_args(const fs::path& image, const fs::path& out, std::vector<std::string> extra) {
    std::vector<std::string> a{"edit", "--image", path(image), "--labels", path(scene() / "labels.png"),
                               "--out", path(out), "--steps", "25", "--mean-samples", "200", "-q"};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
}

// A running `segedit serve` child with its port parsed from stdout.
class Server {
public:
    explicit Server(std::vector<std::string> args, const std::vector<std::string>& env = {}) {
        int fds[2];
        REQUIRE(pipe(fds) == 0);
        args.insert(args.begin(), {kCli, "serve", "--port", "0"});
        auto argv = argv_of(args);
        pid_ = fork();
        REQUIRE(pid_ >= 0);
        if (pid_ == 0) {
            dup2(fds[1], 1);
            close(fds[0]);
            for (const auto& e : env)
                putenv(const_cast<char*>(e.c_str()));
            execv(kCli, argv.data());
            _exit(127);
        }
        close(fds[1]);
        std::string line;
        char c;
        while (read(fds[0], &c, 1) == 1 && c != '\n')
            line += c;
        close(fds[0]);
        const auto colon = line.rfind(':');
        REQUIRE_MESSAGE(colon != std::string::npos, "unexpected serve output: ", line);
        port_ = std::stoi(line.substr(colon + 1));
    }
    ~Server() { stop(); }
    int stop() {
        if (pid_ <= 0)
            return exit_;
        kill(pid_, SIGTERM);
        int status = 0;
        waitpid(pid_, &status, 0);
        pid_ = -1;
        exit_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return exit_;
    }
    int port() const { return port_; }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60, 0);
        return c;
    }

private:
    pid_t pid_ = -1;
    int port_ = 0;
    int exit_ = -1;
};

json wait_job(httplib::Client& c, int id) {
    for (int i = 0; i < 3000; ++i) {
        auto r = c.Get("/api/job/" + std::to_string(id));
        REQUIRE(r);
        const json j = json::parse(r->body);
        if (j.at("state") != "running")
            return j;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    FAIL("job did not finish");
    return {};
}

} // namespace

TEST_CASE("usage errors exit with 2") {
    auto r = run({});
    CHECK(r.code == 2);
    r = run({"project", "--out", path(scratch() / "x")});
    CHECK(r.code == 2);
    CHECK(r.err.find("--image is required") != std::string::npos);
    CHECK(r.err.find("Usage:") != std::string::npos);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"project", "--image", "/nonexistent.png", "--out", "x"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    r = run({"edit", "--image", path(scene() / "target.png"), "--labels", path(scene() / "labels.png"), "--out",
             path(scratch() / "e"), "--direction", path(scene() / "direction.json")});
    CHECK(r.code == 2);
    CHECK(r.err.find("--alpha") != std::string::npos);
}

TEST_CASE("project is byte-reproducible across runs and thread counts") {
    const fs::path a = scratch() / "pa", b = scratch() / "pb", c = scratch() / "pc";
    REQUIRE(run(project_args(a)).code == 0);
    REQUIRE(run(project_args(b)).code == 0);
    REQUIRE(run(project_args(c, {"--threads", "3"})).code == 0);
    for (const char* f : {"projection.json", "reconstruction.png", "losses.csv"}) {
        CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
        CHECK_MESSAGE(slurp(a / f) == slurp(c / f), f);
    }
    const json proj = json::parse(slurp(a / "projection.json"));
    CHECK(proj.at("segments").size() == 4);
    const json manifest = json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("command") == "project");
    CHECK(manifest.at("outputs").size() >= 3);
    CHECK(manifest.at("inputs").size() == 2);

    std::istringstream csv(slurp(a / "losses.csv"));
    std::string line;
    int rows = 0;
    std::getline(csv, line);
    CHECK(line == "segment,step,loss");
    while (std::getline(csv, line))
        ++rows;
    CHECK(rows == 4 * 25);
}

TEST_CASE("global projection is a single pseudo-segment 0") {
    const fs::path g = scratch() / "global";
    REQUIRE(run(project_args(g, {"--global"})).code == 0);
    const json proj = json::parse(slurp(g / "projection.json"));
    REQUIRE(proj.at("segments").size() == 1);
    CHECK(proj["segments"][0].at("id") == 0);
    const fs::path g2 = scratch() / "global_nolabels";
    REQUIRE(run({"project", "--global", "--image", path(scene() / "target.png"), "--out", path(g2), "--steps", "25",
                 "--mean-samples", "200", "-q"})
                .code == 0);
    CHECK(slurp(g / "reconstruction.png") == slurp(g2 / "reconstruction.png"));
}

TEST_CASE("edit semantics") {
    const fs::path p = scratch() / "ep";
    REQUIRE(run(project_args(p)).code == 0);
    const auto dir = path(scene() / "direction.json");

    SUBCASE("alpha 0 equals the reconstruction") {
        const fs::path e = scratch() / "e0";
        REQUIRE(run(edit_args(scene() / "target.png", e, {"--direction", dir, "--alpha", "0"})).code == 0);
        CHECK(slurp(e / "edited.png") == slurp(p / "reconstruction.png"));
        const fs::path ec = scratch() / "e0c";
        REQUIRE(run(edit_args(scene() / "target.png", ec,
                              {"--direction", dir, "--alpha", "0", "--codes", path(p / "projection.json")}))
                    .code == 0);
        CHECK(slurp(ec / "edited.png") == slurp(p / "reconstruction.png"));
    }

    SUBCASE("ALL equals the explicit segment list") {
        const fs::path a = scratch() / "eall", b = scratch() / "elist";
        REQUIRE(run(edit_args(scene() / "target.png", a, {"--direction", dir, "--alpha", "1.5"})).code == 0);
        REQUIRE(run(edit_args(scene() / "target.png", b,
                              {"--direction", dir, "--alpha", "1.5", "--segments", "1,2,3,4"}))
                    .code == 0);
        CHECK(slurp(a / "edited.png") == slurp(b / "edited.png"));
        CHECK(slurp(a / "edited.png") != slurp(p / "reconstruction.png"));
        const fs::path t = scratch() / "ethreads";
        REQUIRE(run(edit_args(scene() / "target.png", t, {"--direction", dir, "--alpha", "1.5", "--threads", "4"}))
                    .code == 0);
        CHECK(slurp(a / "edited.png") == slurp(t / "edited.png"));
        CHECK(slurp(a / "codes.json") == slurp(t / "codes.json"));
    }

    SUBCASE("a two-step script equals two chained runs") {
        const fs::path s = scratch() / "escript";
        fs::create_directories(s);
        spit(s / "script.json", R"([
            {"segments": [1, 2], "direction": ")" + dir + R"(", "alpha": 2.0},
            {"segments": "ALL", "direction": ")" + dir + R"(", "alpha": -1.0}
        ])");
        REQUIRE(run(edit_args(scene() / "target.png", s / "out", {"--script", path(s / "script.json")})).code == 0);
        const fs::path c1 = scratch() / "chain1", c2 = scratch() / "chain2";
        REQUIRE(run(edit_args(scene() / "target.png", c1, {"--direction", dir, "--alpha", "2", "--segments", "1,2"}))
                    .code == 0);
        REQUIRE(run(edit_args(c1 / "edited.png", c2, {"--direction", dir, "--alpha", "-1"})).code == 0);
        CHECK(slurp(s / "out" / "edited.png") == slurp(c2 / "edited.png"));
    }

    SUBCASE("codes from another generator are refused at runtime") {
        const fs::path e = scratch() / "eseed";
        const auto r = run(edit_args(scene() / "target.png", e,
                                     {"--direction", dir, "--alpha", "1", "--codes", path(p / "projection.json"),
                                      "--generator-seed", "2"}));
        CHECK(r.code == 1);
        CHECK(r.err.find("seed") != std::string::npos);
    }
}

TEST_CASE("refine") {
    const fs::path p = scratch() / "rp";
    REQUIRE(run(project_args(p)).code == 0);
    std::vector<std::string> base{"refine", "--image", path(scene() / "target.png"), "--labels",
                                  path(scene() / "labels.png"), "--segment", "2", "-q"};

    auto args = base;
    args.insert(args.end(), {"--rendered", path(scene() / "target.png"), "--out", path(scratch() / "r0")});
    REQUIRE(run(args).code == 0);
    CHECK(slurp(scratch() / "r0" / "refined_labels.png") == slurp(scene() / "labels.png"));
    for (const char* f : {"overlay.png", "speed.png", "manifest.json"})
        CHECK(fs::exists(scratch() / "r0" / f));

    args = base;
    args.insert(args.end(), {"--codes", path(p / "projection.json"), "--out", path(scratch() / "r1")});
    REQUIRE(run(args).code == 0);
    CHECK(fs::exists(scratch() / "r1" / "refined_labels.png"));

    args = base;
    args.insert(args.end(), {"--codes", path(p / "projection.json"), "--dt", "5", "--out", path(scratch() / "r2")});
    const auto r = run(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("max admissible dt") != std::string::npos);
}

TEST_CASE("compare writes one CSV row per seed") {
    const fs::path c = scratch() / "cmp";
    const auto r = run({"compare", "--labels", path(scene() / "labels.png"), "--seeds", "1,2,3", "--steps", "25",
                        "--mean-samples", "200", "--out", path(c), "-q"});
    REQUIRE(r.code == 0);
    std::istringstream csv(slurp(c / "compare.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "seed,mse_segmented,mse_global");
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        std::istringstream fields(line);
        std::string seed, seg, glob;
        std::getline(fields, seed, ',');
        std::getline(fields, seg, ',');
        std::getline(fields, glob, ',');
        CHECK(std::stod(seg) >= 0.0);
        CHECK(std::stod(glob) >= 0.0);
    }
    CHECK(rows == 3);
    CHECK(slurp(c / "summary.md").find("win rate") != std::string::npos);
}

TEST_CASE("replay reproduces a run") {
    const fs::path p = scratch() / "replay";
    REQUIRE(run(project_args(p)).code == 0);
    auto r = run({"replay", path(p / "manifest.json")});
    CHECK(r.code == 0);
    CHECK(r.out.find("replay reproduced") != std::string::npos);

    json m = json::parse(slurp(p / "manifest.json"));
    m["outputs"]["reconstruction"]["sha256"] = std::string(64, '0');
    spit(p / "tampered.json", m.dump());
    r = run({"replay", path(p / "tampered.json")});
    CHECK(r.code == 1);
}

TEST_CASE("HTTP API") {
    const fs::path state = scratch() / "state";
    const std::string image = path(scene() / "target.png"), labels = path(scene() / "labels.png");
    Server server({"--image", image, "--labels", labels, "--state-dir", path(state)});
    auto c = server.client();

    auto health = c.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body).at("status") == "ok");

    auto missing = c.Get("/api/nope");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).contains("error"));

    // Label round trip is byte-exact.
    const std::string label_bytes = slurp(labels);
    auto put = c.Put("/api/labels", label_bytes, "image/png");
    REQUIRE(put);
    CHECK(put->status == 200);
    auto got = c.Get("/api/labels");
    REQUIRE(got);
    CHECK(got->body == label_bytes);
    auto bad = c.Put("/api/labels", std::string("not a png"), "image/png");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    auto undo_empty_check = c.Get("/api/state");
    REQUIRE(undo_empty_check);
    CHECK(json::parse(undo_empty_check->body).at("segments") == 4);

    // Project, then compare the composite with the CLI reconstruction.
    const json pbody = {{"steps", 25}, {"seed", 0}, {"space", "W"}};
    auto job = c.Post("/api/project", pbody.dump(), "application/json");
    REQUIRE(job);
    CHECK(job->status == 202);
    const int id = json::parse(job->body).at("job");
    auto busy = c.Post("/api/project", pbody.dump(), "application/json");
    REQUIRE(busy);
    const json done = wait_job(c, id);
    CHECK(done.at("state") == "done");
    CHECK(done.at("progress").at("step") == done.at("progress").at("steps"));
    CHECK(done.at("progress").at("steps") == 100);
    // The second request either lost the race (409) or queued behind nothing.
    CHECK((busy->status == 409 || busy->status == 202));
    if (busy->status == 202)
        wait_job(c, json::parse(busy->body).at("job"));

    const fs::path cli_proj = scratch() / "serve_cli";
    REQUIRE(run({"project", "--image", image, "--labels", labels, "--out", path(cli_proj), "--steps", "25",
                 "--mean-samples", "1000", "-q"})
                .code == 0);
    auto comp = c.Get("/api/composite?poisson=true");
    REQUIRE(comp);
    CHECK(comp->body == slurp(cli_proj / "reconstruction.png"));

    // Commit edit equals the CLI edit with cached codes.
    const json direction = json::parse(slurp(scene() / "direction.json"));
    const json ebody = {{"direction", direction}, {"alpha", 1.5}, {"segments", {2, 3}}, {"reproject", false}};
    auto preview = c.Post("/api/edit", ebody.dump(), "application/json");
    REQUIRE(preview);
    CHECK(preview->status == 202);
    CHECK(wait_job(c, json::parse(preview->body).at("job")).at("state") == "done");
    auto st = c.Get("/api/state");
    CHECK(json::parse(st->body).at("preview") == true);
    auto preview_png = c.Get("/api/composite");
    REQUIRE(preview_png);

    json commit_body = ebody;
    commit_body["reproject"] = true;
    commit_body["steps"] = 25;
    auto commit = c.Post("/api/edit", commit_body.dump(), "application/json");
    REQUIRE(commit);
    CHECK(wait_job(c, json::parse(commit->body).at("job")).at("state") == "done");
    const fs::path cli_edit = scratch() / "serve_cli_edit";
    REQUIRE(run({"edit", "--image", image, "--labels", labels, "--out", path(cli_edit), "--direction",
                 path(scene() / "direction.json"), "--alpha", "1.5", "--segments", "2,3", "--steps", "25", "-q"})
                .code == 0);
    auto img = c.Get("/api/image");
    REQUIRE(img);
    CHECK(img->body == slurp(cli_edit / "edited.png"));

    // Refine and undo.
    auto refine = c.Post("/api/refine", json{{"segment", 1}}.dump(), "application/json");
    REQUIRE(refine);
    CHECK(wait_job(c, json::parse(refine->body).at("job")).at("state") == "done");
    auto depth = json::parse(c.Get("/api/state")->body).at("undo_depth").get<int>();
    auto undo = c.Post("/api/undo", "", "application/json");
    REQUIRE(undo);
    CHECK(undo->status == 200);
    CHECK(json::parse(c.Get("/api/state")->body).at("undo_depth") == depth - 1);

    auto bad_edit = c.Post("/api/edit", json{{"alpha", 1}}.dump(), "application/json");
    REQUIRE(bad_edit);
    CHECK(bad_edit->status == 400);

    CHECK(server.stop() == 0);
    for (const char* f : {"original.png", "image.png", "labels.png", "session.json"})
        CHECK_MESSAGE(fs::exists(state / f), f);

    // Resume from the state directory named by the environment.
    Server resumed({}, {"SEGEDIT_STATE_DIR=" + path(state)});
    auto rc = resumed.client();
    auto again = rc.Get("/api/image");
    REQUIRE(again);
    CHECK(again->body == slurp(state / "image.png"));
    CHECK(json::parse(rc.Get("/api/state")->body).at("segments") == 4);

    // A busy port is a runtime failure.
    const auto r = run({"serve", "--port", std::to_string(resumed.port()), "--image", image});
    CHECK(r.code == 1);
    CHECK(resumed.stop() == 0);
}

TEST_CASE("undo on an empty history is a conflict") {
    Server server({"--image", path(scene() / "target.png")});
    auto c = server.client();
    auto r = c.Post("/api/undo", "", "application/json");
    REQUIRE(r);
    CHECK(r->status == 409);
    auto comp = c.Get("/api/composite");
    REQUIRE(comp);
    CHECK(comp->body == c.Get("/api/image")->body);
}
