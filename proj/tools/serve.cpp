#include "commands.hpp"

#include <httplib.h>

#include <atomic>
#include <csignal>
#include <deque>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <pthread.h>
#include <thread>

namespace cli {

namespace {

constexpr std::size_t kUndoDepth = 32;

template <class T, void (*Free)(T*)>
std::shared_ptr<const T> share(T* p) {
    return std::shared_ptr<const T>(p, Free);
}

using SharedImage = std::shared_ptr<const segedit_image>;
using SharedLabels = std::shared_ptr<const segedit_labels>;
using SharedCodes = std::shared_ptr<const segedit_projections>;

struct Snapshot {
    SharedImage image;
    SharedLabels labels;
    SharedCodes codes;
};

struct Job {
    int id = 0;
    std::string kind;
    std::string state = "running";
    std::atomic<int> done{0};
    std::atomic<int> total{0};
    std::string error;
};

// A client-side problem with the request; answered with 400.
struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Session {
public:
    Session(Generator gen, int threads, fs::path state_dir)
        : gen_(std::move(gen)), threads_(threads), state_dir_(std::move(state_dir)) {}

    ~Session() {
        if (worker_.joinable())
            worker_.join();
    }

    void start(SharedImage image, SharedLabels labels) {
        original_ = image;
        current_.image = std::move(image);
        current_.labels = std::move(labels);
        persist();
    }

    bool resume() {
        if (state_dir_.empty() || !fs::exists(state_dir_ / "session.json"))
            return false;
        const json s = json::parse(read_file(state_dir_ / "session.json"));
        original_ = share<segedit_image, segedit_image_free>(load_image((state_dir_ / "original.png").string()).release());
        current_.image = share<segedit_image, segedit_image_free>(load_image((state_dir_ / "image.png").string()).release());
        current_.labels = share<segedit_labels, segedit_labels_free>(
            load_labels((state_dir_ / "labels.png").string(), width(), height()).release());
        if (fs::exists(state_dir_ / "codes.json"))
            current_.codes = share<segedit_projections, segedit_projections_free>(
                projections_from_json(gen_.get(), read_file(state_dir_ / "codes.json"), "codes.json").release());
        journal_ = s.value("journal", json::array());
        return true;
    }

    int width() const { return segedit_image_width(current_.image.get()); }
    int height() const { return segedit_image_height(current_.image.get()); }

    void install(httplib::Server& svr) {
        svr.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"status", "ok"}}.dump(), "application/json");
        });
        svr.Get("/api/image", [this](const httplib::Request&, httplib::Response& res) {
            png(res, encode_image(snapshot().image.get()));
        });
        svr.Get("/api/original", [this](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(mutex_);
            png(res, encode_image(original_.get()));
        });
        svr.Get("/api/labels", [this](const httplib::Request&, httplib::Response& res) {
            png(res, encode_labels(snapshot().labels.get()));
        });
        svr.Put("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { put_labels(req, res); });
        });
        svr.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(mutex_);
            res.set_content(json{{"width", width()},
                                 {"height", height()},
                                 {"segments", segedit_labels_segment_count(current_.labels.get())},
                                 {"has_codes", current_.codes != nullptr},
                                 {"preview", preview_ != nullptr},
                                 {"undo_depth", undo_.size()},
                                 {"busy", busy_.load()},
                                 {"generator_seed", segedit_generator_seed(gen_.get())}}
                                .dump(),
                            "application/json");
        });
        svr.Post("/api/project", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { post_project(req, res); });
        });
        svr.Post("/api/edit", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { post_edit(req, res); });
        });
        svr.Post("/api/refine", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { post_refine(req, res); });
        });
        svr.Get("/api/composite", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { get_composite(req, res); });
        });
        svr.Post("/api/undo", [this](const httplib::Request&, httplib::Response& res) {
            handle(res, [&] { post_undo(res); });
        });
        svr.Get(R"(/api/job/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            get_job(std::stoi(req.matches[1]), res);
        });
        svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty())
                res.set_content(json{{"error", httplib::status_message(res.status)}}.dump(), "application/json");
        });
    }

private:
    static void png(httplib::Response& res, const std::vector<std::uint8_t>& bytes) {
        res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    }

    static void error(httplib::Response& res, int status, const std::string& what) {
        res.status = status;
        res.set_content(json{{"error", what}}.dump(), "application/json");
    }

    template <class F>
    void handle(httplib::Response& res, F&& fn) {
        try {
            fn();
        } catch (const BadRequest& e) {
            error(res, 400, e.what());
        } catch (const json::exception& e) {
            error(res, 400, e.what());
        } catch (const RuntimeError& e) {
            error(res, e.status() == SEGEDIT_ERR_INTERNAL || e.status() == SEGEDIT_ERR_IO ? 500 : 400, e.what());
        } catch (const std::exception& e) {
            error(res, 500, e.what());
        }
    }

    Snapshot snapshot() {
        std::lock_guard lock(mutex_);
        return current_;
    }

    // Claims the session for a mutation; false (and 409) when a job runs.
    bool claim(httplib::Response& res) {
        bool expected = false;
        if (!busy_.compare_exchange_strong(expected, true)) {
            error(res, 409, "busy: a job is running");
            return false;
        }
        return true;
    }

    void release() { busy_ = false; }

    // Must hold mutex_.
    void commit(Snapshot next, json action) {
        undo_.push_back(current_);
        if (undo_.size() > kUndoDepth)
            undo_.pop_front();
        current_ = std::move(next);
        preview_.reset();
        journal_.push_back(std::move(action));
        persist();
    }

    // Must hold mutex_ (or run before the server starts).
    void persist() {
        if (state_dir_.empty())
            return;
        ensure_directory(state_dir_);
        write_file(state_dir_ / "original.png", encode_image(original_.get()));
        write_file(state_dir_ / "image.png", encode_image(current_.image.get()));
        write_file(state_dir_ / "labels.png", encode_labels(current_.labels.get()));
        if (current_.codes)
            write_file(state_dir_ / "codes.json", projections_json(gen_.get(), current_.codes.get()) + "\n");
        else
            fs::remove(state_dir_ / "codes.json");
        const json s = {{"generator_seed", segedit_generator_seed(gen_.get())},
                        {"undo_depth", undo_.size()},
                        {"journal", journal_}};
        write_file(state_dir_ / "session.json", s.dump(2) + "\n");
    }

    static json body_of(const httplib::Request& req) {
        if (req.body.empty())
            return json::object();
        json j = json::parse(req.body);
        if (!j.is_object())
            throw BadRequest("request body must be a JSON object");
        return j;
    }

    segedit_projection_config projection_from(const json& body) const {
        ProjectionOptions p;
        p.space = body.value("space", p.space);
        p.steps = body.value("steps", p.steps);
        p.seed = body.value("seed", p.seed);
        p.learning_rate = body.value("learning_rate", p.learning_rate);
        p.band = body.value("band_radius", p.band);
        return projection_config(p, threads_);
    }

    void put_labels(const httplib::Request& req, httplib::Response& res) {
        segedit_labels* raw = nullptr;
        if (segedit_labels_decode(reinterpret_cast<const uint8_t*>(req.body.data()), req.body.size(), &raw) !=
            SEGEDIT_OK)
            throw BadRequest(std::string("label map: ") + segedit_last_error());
        auto labels = share<segedit_labels, segedit_labels_free>(raw);
        if (segedit_labels_width(labels.get()) != width() || segedit_labels_height(labels.get()) != height())
            throw BadRequest("label map must be " + std::to_string(width()) + "x" + std::to_string(height()));
        if (!claim(res))
            return;
        {
            std::lock_guard lock(mutex_);
            std::string file;
            if (!state_dir_.empty()) {
                ensure_directory(state_dir_ / "journal");
                file = "journal/labels-" + std::to_string(journal_.size()) + ".png";
                write_file(state_dir_ / file, req.body);
            }
            // New segments invalidate the per-segment codes.
            commit({current_.image, labels, nullptr},
                   {{"action", "labels"}, {"sha256", sha256_hex(req.body)}, {"file", file}});
        }
        release();
        res.set_content(json{{"segments", segedit_labels_segment_count(labels.get())}}.dump(), "application/json");
    }

    template <class F>
    void start_job(const std::string& kind, httplib::Response& res, F&& work) {
        auto job = std::make_shared<Job>();
        {
            std::lock_guard lock(mutex_);
            job->id = next_job_++;
            job->kind = kind;
            jobs_[job->id] = job;
        }
        if (worker_.joinable())
            worker_.join();
        worker_ = std::thread([this, job, work = std::forward<F>(work)]() mutable {
            try {
                work(*job);
                std::lock_guard lock(mutex_);
                job->state = "done";
            } catch (const std::exception& e) {
                std::lock_guard lock(mutex_);
                job->state = "failed";
                job->error = e.what();
            }
            release();
        });
        res.status = 202;
        res.set_content(json{{"job", job->id}}.dump(), "application/json");
    }

    static void progress(int done, int total, void* user) {
        auto* job = static_cast<Job*>(user);
        job->done = done;
        job->total = total;
    }

    void post_project(const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        const auto cfg = projection_from(body);
        if (!claim(res))
            return;
        const Snapshot base = snapshot();
        start_job("project", res, [this, cfg, body, base](Job& job) {
            job.total = cfg.steps * segedit_labels_segment_count(base.labels.get());
            segedit_projections* p = nullptr;
            check(segedit_project(gen_.get(), base.image.get(), base.labels.get(), &cfg, &Session::progress, &job, &p),
                  "projection");
            auto codes = share<segedit_projections, segedit_projections_free>(p);
            std::lock_guard lock(mutex_);
            commit({base.image, base.labels, codes}, {{"action", "project"}, {"params", body}});
        });
    }

    void post_edit(const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        if (!body.contains("direction") || !body["direction"].is_object())
            throw BadRequest("edit needs a direction object {name, space, payload}");
        const double alpha = body.value("alpha", 0.0);
        const bool reproject = body.value("reproject", true);
        std::optional<std::vector<int>> segments;
        if (body.contains("segments") && !body["segments"].is_string())
            segments = body["segments"].get<std::vector<int>>();
        else if (body.contains("segments") && body["segments"].get<std::string>() != "ALL")
            throw BadRequest("segments must be \"ALL\" or a list of ids");

        segedit_direction* d = nullptr;
        check(segedit_direction_from_json(gen_.get(), body["direction"].dump().c_str(), &d), "direction");
        const Direction dir(d);
        segedit_script* s = nullptr;
        check(segedit_script_single(dir.get(), segments ? segments->data() : nullptr, segments ? segments->size() : 0,
                                    alpha, reproject ? 1 : 0, &s),
              "edit");
        std::shared_ptr<segedit_script> script(s, segedit_script_free);
        const auto cfg = projection_from(body);
        if (!claim(res))
            return;
        const Snapshot base = snapshot();
        if (!reproject && !base.codes) {
            release();
            throw BadRequest("preview edits need codes; run /api/project first");
        }
        start_job(reproject ? "edit" : "preview", res, [this, cfg, body, base, script, reproject](Job& job) {
            const auto stitch = stitch_config({});
            segedit_edit_options opts;
            segedit_edit_options_default(&opts);
            opts.threads = threads_;
            opts.quantize_between_steps = 1;
            segedit_projections* cache = nullptr;
            if (base.codes)
                check(segedit_projections_from_json(gen_.get(), projections_json(gen_.get(), base.codes.get()).c_str(),
                                                    &cache),
                      "codes");
            segedit_image* out = nullptr;
            const auto st = segedit_edit_incremental(gen_.get(), base.image.get(), base.labels.get(), script.get(),
                                                     &cfg, &stitch, &opts, &cache, &Session::progress, &job, &out);
            auto codes = share<segedit_projections, segedit_projections_free>(cache);
            check(st, "edit");
            auto image = share<segedit_image, segedit_image_free>(out);
            std::lock_guard lock(mutex_);
            if (reproject)
                commit({image, base.labels, codes}, {{"action", "edit"}, {"params", body}});
            else
                preview_ = codes;
        });
    }

    void post_refine(const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        if (!body.contains("segment"))
            throw BadRequest("refine needs a segment id");
        segedit_refine_params params;
        segedit_refine_params_default(&params);
        const int k = body["segment"].get<int>();
        params.dt = body.value("dt", params.dt);
        params.iterations = body.value("iters", params.iterations);
        params.smooth_radius = body.value("smooth_radius", params.smooth_radius);
        params.max_growth = body.value("max_growth", params.max_growth);
        if (!claim(res))
            return;
        const Snapshot base = snapshot();
        std::optional<size_t> index;
        for (size_t i = 0; base.codes && i < segedit_projections_count(base.codes.get()); ++i)
            if (segedit_projections_segment_id(base.codes.get(), i) == k)
                index = i;
        if (!index) {
            release();
            throw BadRequest("no code for segment " + std::to_string(k) + "; run /api/project first");
        }
        start_job("refine", res, [this, k, params, body, base, index](Job& job) {
            job.total = 1;
            segedit_image* r = nullptr;
            check(segedit_projections_render(gen_.get(), base.codes.get(), *index, &r), "render");
            const Image rendered(r);
            segedit_labels* out = nullptr;
            check(segedit_refine(base.labels.get(), k, base.image.get(), rendered.get(), &params, &out, nullptr),
                  "refine");
            auto labels = share<segedit_labels, segedit_labels_free>(out);
            job.done = 1;
            std::lock_guard lock(mutex_);
            commit({base.image, labels, base.codes}, {{"action", "refine"}, {"params", body}});
        });
    }

    void get_composite(const httplib::Request& req, httplib::Response& res) {
        bool poisson = true;
        if (req.has_param("poisson")) {
            const std::string v = req.get_param_value("poisson");
            if (v == "true" || v == "1")
                poisson = true;
            else if (v == "false" || v == "0")
                poisson = false;
            else
                throw BadRequest("poisson must be true or false");
        }
        SharedCodes codes;
        Snapshot base;
        {
            std::lock_guard lock(mutex_);
            base = current_;
            codes = preview_ ? preview_ : current_.codes;
        }
        if (!codes) {
            png(res, encode_image(base.image.get()));
            return;
        }
        StitchOptions so;
        so.no_poisson = !poisson;
        const auto stitch = stitch_config(so);
        segedit_image* out = nullptr;
        check(segedit_reconstruct(gen_.get(), codes.get(), base.labels.get(), base.image.get(), &stitch, &out),
              "composite");
        const Image composite(out);
        png(res, encode_image(composite.get()));
    }

    void post_undo(httplib::Response& res) {
        if (!claim(res))
            return;
        std::lock_guard lock(mutex_);
        if (undo_.empty()) {
            release();
            error(res, 409, "nothing to undo");
            return;
        }
        current_ = undo_.back();
        undo_.pop_back();
        preview_.reset();
        journal_.push_back({{"action", "undo"}});
        persist();
        release();
        res.set_content(json{{"undo_depth", undo_.size()}}.dump(), "application/json");
    }

    void get_job(int id, httplib::Response& res) {
        std::lock_guard lock(mutex_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) {
            error(res, 404, "unknown job " + std::to_string(id));
            return;
        }
        const Job& job = *it->second;
        json j = {{"id", job.id},
                  {"kind", job.kind},
                  {"state", job.state},
                  {"progress", {{"step", job.done.load()}, {"steps", job.total.load()}}}};
        if (!job.error.empty())
            j["error"] = job.error;
        res.set_content(j.dump(), "application/json");
    }

    Generator gen_;
    int threads_;
    fs::path state_dir_;
    std::mutex mutex_;
    std::atomic<bool> busy_{false};
    SharedImage original_;
    Snapshot current_;
    SharedCodes preview_;
    std::deque<Snapshot> undo_;
    json journal_ = json::array();
    std::map<int, std::shared_ptr<Job>> jobs_;
    int next_job_ = 1;
    std::thread worker_;
};

} // namespace

int cmd_serve(const ServeArgs& a, const CommonOptions& c) {
    fs::path state_dir = a.state_dir;
    if (state_dir.empty())
        if (const char* env = std::getenv("SEGEDIT_STATE_DIR"))
            state_dir = env;

    Session session(make_generator(c.generator_seed), c.threads, state_dir);
    if (!session.resume()) {
        if (a.image.empty())
            throw UsageError("--image is required unless the state directory holds a session");
        auto image = share<segedit_image, segedit_image_free>(load_image(a.image).release());
        SharedLabels labels;
        const int w = segedit_image_width(image.get()), h = segedit_image_height(image.get());
        if (!a.labels.empty()) {
            labels = share<segedit_labels, segedit_labels_free>(load_labels(a.labels, w, h).release());
        } else {
            const std::vector<std::uint8_t> ones(static_cast<size_t>(w) * h, 1);
            segedit_labels* l = nullptr;
            check(segedit_labels_create(w, h, ones.data(), &l), "labels");
            labels = share<segedit_labels, segedit_labels_free>(l);
        }
        session.start(std::move(image), std::move(labels));
    }

    // SIGINT / SIGTERM stop the server from a dedicated thread.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    httplib::Server svr;
    session.install(svr);
    // httplib defaults to SO_REUSEPORT, which silently shares a busy port.
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    int port = a.port;
    if (port == 0) {
        port = svr.bind_to_any_port(a.host);
        if (port < 0)
            throw RuntimeError(SEGEDIT_ERR_IO, "cannot bind " + a.host);
    } else if (!svr.bind_to_port(a.host, port)) {
        throw RuntimeError(SEGEDIT_ERR_IO, "cannot bind " + a.host + ":" + std::to_string(port) +
                                               " (port busy or not permitted)");
    }
    std::thread([&svr, signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        svr.stop();
    }).detach();
    std::cout << "listening on http://" << a.host << ":" << port << std::endl;
    svr.listen_after_bind();
    return 0;
}

} // namespace cli
