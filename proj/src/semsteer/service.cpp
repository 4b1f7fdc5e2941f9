#include "semsteer/service.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semsteer/corpus.hpp"
#include "semsteer/error.hpp"
#include "semsteer/pipeline.hpp"
#include "semsteer/session.hpp"
#include "semsteer/util.hpp"

namespace semsteer::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::regex kSafeName("[A-Za-z0-9_.-]+");

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::pair<int, const char*> http_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::data: return {400, "bad_request"};
    case ErrorKind::not_found: return {404, "not_found"};
    case ErrorKind::conflict: return {409, "conflict"};
    case ErrorKind::provider: return {502, "provider_failure"};
    case ErrorKind::io:
    case ErrorKind::internal: break;
    }
    return {500, "internal"};
}

json api_error(const char* code, const std::string& message, const json& detail) {
    return {{"error", {{"code", code}, {"message", message}, {"detail", detail}}}};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    try {
        return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::usage, std::string("request body is not valid JSON: ") + e.what());
    }
}

json corpus_summary(const Corpus& c) {
    json groups = json::object();
    for (const auto& [label, members] : c.reference_groups()) groups[label] = members.size();
    return {{"corpus_id", c.name()}, {"documents", c.size()}, {"groups", groups}};
}

const std::vector<std::string> kStages{"queued", "externalizing", "extending", "incorporating", "projecting", "done", "failed"};

struct Job {
    std::string job_id;
    std::string session_id;
    IncorporationConfig incorporation;
    ProjectionConfig projection;
    std::string status = "queued";
    std::vector<std::string> history{"queued"};
    json error;
    std::int64_t created_at = 0;
    std::int64_t finished_at = 0;

    json to_json() const {
        const auto idx = std::find(kStages.begin(), kStages.end(), status) - kStages.begin();
        const int completed = status == "done" ? 4 : std::clamp(static_cast<int>(idx) - 1, 0, 4);
        json j = {{"job_id", job_id},
                  {"session_id", session_id},
                  {"status", status},
                  {"history", history},
                  {"progress", {{"completed_stages", completed}, {"total_stages", 4}}},
                  {"created_at", created_at}};
        if (!error.is_null()) j["error"] = error;
        if (finished_at) j["finished_at"] = finished_at;
        return j;
    }
};

struct SessionEntry {
    std::mutex mu;
    SteeringSession session;
    std::string active_job;  // empty => none
};

} // namespace

struct Service::Impl {
    ServiceOptions opts;
    httplib::Server server;
    std::thread listener;

    std::shared_ptr<providers::Embedder> embedder;
    std::shared_ptr<providers::LlmClient> llm;

    std::mutex mu;  // guards the maps below (entries have their own locks)
    std::map<std::string, std::shared_ptr<const Corpus>> corpora;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
    std::map<std::string, std::shared_ptr<Job>> jobs;
    std::uint64_t next_job = 0;

    std::mutex queue_mu;
    std::condition_variable queue_cv;
    std::condition_variable idle_cv;
    std::deque<std::shared_ptr<Job>> queue;
    int running = 0;
    bool stopping = false;
    std::vector<std::jthread> workers;

    explicit Impl(ServiceOptions o) : opts(std::move(o)) {
        fs::create_directories(corpora_dir());
        fs::create_directories(sessions_dir());
        embedder = providers::make_embedder(opts.providers.embedding, opts.providers.cache_path, opts.transport);
        llm = steering::make_llm(opts.providers.llm, opts.transport);
        load_state();
        routes();
        for (int i = 0; i < std::max(1, opts.workers); ++i) workers.emplace_back([this] { work(); });
    }

    ~Impl() {
        {
            std::lock_guard lk(queue_mu);
            stopping = true;
        }
        queue_cv.notify_all();
        server.stop();
        if (listener.joinable()) listener.join();
        workers.clear();
    }

    fs::path corpora_dir() const { return fs::path(opts.data_dir) / "corpora"; }
    fs::path sessions_dir() const { return fs::path(opts.data_dir) / "sessions"; }

    void load_state() {
        for (const auto& e : fs::directory_iterator(corpora_dir())) {
            if (e.path().extension() != ".jsonl") continue;
            corpora[e.path().stem().string()] = std::make_shared<const Corpus>(load_corpus(e.path().string(), CorpusFormat::jsonl));
        }
        for (const auto& e : fs::directory_iterator(sessions_dir())) {
            if (e.path().extension() != ".json") continue;
            auto entry = std::make_shared<SessionEntry>();
            entry->session = load_session(e.path().string());
            sessions[entry->session.session_id] = entry;
        }
    }

    void persist(const SteeringSession& s) { save_session(s, (sessions_dir() / (s.session_id + ".json")).string()); }

    std::shared_ptr<const Corpus> corpus(const std::string& name) {
        std::lock_guard lk(mu);
        const auto it = corpora.find(name);
        if (it == corpora.end()) fail(ErrorKind::not_found, "no corpus '" + name + "'");
        return it->second;
    }

    std::shared_ptr<SessionEntry> session(const std::string& id) {
        std::lock_guard lk(mu);
        const auto it = sessions.find(id);
        if (it == sessions.end()) fail(ErrorKind::not_found, "no session '" + id + "'");
        return it->second;
    }

    // ------------------------------------------------------------ handlers

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    Handler guarded(Handler h) {
        return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const Error& e) {
                const auto [status, code] = http_code(e.kind());
                send_json(res, status, api_error(code, e.what(), e.detail()));
            } catch (const json::exception& e) {
                send_json(res, 400, api_error("bad_request", e.what(), nullptr));
            } catch (const std::exception& e) {
                send_json(res, 500, api_error("internal", e.what(), nullptr));
            }
        };
    }

    void routes() {
        server.Post("/corpora", guarded([this](const auto& req, auto& res) { post_corpus(req, res); }));
        server.Get(R"(/corpora/([^/]+))", guarded([this](const auto& req, auto& res) {
                       send_json(res, 200, corpus_summary(*corpus(req.matches[1])));
                   }));
        server.Post("/sessions", guarded([this](const auto& req, auto& res) { post_session(req, res); }));
        server.Get("/sessions", guarded([this](const auto& req, auto& res) { list_sessions(req, res); }));
        server.Get(R"(/sessions/([^/]+))", guarded([this](const auto& req, auto& res) { get_session(req, res); }));
        server.Put(R"(/sessions/([^/]+)/groups)", guarded([this](const auto& req, auto& res) { put_groups(req, res); }));
        server.Post(R"(/sessions/([^/]+)/steer)", guarded([this](const auto& req, auto& res) { post_steer(req, res); }));
        server.Get(R"(/sessions/([^/]+)/layouts/([^/]+))", guarded([this](const auto& req, auto& res) { get_layout(req, res); }));
        server.Get(R"(/jobs/([^/]+))", guarded([this](const auto& req, auto& res) { get_job(req, res); }));
        if (!opts.static_dir.empty()) server.set_mount_point("/", opts.static_dir);
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                const char* code = res.status == 404 ? "not_found" : res.status < 500 ? "bad_request" : "internal";
                res.set_content(api_error(code, fmt::format("HTTP {}", res.status), nullptr).dump(), "application/json");
            }
        });
    }

    void post_corpus(const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        Corpus c;
        if (body.contains("path")) {
            c = load_corpus(body.at("path").get<std::string>(), parse_corpus_format(body.value("format", std::string("jsonl"))));
            if (body.contains("name")) c = make_corpus(body.at("name").get<std::string>(), c.store.documents(), c.reference.labels());
        } else if (body.contains("documents")) {
            std::vector<Document> docs;
            std::map<DocId, std::string> labels;
            for (const auto& d : body.at("documents")) {
                docs.push_back({d.at("id").get<std::string>(), d.at("text").get<std::string>()});
                if (d.contains("group") && !d.at("group").is_null()) labels[docs.back().id] = d.at("group").get<std::string>();
            }
            c = make_corpus(body.value("name", std::string("corpus")), std::move(docs), std::move(labels));
        } else {
            fail(ErrorKind::usage, "POST /corpora needs \"path\" or \"documents\"");
        }
        if (!std::regex_match(c.name(), kSafeName)) fail(ErrorKind::usage, "corpus name must match [A-Za-z0-9_.-]+");
        {
            std::lock_guard lk(mu);
            if (const auto it = corpora.find(c.name()); it != corpora.end()) {
                if (to_jsonl(*it->second) != to_jsonl(c)) fail(ErrorKind::conflict, "corpus '" + c.name() + "' already exists with other content");
            } else {
                write_file_atomic((corpora_dir() / (c.name() + ".jsonl")).string(), to_jsonl(c));
                corpora[c.name()] = std::make_shared<const Corpus>(c);
            }
        }
        send_json(res, 201, corpus_summary(c));
    }

    void post_session(const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        const auto c = corpus(body.at("corpus").get<std::string>());
        const auto perspective = body.value("perspective_name", std::string());
        if (!perspective.empty() && !std::regex_match(perspective, kSafeName)) {
            fail(ErrorKind::usage, "perspective_name must match [A-Za-z0-9_.-]+");
        }
        auto entry = std::make_shared<SessionEntry>();
        {
            std::lock_guard lk(mu);
            do {
                entry->session = create_session(*c, perspective);
            } while (sessions.contains(entry->session.session_id));
            persist(entry->session);
            sessions[entry->session.session_id] = entry;
        }
        send_json(res, 201, {{"session_id", entry->session.session_id}, {"revision", entry->session.revision}});
    }

    void list_sessions(const httplib::Request& req, httplib::Response& res) {
        const auto filter = req.has_param("corpus") ? req.get_param_value("corpus") : std::string();
        std::vector<std::shared_ptr<SessionEntry>> all;
        {
            std::lock_guard lk(mu);
            for (const auto& [id, e] : sessions) all.push_back(e);
        }
        json out = json::array();
        for (const auto& e : all) {
            std::lock_guard lk(e->mu);
            if (!filter.empty() && e->session.corpus_name != filter) continue;
            out.push_back({{"session_id", e->session.session_id},
                           {"corpus", e->session.corpus_name},
                           {"perspective_name", e->session.perspective_name},
                           {"revision", e->session.revision}});
        }
        send_json(res, 200, {{"sessions", out}});
    }

    void get_session(const httplib::Request& req, httplib::Response& res) {
        const auto e = session(req.matches[1]);
        std::lock_guard lk(e->mu);
        auto body = session_to_json(e->session);
        body["active_job"] = e->active_job.empty() ? json(nullptr) : json(e->active_job);
        res.set_header("ETag", fmt::format("\"{}\"", e->session.revision));
        send_json(res, 200, body);
    }

    static std::int64_t expected_revision(const httplib::Request& req) {
        if (!req.has_header("If-Match")) fail(ErrorKind::usage, "If-Match header with the expected revision is required");
        auto v = req.get_header_value("If-Match");
        v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
        try {
            std::size_t used = 0;
            const auto r = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            fail(ErrorKind::usage, "If-Match must be an integer revision, got '" + req.get_header_value("If-Match") + "'");
        }
    }

    void put_groups(const httplib::Request& req, httplib::Response& res) {
        const auto e = session(req.matches[1]);
        const auto expected = expected_revision(req);
        const auto specs = parse_group_specs(parse_body(req));
        std::lock_guard lk(e->mu);
        if (!e->active_job.empty()) fail(ErrorKind::conflict, "a steer job is running for this session", {{"job_id", e->active_job}});
        if (e->session.revision != expected) {
            fail(ErrorKind::conflict, "revision mismatch", {{"expected", expected}, {"current", e->session.revision}});
        }
        const auto c = corpus(e->session.corpus_name);
        auto updated = e->session;
        updated.set_groups(c->store, specs, now_ms());
        persist(updated);
        e->session = std::move(updated);
        res.set_header("ETag", fmt::format("\"{}\"", e->session.revision));
        send_json(res, 200, {{"session_id", e->session.session_id}, {"revision", e->session.revision}});
    }

    void post_steer(const httplib::Request& req, httplib::Response& res) {
        const auto e = session(req.matches[1]);
        const auto body = parse_body(req);
        auto job = std::make_shared<Job>();
        job->session_id = e->session.session_id;
        if (body.contains("incorporation")) job->incorporation = body.at("incorporation").get<IncorporationConfig>();
        if (body.contains("projection")) job->projection = body.at("projection").get<ProjectionConfig>();
        validate(job->incorporation);
        validate(job->projection);
        job->created_at = now_ms();
        {
            std::lock_guard lk(e->mu);
            if (e->session.groups.empty()) fail(ErrorKind::usage, "session has no groups to steer with");
            if (!e->active_job.empty()) fail(ErrorKind::conflict, "a steer job is already running", {{"job_id", e->active_job}});
            {
                std::lock_guard lk2(mu);
                job->job_id = fmt::format("job-{}", ++next_job);
                jobs[job->job_id] = job;
            }
            e->active_job = job->job_id;
        }
        {
            std::lock_guard lk(queue_mu);
            queue.push_back(job);
        }
        queue_cv.notify_one();
        send_json(res, 202, {{"job_id", job->job_id}, {"status", "queued"}});
    }

    void get_job(const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<Job> job;
        {
            std::lock_guard lk(mu);
            const auto it = jobs.find(req.matches[1]);
            if (it == jobs.end()) fail(ErrorKind::not_found, "no job '" + std::string(req.matches[1]) + "'");
            job = it->second;
        }
        std::lock_guard lk(queue_mu);
        send_json(res, 200, job->to_json());
    }

    void get_layout(const httplib::Request& req, httplib::Response& res) {
        const auto e = session(req.matches[1]);
        const std::string name = req.matches[2];
        std::lock_guard lk(e->mu);
        const auto& s = e->session;
        const auto it = s.layouts.find(name);
        if (it == s.layouts.end()) fail(ErrorKind::not_found, "session has no layout '" + name + "'");
        std::map<DocId, GroupId> member_of;
        for (const auto& g : s.groups) {
            for (const auto& id : g.member_ids) member_of[id] = g.group_id;
        }
        json positions = json::array();
        const auto& layout = it->second;
        for (std::size_t i = 0; i < layout.ids.size(); ++i) {
            const auto& id = layout.ids[i];
            json p = {{"id", id}, {"x", layout.points[i].x}, {"y", layout.points[i].y}, {"group", nullptr}, {"augmentation", nullptr}, {"decision", nullptr}};
            if (const auto m = member_of.find(id); m != member_of.end()) p["group"] = m->second;
            if (const auto a = s.augmentations.find(id); a != s.augmentations.end()) {
                p["group"] = a->second.group_id;
                p["augmentation"] = a->second;
            }
            if (const auto d = s.extension_results.find(id); d != s.extension_results.end()) p["decision"] = d->second;
            positions.push_back(std::move(p));
        }
        send_json(res, 200, {{"name", layout.name}, {"config_used", layout.config_used}, {"source_revision", layout.source_revision},
                             {"session_revision", s.revision}, {"positions", positions}});
    }

    // ------------------------------------------------------------ jobs

    void set_status(Job& job, const std::string& status) {
        std::lock_guard lk(queue_mu);
        job.status = status;
        job.history.push_back(status);
    }

    void work() {
        for (;;) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock lk(queue_mu);
                queue_cv.wait(lk, [this] { return stopping || !queue.empty(); });
                if (stopping) return;
                job = queue.front();
                queue.pop_front();
                ++running;
            }
            run(*job);
            {
                std::lock_guard lk(queue_mu);
                --running;
            }
            idle_cv.notify_all();
        }
    }

    void run(Job& job) {
        std::shared_ptr<SessionEntry> e;
        try {
            e = session(job.session_id);
        } catch (const Error& err) {
            std::lock_guard lk(queue_mu);
            job.status = "failed";
            job.history.push_back("failed");
            job.error = api_error("not_found", err.what(), nullptr)["error"];
            return;
        }
        SteeringSession work_copy;
        {
            std::lock_guard lk(e->mu);
            work_copy = e->session;
        }
        const auto start_revision = work_copy.revision;
        json error;
        try {
            const auto c = corpus(work_copy.corpus_name);
            pipeline::run_steer(work_copy, c->store, *llm, *embedder, job.incorporation, job.projection, opts.steering,
                                [&](pipeline::Stage st) { set_status(job, pipeline::to_string(st)); });
        } catch (const Error& err) {
            auto detail = err.detail();
            if (detail.is_object() && !detail.contains("stage")) detail["stage"] = job.status;
            error = api_error(http_code(err.kind()).second, err.what(), detail)["error"];
        } catch (const std::exception& err) {
            error = api_error("internal", err.what(), {{"stage", job.status}})["error"];
        }
        {
            std::lock_guard lk(e->mu);
            // Partial extension results are kept so a retry resumes.
            if (e->session.revision == start_revision && work_copy.revision != start_revision) {
                persist(work_copy);
                e->session = std::move(work_copy);
            }
            e->active_job.clear();
        }
        std::lock_guard lk(queue_mu);
        job.finished_at = now_ms();
        if (error.is_null()) {
            job.status = "done";
        } else {
            job.status = "failed";
            job.error = error;
        }
        job.history.push_back(job.status);
    }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Service::~Service() = default;

int Service::bind() {
    int port = impl_->opts.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->opts.host);
    } else if (!impl_->server.bind_to_port(impl_->opts.host, port)) {
        port = -1;
    }
    if (port < 0) fail(ErrorKind::io, fmt::format("cannot bind {}:{}", impl_->opts.host, impl_->opts.port));
    impl_->opts.port = port;
    return port;
}

void Service::listen() {
    if (!impl_->server.listen_after_bind()) fail(ErrorKind::io, "HTTP server stopped unexpectedly");
}

int Service::start() {
    const int port = bind();
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void Service::stop() {
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

void Service::drain() {
    std::unique_lock lk(impl_->queue_mu);
    impl_->idle_cv.wait(lk, [this] { return impl_->queue.empty() && impl_->running == 0; });
}

} // namespace semsteer::service
