#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/annotation.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", code}, {"message", message}}.dump(), "application/json");
}

std::string annotator_from(const httplib::Request& req) {
    if (req.has_param("annotator")) return req.get_param_value("annotator");
    const auto auth = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (auth.size() > prefix.size() && auth.compare(0, prefix.size(), prefix) == 0) return auth.substr(prefix.size());
    return {};
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    return body.str();
}

}  // namespace

struct AnnotationServer::Impl {
    Impl(AnnotationStore& s, ServerOptions o) : store(s), options(std::move(o)) {}
    AnnotationStore& store;
    ServerOptions options;
    httplib::Server server;
};

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
    auto& srv = impl_->server;
    auto* impl = impl_.get();

    srv.Get("/api/tasks/next", [impl](const httplib::Request& req, httplib::Response& res) {
        const auto annotator = annotator_from(req);
        if (trim(annotator).empty()) return send_error(res, 400, "missing_annotator", "annotator id is required");
        const auto task = impl->store.next_task(annotator);
        if (!task) {
            res.status = 204;
            return;
        }
        auto body = to_json(*task);
        body["completed_by"] = impl->store.completed_by(task->task_id).size();
        res.set_content(body.dump(), "application/json");
    });

    srv.Post("/api/annotations", [impl](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::parse_error& e) {
            return send_error(res, 400, "invalid_request", std::string("body is not JSON: ") + e.what());
        }
        try {
            auto annotation = annotation_from_json(body);
            const auto token = annotator_from(req);
            if (annotation.annotator_id.empty()) annotation.annotator_id = token;
            if (!token.empty() && token != annotation.annotator_id) {
                return send_error(res, 403, "annotator_mismatch", "bearer token does not match annotator_id");
            }
            const auto status = impl->store.submit(std::move(annotation));
            res.status = status == SubmitStatus::created ? 201 : 200;
            res.set_content(json{{"status", status == SubmitStatus::created ? "created" : "duplicate"}}.dump(),
                            "application/json");
        } catch (const AnnotationError& e) {
            send_error(res, e.http_status(), e.code(), e.what());
        }
    });

    srv.Get("/api/export/coverage", [impl](const httplib::Request&, httplib::Response& res) {
        try {
            res.set_content(impl->store.export_human_coverage().coverage_csv(), "text/csv");
        } catch (const Error& e) {
            send_error(res, 409, "no_complete_tasks", e.what());
        }
    });

    srv.Get("/api/export/ratings", [impl](const httplib::Request&, httplib::Response& res) {
        try {
            res.set_content(impl->store.export_human_coverage().ratings_json().dump(), "application/json");
        } catch (const Error& e) {
            send_error(res, 409, "no_complete_tasks", e.what());
        }
    });

    srv.Get("/api/guidelines", [impl](const httplib::Request&, httplib::Response& res) {
        if (!impl->options.guidelines || !std::filesystem::exists(*impl->options.guidelines)) {
            return send_error(res, 404, "not_found", "no guidelines configured");
        }
        res.set_content(read_text(*impl->options.guidelines), "text/markdown; charset=utf-8");
    });

    if (impl->options.static_dir) {
        if (!srv.set_mount_point("/", impl->options.static_dir->string())) {
            spdlog::warn("static directory {} not found", impl->options.static_dir->string());
        }
    }

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            send_error(res, 500, "internal_error", e.what());
        } catch (...) {
            send_error(res, 500, "internal_error", "unknown error");
        }
    });
}

AnnotationServer::~AnnotationServer() { stop(); }

bool AnnotationServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int AnnotationServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool AnnotationServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void AnnotationServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace icat
