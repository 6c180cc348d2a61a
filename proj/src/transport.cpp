#include "easteer/transport.hpp"

#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "easteer/codec.hpp"
#include "easteer/container.hpp"
#include "easteer/errors.hpp"

namespace easteer {

using nlohmann::json;

HttplibTransport::HttplibTransport(std::string base_url, int timeout_ms)
    : base_url_(std::move(base_url)), timeout_ms_(timeout_ms) {
    if (timeout_ms_ <= 0) {
        throw Error(ErrorCode::InvalidArgument, "timeout_ms must be > 0");
    }
}

HttpResponse HttplibTransport::send(const HttpRequest& request) {
    httplib::Client client(base_url_);
    const auto timeout = std::chrono::milliseconds(timeout_ms_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Result result = request.method == "GET"
                                 ? client.Get(request.path)
                                 : client.Post(request.path, request.body, "application/json");
    if (!result) {
        throw Error(ErrorCode::Transport, request.method + " " + base_url_ + request.path + ": " +
                                              httplib::to_string(result.error()));
    }
    return {result->status, result->get_header_value("Content-Type"), result->body};
}

std::string fixture_key(const HttpRequest& request) {
    std::string body = request.body;
    if (!body.empty()) {
        auto parsed = json::parse(body, nullptr, false);
        if (!parsed.is_discarded()) {
            body = parsed.dump();
        }
    }
    return sha256_hex(request.method + "\n" + request.path + "\n" + body);
}

std::shared_ptr<FixtureStore> FixtureStore::open(const std::filesystem::path& dir) {
    auto store = std::make_shared<FixtureStore>();
    const auto file = dir / kFileName;
    if (!std::filesystem::exists(file)) {
        return store;
    }
    std::istringstream in(read_file(file));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            FixtureEntry e;
            e.request = {j.at("request").at("method").get<std::string>(), j.at("request").at("path").get<std::string>(),
                         j.at("request").at("body").get<std::string>()};
            e.response = {j.at("response").at("status").get<int>(),
                          j.at("response").at("content_type").get<std::string>(),
                          base64_decode(j.at("response").at("body_b64").get<std::string>())};
            const auto key = j.at("key").get<std::string>();
            if (key != fixture_key(e.request)) {
                throw Error(ErrorCode::StoreCorrupt, "key does not match request content");
            }
            store->entries_.emplace(key, std::move(e));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::StoreCorrupt, file.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        } catch (const Error& ex) {
            throw Error(ErrorCode::StoreCorrupt, file.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return store;
}

void FixtureStore::put(const HttpRequest& request, const HttpResponse& response) {
    std::lock_guard lock(mu_);
    entries_[fixture_key(request)] = {request, response};
}

std::optional<HttpResponse> FixtureStore::find(const HttpRequest& request) const {
    const auto key = fixture_key(request);
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second.response;
}

std::size_t FixtureStore::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

void FixtureStore::save(const std::filesystem::path& dir) const {
    std::string out;
    {
        std::lock_guard lock(mu_);
        for (const auto& [key, e] : entries_) {
            json j = {{"key", key},
                      {"request", {{"method", e.request.method}, {"path", e.request.path}, {"body", e.request.body}}},
                      {"response",
                       {{"status", e.response.status},
                        {"content_type", e.response.content_type},
                        {"body_b64", base64_encode(e.response.body)}}}};
            out += j.dump() + "\n";
        }
    }
    write_file(dir / kFileName, out);
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, std::shared_ptr<FixtureStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

HttpResponse RecordingTransport::send(const HttpRequest& request) {
    auto response = inner_->send(request);
    store_->put(request, response);
    return response;
}

ReplayTransport::ReplayTransport(std::shared_ptr<FixtureStore> store) : store_(std::move(store)) {}

HttpResponse ReplayTransport::send(const HttpRequest& request) {
    auto response = store_->find(request);
    if (!response) {
        throw Error(ErrorCode::FixtureMiss, request.method + " " + request.path + " (key " +
                                                fixture_key(request).substr(0, 12) + ") is not in the fixture store");
    }
    return *response;
}

// HttpServer ---------------------------------------------------------------------

struct HttpServer::Impl {
    std::shared_ptr<Transport> handler;
    httplib::Server server;
    std::thread thread;
};

HttpServer::HttpServer(std::shared_ptr<Transport> handler) : impl_(std::make_unique<Impl>()) {
    impl_->handler = std::move(handler);
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        HttpResponse out;
        try {
            out = impl_->handler->send({req.method, req.path, req.body});
        } catch (const Error& e) {
            json err = {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}};
            out = {e.code() == ErrorCode::FixtureMiss ? 404 : 502, "application/json", err.dump()};
        }
        res.status = out.status;
        res.set_content(out.body, out.content_type.empty() ? "application/octet-stream" : out.content_type);
    };
    impl_->server.Get(R"(/v1/.*)", forward);
    impl_->server.Post(R"(/v1/.*)", forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        throw Error(ErrorCode::Transport, "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw Error(ErrorCode::Transport, "cannot listen on " + host + ":" + std::to_string(port));
    }
}

void HttpServer::stop() {
    if (!impl_) {
        return;
    }
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

} // namespace easteer
