#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace easteer {

struct HttpRequest {
    std::string method;
    std::string path;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;

    friend bool operator==(const HttpResponse&, const HttpResponse&) = default;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// Throws Error(Transport) when no response could be obtained.
    virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// cpp-httplib client; a fresh connection per request keeps it thread-safe.
class HttplibTransport final : public Transport {
public:
    HttplibTransport(std::string base_url, int timeout_ms);
    HttpResponse send(const HttpRequest& request) override;

private:
    std::string base_url_;
    int timeout_ms_;
};

/// Content address of a request: sha256 over method, path and body, where a
/// JSON body is first re-serialized canonically (sorted keys, no whitespace).
[[nodiscard]] std::string fixture_key(const HttpRequest& request);

struct FixtureEntry {
    HttpRequest request;
    HttpResponse response;
};

/// Content-addressed request -> response store persisted as one JSON-lines
/// file sorted by key. Thread-safe.
class FixtureStore {
public:
    FixtureStore() = default;

    /// Loads `<dir>/fixtures.jsonl`; a missing file yields an empty store.
    /// Throws StoreCorrupt on parse errors or key/content mismatch.
    static std::shared_ptr<FixtureStore> open(const std::filesystem::path& dir);

    void put(const HttpRequest& request, const HttpResponse& response);
    [[nodiscard]] std::optional<HttpResponse> find(const HttpRequest& request) const;
    [[nodiscard]] std::size_t size() const;
    void save(const std::filesystem::path& dir) const;

    static constexpr std::string_view kFileName = "fixtures.jsonl";

private:
    mutable std::mutex mu_;
    std::map<std::string, FixtureEntry> entries_;
};

/// Forwards to an inner transport and stores every exchange.
class RecordingTransport final : public Transport {
public:
    RecordingTransport(std::shared_ptr<Transport> inner, std::shared_ptr<FixtureStore> store);
    HttpResponse send(const HttpRequest& request) override;

private:
    std::shared_ptr<Transport> inner_;
    std::shared_ptr<FixtureStore> store_;
};

/// Serves stored responses only; never touches the network. Unmatched
/// requests throw FixtureMiss.
class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(std::shared_ptr<FixtureStore> store);
    HttpResponse send(const HttpRequest& request) override;

private:
    std::shared_ptr<FixtureStore> store_;
};

/// Runs an HTTP server that forwards every request to a Transport handler
/// (typically an AdapterService or a ReplayTransport).
class HttpServer {
public:
    explicit HttpServer(std::shared_ptr<Transport> handler);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port (port 0 picks a free port) and starts serving on a
    /// background thread. Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace easteer
