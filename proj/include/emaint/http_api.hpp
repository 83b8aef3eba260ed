#pragma once

// JSON-over-HTTP front end for SessionService, all routes under /api/v1,
// plus a server-sent event stream per session.

#include <memory>
#include <string>

#include "emaint/session_service.hpp"

namespace emaint {

/// HTTP status for a service error: 400 validation, 404 unknown ids,
/// 409 state conflicts, 500 I/O.
int http_status(ServiceErrorKind k);

class HttpApi {
public:
    explicit HttpApi(SessionService& service);
    ~HttpApi();

    HttpApi(const HttpApi&) = delete;
    HttpApi& operator=(const HttpApi&) = delete;

    /// Binds without serving; port 0 picks a free port. Returns false on failure.
    bool bind(const std::string& host, int port);
    int port() const;
    /// Serves until stop(); requires a successful bind().
    bool serve();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace emaint
