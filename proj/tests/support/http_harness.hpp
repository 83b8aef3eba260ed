#pragma once

#include <chrono>
#include <memory>
#include <stdexcept>
#include <thread>

#include <httplib.h>

#include "emaint/http_api.hpp"
#include "emaint/session_service.hpp"

namespace fixture {

/// A service plus its HTTP front end on a free loopback port.
class LiveServer {
public:
    explicit LiveServer(emaint::ServiceOptions opts)
        : svc_(std::make_unique<emaint::SessionService>(std::move(opts))), api_(*svc_) {
        if (!api_.bind("127.0.0.1", 0)) throw std::runtime_error("cannot bind a test port");
        thread_ = std::thread([this] { api_.serve(); });
        for (int i = 0; i < 200 && !api_.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ~LiveServer() {
        api_.stop();
        thread_.join();
    }

    int port() const { return api_.port(); }
    emaint::SessionService& service() { return *svc_; }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port());
        c.set_read_timeout(10);
        return c;
    }

private:
    std::unique_ptr<emaint::SessionService> svc_;
    emaint::HttpApi api_;
    std::thread thread_;
};

}  // namespace fixture
