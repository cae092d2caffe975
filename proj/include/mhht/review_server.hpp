#pragma once

// JSON-over-HTTP front of a ReviewSession. Needs cpp-httplib (httplib.h) on
// the include path and a threads library at link time.

#include "mhht/review.hpp"

#include <httplib.h>

#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace mhht {

/// Serves one session: GET /state, GET /history, POST /accept, POST /correct
/// ({"positions": [[x,y,z], ...]}), POST /seek ({"frame": f}). Mutations are
/// serialized; reads share the lock.
class ReviewServer {
public:
    explicit ReviewServer(ReviewSession& session) : session_(session) { routes(); }

    ReviewServer(ReviewServer const&) = delete;
    ReviewServer& operator=(ReviewServer const&) = delete;

    ~ReviewServer() { stop(); }

    /// Binds and serves on a background thread; port 0 picks a free one.
    int start(std::string const& host = "127.0.0.1", int port = 0) {
        port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (port_ < 0) throw std::runtime_error("review server: cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        while (!server_.is_running()) std::this_thread::yield();
        return port_;
    }

    /// Binds and serves on the calling thread until stop().
    bool run(std::string const& host, int port) { return server_.listen(host, port); }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    [[nodiscard]] int port() const { return port_; }

private:
    static void reply(httplib::Response& res, int status, Json const& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void fail(httplib::Response& res, int status, std::string const& message) {
        reply(res, status, Json{{"error", message}});
    }

    template <typename F>
    void mutate(httplib::Response& res, F&& f) {
        std::unique_lock lock(mutex_);
        try {
            f();
            reply(res, 200, state_payload(session_));
        } catch (std::out_of_range const& e) {
            fail(res, 404, e.what());
        } catch (std::logic_error const& e) {
            fail(res, 409, e.what());
        } catch (Error const& e) {
            fail(res, 400, e.what());
        } catch (Json::exception const& e) {
            fail(res, 400, std::string("malformed body: ") + e.what());
        }
    }

    void routes() {
        server_.Get("/state", [this](httplib::Request const&, httplib::Response& res) {
            std::shared_lock lock(mutex_);
            reply(res, 200, state_payload(session_));
        });
        server_.Get("/history", [this](httplib::Request const&, httplib::Response& res) {
            std::shared_lock lock(mutex_);
            reply(res, 200, history_payload(session_.history()));
        });
        server_.Post("/accept", [this](httplib::Request const&, httplib::Response& res) {
            mutate(res, [&] { session_.accept(); });
        });
        server_.Post("/correct", [this](httplib::Request const& req, httplib::Response& res) {
            mutate(res, [&] {
                auto body = Json::parse(req.body);
                auto const& raw = io_detail::field(body, "positions");
                if (!raw.is_array()) throw FormatError("positions must be an array");
                std::vector<Vec3> positions;
                for (auto const& p : raw) {
                    if (!p.is_array() || p.size() != 3) throw FormatError("each position must be [x, y, z]");
                    // null or a non-number is not a coordinate
                    for (auto const& c : p) {
                        if (!c.is_number()) throw InvalidConfig("correction has a non-finite coordinate");
                    }
                    positions.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
                }
                session_.correct(positions);
            });
        });
        server_.Post("/seek", [this](httplib::Request const& req, httplib::Response& res) {
            mutate(res, [&] {
                auto body = Json::parse(req.body);
                auto const& f = io_detail::field(body, "frame");
                if (!f.is_number_integer() || f.get<long long>() < 0) throw std::out_of_range("seek: bad frame");
                session_.seek(f.get<std::size_t>());
            });
        });
    }

    ReviewSession& session_;
    httplib::Server server_;
    std::shared_mutex mutex_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace mhht
