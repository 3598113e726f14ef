#pragma once

// Local TCP endpoint for live sessions: one SessionHandler per connection,
// each on its own thread with blocking socket I/O.

#include <sys/socket.h>

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>

#include "vwm/service/session.hpp"

namespace vwm::service {

namespace asio = boost::asio;
using asio::ip::tcp;

class ServiceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_message(tcp::socket& s, const WireMessage& m) { asio::write(s, asio::buffer(encode_frame(m))); }

/// Blocks for one frame. Throws boost::system::system_error on EOF/reset and
/// ProtocolError on a bad frame.
inline WireMessage read_message(tcp::socket& s) {
    unsigned char prefix[4];
    asio::read(s, asio::buffer(prefix));
    const auto n = decode_length(prefix);
    if (n > kMaxFrameBytes) throw ProtocolError("frame too large: " + std::to_string(n) + " bytes");
    std::string body(n, '\0');
    asio::read(s, asio::buffer(body));
    return from_json_text(body);
}

}  // namespace detail

class Server {
public:
    /// Binds immediately; port 0 asks the OS for a free port.
    Server(ServiceConfig cfg, unsigned short port, const std::string& host = "127.0.0.1")
        : cfg_(std::move(cfg)), acceptor_(ioc_) {
        try {
            const tcp::endpoint ep(asio::ip::make_address(host), port);
            acceptor_.open(ep.protocol());
            acceptor_.set_option(tcp::acceptor::reuse_address(true));
            acceptor_.bind(ep);
            acceptor_.listen();
        } catch (const boost::system::system_error& e) {
            throw ServiceError("cannot listen on " + host + ":" + std::to_string(port) + ": " + e.code().message());
        }
    }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    ~Server() {
        stop();
        std::lock_guard lock(mutex_);
        for (auto& t : threads_)
            if (t.joinable()) t.join();
    }

    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    /// Called after each connection ends, from that connection's thread.
    void on_session_end(std::function<void(const SessionHandler&)> cb) { on_end_ = std::move(cb); }

    /// Accepts connections until stop().
    void run() {
        accept_next();
        ioc_.run();
    }

    void stop() {
        if (stopped_.exchange(true)) return;
        asio::post(ioc_, [this] {
            boost::system::error_code ec;
            acceptor_.close(ec);
        });
        ioc_.stop();
        std::lock_guard lock(mutex_);
        for (auto& weak : sockets_)
            if (auto s = weak.lock()) ::shutdown(s->native_handle(), SHUT_RDWR);
    }

    int sessions_finished() const { return finished_; }

private:
    void accept_next() {
        acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec || stopped_) return;
            auto shared = std::make_shared<tcp::socket>(std::move(socket));
            const int participant = next_participant_++;
            {
                std::lock_guard lock(mutex_);
                sockets_.push_back(shared);
                threads_.emplace_back([this, shared, participant] { serve(*shared, participant); });
            }
            accept_next();
        });
    }

    void serve(tcp::socket& socket, int participant) {
        SessionHandler handler(cfg_, participant);
        try {
            while (!handler.closed()) {
                WireMessage in;
                try {
                    in = detail::read_message(socket);
                } catch (const ProtocolError& e) {
                    detail::write_message(socket, handler.reject(e.what()));
                    break;
                }
                for (const auto& reply : handler.handle(in)) detail::write_message(socket, reply);
            }
        } catch (const boost::system::system_error&) {
            // peer closed or reset
        }
        handler.disconnect();
        if (handler.finished()) ++finished_;
        boost::system::error_code ec;
        socket.shutdown(tcp::socket::shutdown_both, ec);
        socket.close(ec);
        if (on_end_) on_end_(handler);
    }

    ServiceConfig cfg_;
    asio::io_context ioc_;
    tcp::acceptor acceptor_;
    std::atomic<bool> stopped_{false};
    std::atomic<int> next_participant_{0};
    std::atomic<int> finished_{0};
    std::function<void(const SessionHandler&)> on_end_;
    std::mutex mutex_;
    std::list<std::thread> threads_;
    std::list<std::weak_ptr<tcp::socket>> sockets_;
};

/// Minimal synchronous client, used by tests and scripted replays.
class Client {
public:
    Client(const std::string& host, unsigned short port) : socket_(ioc_) {
        asio::connect(socket_, tcp::resolver(ioc_).resolve(host, std::to_string(port)));
    }

    void send(MessageType type, json payload) { detail::write_message(socket_, {type, ++seq_, std::move(payload)}); }
    void send_raw(const WireMessage& m) { detail::write_message(socket_, m); }
    WireMessage receive() { return detail::read_message(socket_); }

    /// Reads until a message of `type` arrives; returns everything read.
    std::vector<WireMessage> receive_until(MessageType type) {
        std::vector<WireMessage> out;
        do out.push_back(receive());
        while (out.back().type != type && out.back().type != MessageType::Error);
        return out;
    }

    void close() {
        boost::system::error_code ec;
        socket_.shutdown(tcp::socket::shutdown_both, ec);
        socket_.close(ec);
    }

    std::int64_t seq() const { return seq_; }

private:
    asio::io_context ioc_;
    tcp::socket socket_;
    std::int64_t seq_ = 0;
};

}  // namespace vwm::service
