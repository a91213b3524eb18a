#include "mosaic/remote_oracle.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <future>
#include <map>
#include <thread>

#include "mosaic/codec.hpp"
#include "mosaic/png_io.hpp"

namespace mosaic {

HostPort parse_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
        throw std::invalid_argument("oracle address must be host:port, got '" + address + "'");
    }
    HostPort hp;
    hp.host = address.substr(0, colon);
    if (hp.host.size() > 2 && hp.host.front() == '[' && hp.host.back() == ']') {
        hp.host = hp.host.substr(1, hp.host.size() - 2);
    }
    const std::string port = address.substr(colon + 1);
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(port, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != port.size() || value <= 0 || value > 65535) {
        throw std::invalid_argument("bad port in oracle address '" + address + "'");
    }
    hp.port = static_cast<std::uint16_t>(value);
    return hp;
}

nlohmann::json hello_message() { return {{"type", "hello"}, {"version", kProtocolVersion}}; }

nlohmann::json evaluate_message(std::uint64_t id, const std::string& texture_png_b64,
                                std::span<const CameraTransform> transforms) {
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : transforms) {
        ts.push_back({{"distance_m", t.distance_m()}, {"azimuth_deg", t.azimuth_deg()}});
    }
    return {{"type", "evaluate"},
            {"id", id},
            {"texture_png_b64", texture_png_b64},
            {"transforms", std::move(ts)}};
}

// ---------------------------------------------------------------------------

namespace {

int connect_socket(const HostPort& hp, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string port = std::to_string(hp.port);
    if (const int rc = ::getaddrinfo(hp.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
        throw OracleError(OracleErrorKind::connection,
                          "cannot resolve " + hp.host + ": " + ::gai_strerror(rc));
    }
    std::string last_error = "no addresses";
    for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last_error = std::strerror(errno);
            continue;
        }
        const int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (rc == 1) {
                int err = 0;
                socklen_t len = sizeof(err);
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
                errno = err;
            } else {
                errno = rc == 0 ? ETIMEDOUT : errno;
                rc = -1;
            }
        }
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, flags);
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            ::freeaddrinfo(found);
            return fd;
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    ::freeaddrinfo(found);
    throw OracleError(OracleErrorKind::connection,
                      "cannot connect to " + hp.host + ":" + port + ": " + last_error);
}

}  // namespace

/// One TCP connection: a writer side shared by callers and a reader thread that
/// routes replies to waiting requests by id.
class RemoteOracle::Connection {
public:
    Connection(const HostPort& hp, const RemoteOptions& options)
        : fd_(connect_socket(hp, options.connect_timeout)) {
        try {
            handshake(options.connect_timeout);
        } catch (...) {
            ::close(fd_);
            throw;
        }
        reader_ = std::jthread([this] { read_loop(); });
    }

    ~Connection() {
        ::shutdown(fd_, SHUT_RDWR);
        if (reader_.joinable()) reader_.join();
        ::close(fd_);
    }

    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    [[nodiscard]] std::size_t server_parallel() const noexcept { return server_parallel_; }

    [[nodiscard]] bool broken() const {
        std::lock_guard lock(mu_);
        return broken_;
    }

    std::vector<double> request(std::uint64_t id, const std::string& line,
                                std::chrono::milliseconds timeout) {
        std::future<std::vector<double>> reply;
        {
            std::lock_guard lock(mu_);
            if (broken_) {
                throw OracleError(OracleErrorKind::connection, "connection lost: " + broken_reason_);
            }
            reply = pending_[id].get_future();
        }
        try {
            std::lock_guard lock(write_mu_);
            send_all(line);
        } catch (const OracleError& e) {
            mark_broken(e.what());
            throw;
        }
        if (reply.wait_for(timeout) != std::future_status::ready) {
            std::unique_lock lock(mu_);
            if (pending_.erase(id) != 0) {
                lock.unlock();
                throw OracleError(OracleErrorKind::timeout,
                                  "no reply to request " + std::to_string(id) + " within " +
                                      std::to_string(timeout.count()) + " ms");
            }
        }
        return reply.get();
    }

private:
    void send_all(const std::string& line) {
        std::size_t sent = 0;
        while (sent < line.size()) {
            const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw OracleError(OracleErrorKind::connection,
                                  std::string("send failed: ") + std::strerror(errno));
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    /// Reads one line, waiting at most `timeout` overall. Used before the reader starts.
    std::string read_line_blocking(std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                throw OracleError(OracleErrorKind::timeout, "no handshake reply");
            }
            pollfd pfd{fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc == 0) continue;
            if (rc < 0 && errno == EINTR) continue;
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
            if (n <= 0) {
                throw OracleError(OracleErrorKind::connection, "connection closed during handshake");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void handshake(std::chrono::milliseconds timeout) {
        send_all(hello_message().dump() + "\n");
        const std::string line = read_line_blocking(timeout);
        nlohmann::json msg;
        try {
            msg = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw OracleError(OracleErrorKind::protocol, "handshake reply is not JSON");
        }
        if (!msg.is_object() || msg.value("type", "") != "capabilities") {
            throw OracleError(OracleErrorKind::protocol, "expected capabilities message");
        }
        if (!msg.contains("version") || !msg["version"].is_number_integer() ||
            msg["version"].get<int>() != kProtocolVersion) {
            throw OracleError(OracleErrorKind::protocol, "unsupported protocol version");
        }
        const auto& mp = msg.contains("max_parallel") ? msg["max_parallel"] : nlohmann::json(1);
        if (!mp.is_number_integer() || mp.get<long long>() < 1) {
            throw OracleError(OracleErrorKind::protocol, "max_parallel must be a positive integer");
        }
        server_parallel_ = static_cast<std::size_t>(mp.get<long long>());
    }

    void read_loop() {
        char chunk[65536];
        for (;;) {
            std::size_t nl;
            while ((nl = buffer_.find('\n')) != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                try {
                    dispatch(line);
                } catch (const nlohmann::json::exception&) {
                    fail_all(OracleError(OracleErrorKind::protocol, "ill-typed field in server message"));
                }
            }
            const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                mark_broken(n == 0 ? "closed by peer" : std::strerror(errno));
                return;
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void dispatch(const std::string& line) {
        nlohmann::json msg;
        try {
            msg = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            fail_all(OracleError(OracleErrorKind::protocol, "malformed JSON from server"));
            return;
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
            fail_all(OracleError(OracleErrorKind::protocol, "message without a type"));
            return;
        }
        const std::string type = msg["type"].get<std::string>();
        if (type == "capabilities") {
            return;
        }
        if (!msg.contains("id") || !msg["id"].is_number_unsigned()) {
            fail_all(OracleError(OracleErrorKind::protocol, "'" + type + "' message without a valid id"));
            return;
        }
        const auto id = msg["id"].get<std::uint64_t>();
        if (type == "result") {
            const auto& scores = msg.contains("scores") ? msg["scores"] : nlohmann::json();
            if (!scores.is_array()) {
                settle(id, OracleError(OracleErrorKind::protocol, "result without a scores array"));
                return;
            }
            std::vector<double> out;
            out.reserve(scores.size());
            for (const auto& s : scores) {
                if (!s.is_number()) {
                    settle(id, OracleError(OracleErrorKind::protocol, "non-numeric score"));
                    return;
                }
                out.push_back(s.get<double>());
            }
            settle(id, std::move(out));
        } else if (type == "error") {
            settle(id, OracleError(OracleErrorKind::remote, msg.value("message", std::string("unspecified"))));
        } else {
            settle(id, OracleError(OracleErrorKind::protocol, "unknown message type '" + type + "'"));
        }
    }

    template <typename Value>
    void settle(std::uint64_t id, Value&& value) {
        std::promise<std::vector<double>> p;
        {
            std::lock_guard lock(mu_);
            auto it = pending_.find(id);
            if (it == pending_.end()) {
                return;  // late reply to a timed-out request
            }
            p = std::move(it->second);
            pending_.erase(it);
        }
        if constexpr (std::is_same_v<std::decay_t<Value>, OracleError>) {
            p.set_exception(std::make_exception_ptr(value));
        } else {
            p.set_value(std::forward<Value>(value));
        }
    }

    void fail_all(const OracleError& error) {
        std::map<std::uint64_t, std::promise<std::vector<double>>> failed;
        {
            std::lock_guard lock(mu_);
            failed.swap(pending_);
        }
        for (auto& [id, p] : failed) p.set_exception(std::make_exception_ptr(error));
    }

    void mark_broken(const std::string& reason) {
        {
            std::lock_guard lock(mu_);
            if (!broken_) {
                broken_ = true;
                broken_reason_ = reason;
            }
        }
        fail_all(OracleError(OracleErrorKind::connection, "connection lost: " + reason));
    }

    int fd_;
    std::size_t server_parallel_{1};
    std::string buffer_;  // touched by the handshake, then only by the reader thread
    std::mutex write_mu_;
    mutable std::mutex mu_;
    std::map<std::uint64_t, std::promise<std::vector<double>>> pending_;
    bool broken_{false};
    std::string broken_reason_;
    std::jthread reader_;
};

// ---------------------------------------------------------------------------

RemoteOracle::RemoteOracle(std::string address, RemoteOptions options)
    : address_(std::move(address)), options_(options) {
    if (options_.max_parallel == 0) {
        throw std::invalid_argument("remote max_parallel must be >= 1");
    }
    conn_ = std::make_shared<Connection>(parse_address(address_), options_);
    server_parallel_ = conn_->server_parallel();
}

RemoteOracle::~RemoteOracle() = default;

std::shared_ptr<RemoteOracle::Connection> RemoteOracle::connection() {
    std::lock_guard lock(mu_);
    if (!conn_ || conn_->broken()) {
        conn_.reset();
        conn_ = std::make_shared<Connection>(parse_address(address_), options_);
        server_parallel_ = conn_->server_parallel();
    }
    return conn_;
}

std::size_t RemoteOracle::max_parallel() const {
    std::lock_guard lock(mu_);
    return std::min(server_parallel_, options_.max_parallel);
}

std::string RemoteOracle::describe() const { return "remote:" + address_; }

std::vector<double> RemoteOracle::evaluate(const OracleQuery& query) {
    if (query.transforms.empty()) {
        throw OracleError(OracleErrorKind::invalid_query, "query without transforms");
    }
    const std::string png = base64_encode(query.texture.encode_png());
    auto conn = connection();
    std::uint64_t id;
    {
        std::lock_guard lock(mu_);
        id = next_id_++;
    }
    const std::string line = evaluate_message(id, png, query.transforms).dump() + "\n";
    auto scores = conn->request(id, line, options_.request_timeout);
    validate_response(query, scores);
    return scores;
}

}  // namespace mosaic
