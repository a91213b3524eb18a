#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <string>

#include "json.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/oracle.hpp"

namespace mosaic {

/*
 * Remote oracle wire protocol, version 1: newline-delimited JSON over TCP.
 *
 *   client -> {"type":"hello","version":1}
 *   server -> {"type":"capabilities","version":1,"max_parallel":k}
 *   client -> {"type":"evaluate","id":N,"texture_png_b64":"...",
 *              "transforms":[{"distance_m":5.0,"azimuth_deg":0.0},...]}
 *   server -> {"type":"result","id":N,"scores":[...]}
 *           | {"type":"error","id":N,"message":"..."}
 *
 * Replies may arrive in any order; each carries the id of its request.
 * Unknown fields are ignored, unknown message types are protocol violations.
 * A transform where the detector finds no car must be reported as 0.0.
 */
inline constexpr int kProtocolVersion = 1;

/// Splits "host:port". Throws std::invalid_argument.
struct HostPort {
    std::string host;
    std::uint16_t port{0};
};
[[nodiscard]] HostPort parse_address(const std::string& address);

[[nodiscard]] nlohmann::json hello_message();
[[nodiscard]] nlohmann::json evaluate_message(std::uint64_t id, const std::string& texture_png_b64,
                                              std::span<const CameraTransform> transforms);

struct RemoteOptions {
    std::chrono::milliseconds request_timeout{std::chrono::minutes(5)};
    std::chrono::milliseconds connect_timeout{std::chrono::seconds(10)};
    /// Client-side cap on in-flight requests, combined with the server's max_parallel.
    std::size_t max_parallel{std::numeric_limits<std::size_t>::max()};
};

/**
 * Client side of the bridge protocol. Connects and handshakes on construction;
 * after a connection loss the next evaluate reconnects. Safe for concurrent use:
 * requests are pipelined on one connection with unique ids.
 */
class RemoteOracle final : public Oracle {
public:
    explicit RemoteOracle(std::string address, RemoteOptions options = {});
    ~RemoteOracle() override;

    RemoteOracle(const RemoteOracle&) = delete;
    RemoteOracle& operator=(const RemoteOracle&) = delete;

    std::vector<double> evaluate(const OracleQuery& query) override;
    std::size_t max_parallel() const override;
    std::string describe() const override;

    class Connection;

private:
    std::shared_ptr<Connection> connection();

    std::string address_;
    RemoteOptions options_;
    mutable std::mutex mu_;
    std::shared_ptr<Connection> conn_;
    std::size_t server_parallel_{1};
    std::uint64_t next_id_{1};
};

}  // namespace mosaic
