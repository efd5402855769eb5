#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pi_sindy.hpp"
#include "provider.hpp"

namespace pisindy {

/// Lockstep displacement/force exchange. Every frame is
///
///   magic "DDHS" | version 0x01 | kind | step u32 LE | payload bytes
///   u32 LE | payload
///
/// (14 header bytes). Payloads are IEEE-754 binary64 little-endian,
/// except ERR which carries UTF-8 text. Step numbers echo the request
/// and must increase strictly across a session.
enum class MsgKind : std::uint8_t {
    hello = 1,
    hello_ack = 2,
    disp = 3,
    force = 4,
    snapshot = 5,
    restore = 6,
    bye = 7,
    err = 8,
};

struct Message {
    MsgKind kind = MsgKind::err;
    std::uint32_t step = 0;
    std::vector<double> values; // numeric payload (every kind but err)
    std::string text;           // err payload

    bool operator==(const Message&) const = default;
};

constexpr std::size_t frame_header_bytes = 14;
constexpr std::uint8_t protocol_version = 1;

std::vector<std::uint8_t> encode_frame(const Message& msg);
Message decode_frame(const std::uint8_t* data, std::size_t len);
Message decode_frame(const std::vector<std::uint8_t>& buf);

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
};

/// Parses "host:port".
Endpoint parse_endpoint(const std::string& text);

/// Appends sent (>) and received (<) frames of one peer as hex lines.
class Transcript {
public:
    Transcript() = default;
    explicit Transcript(const std::string& path);

    void log(char direction, const std::uint8_t* data, std::size_t len);
    explicit operator bool() const { return out_.is_open(); }

private:
    std::ofstream out_;
};

struct ServerOptions {
    double timeout_s = 30.0;
    std::string transcript_path;
};

/// Serves one PiModel session per connection, one connection at a
/// time: HELLO/HELLO_ACK handshake (dof must be 1), then FORCE for
/// each DISP via a fresh ModelSession, SNAPSHOT/RESTORE/BYE echoed as
/// acks. Malformed frames, a wrong dof or a non-increasing step get an
/// ERR reply and the connection is closed.
class ModelServer {
public:
    ModelServer(PiModel model, const std::string& host, std::uint16_t port,
                ServerOptions opt = {});
    ~ModelServer();

    ModelServer(const ModelServer&) = delete;
    ModelServer& operator=(const ModelServer&) = delete;

    /// Actual bound port (useful after binding port 0).
    std::uint16_t port() const { return port_; }

    /// Accepts and handles sessions until request_stop().
    void serve_forever();

    /// Waits for one connection and handles it to completion; false if
    /// stopped before a client arrived.
    bool serve_one();

    /// Async-signal-safe stop flag; the accept loop notices promptly.
    void request_stop() { stop_.store(true); }

private:
    bool wait_for_connection(int& conn_fd);
    void handle_session(int fd);

    PiModel model_;
    ServerOptions opt_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stop_{false};
};

struct ClientOptions {
    double timeout_s = 30.0;
    std::string transcript_path;
};

/// Client side of the exchange, presenting the remote model as an
/// ordinary ForceProvider. Connects lazily on init(). Transport
/// failures, timeouts and ERR replies surface as ProviderFault.
class RemoteBraceProvider final : public ForceProvider {
public:
    RemoteBraceProvider(std::string host, std::uint16_t port,
                        ClientOptions opt = {});
    ~RemoteBraceProvider() override;

    RemoteBraceProvider(const RemoteBraceProvider&) = delete;
    RemoteBraceProvider& operator=(const RemoteBraceProvider&) = delete;

    double init(double x0) override;
    double step(double x) override;
    void snapshot() override;
    void restore() override;

    /// Graceful BYE + close; also run by the destructor.
    void bye();

private:
    void connect_and_hello();
    Message round_trip(MsgKind kind, std::vector<double> values);
    void close_now();

    std::string host_;
    std::uint16_t port_;
    ClientOptions opt_;
    int fd_ = -1;
    std::uint32_t next_step_ = 0;
    Transcript transcript_;
};

} // namespace pisindy
