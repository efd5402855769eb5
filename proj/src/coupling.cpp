#include "coupling.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <optional>

#include "errors.hpp"

namespace pisindy {

namespace {

constexpr std::uint8_t frame_magic[4] = {0x44, 0x44, 0x48, 0x53}; // "DDHS"
// Guards the payload allocation on decode; DOF counts are tiny.
constexpr std::uint32_t max_payload_bytes = 1u << 20;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
    }
}

double get_f64(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return std::bit_cast<double>(bits);
}

bool valid_kind(std::uint8_t kind) {
    return kind >= static_cast<std::uint8_t>(MsgKind::hello) &&
           kind <= static_cast<std::uint8_t>(MsgKind::err);
}

const char* kind_name(MsgKind kind) {
    switch (kind) {
    case MsgKind::hello: return "HELLO";
    case MsgKind::hello_ack: return "HELLO_ACK";
    case MsgKind::disp: return "DISP";
    case MsgKind::force: return "FORCE";
    case MsgKind::snapshot: return "SNAPSHOT";
    case MsgKind::restore: return "RESTORE";
    case MsgKind::bye: return "BYE";
    case MsgKind::err: return "ERR";
    }
    return "?";
}

} // namespace

std::vector<std::uint8_t> encode_frame(const Message& msg) {
    if (!valid_kind(static_cast<std::uint8_t>(msg.kind))) {
        raise(ErrorCode::malformed_frame, "unknown message kind");
    }
    std::vector<std::uint8_t> out;
    const std::size_t payload_len = msg.kind == MsgKind::err
                                        ? msg.text.size()
                                        : msg.values.size() * 8;
    out.reserve(frame_header_bytes + payload_len);
    for (std::uint8_t b : frame_magic) out.push_back(b);
    out.push_back(protocol_version);
    out.push_back(static_cast<std::uint8_t>(msg.kind));
    put_u32(out, msg.step);
    put_u32(out, static_cast<std::uint32_t>(payload_len));
    if (msg.kind == MsgKind::err) {
        out.insert(out.end(), msg.text.begin(), msg.text.end());
    } else {
        for (double v : msg.values) put_f64(out, v);
    }
    return out;
}

Message decode_frame(const std::uint8_t* data, std::size_t len) {
    if (len < frame_header_bytes) {
        raise(ErrorCode::truncated_frame,
              "frame shorter than the 14-byte header");
    }
    if (std::memcmp(data, frame_magic, 4) != 0) {
        raise(ErrorCode::bad_magic, "frame does not start with DDHS");
    }
    if (data[4] != protocol_version) {
        raise(ErrorCode::unsupported_version,
              "protocol version " + std::to_string(data[4]) +
                  " (expected " + std::to_string(protocol_version) + ")");
    }
    if (!valid_kind(data[5])) {
        raise(ErrorCode::malformed_frame,
              "unknown message kind " + std::to_string(data[5]));
    }
    Message msg;
    msg.kind = static_cast<MsgKind>(data[5]);
    msg.step = get_u32(data + 6);
    const std::uint32_t payload_len = get_u32(data + 10);
    if (payload_len > max_payload_bytes) {
        raise(ErrorCode::malformed_frame, "payload length implausibly large");
    }
    if (len < frame_header_bytes + payload_len) {
        raise(ErrorCode::truncated_frame,
              "payload shorter than the declared length");
    }
    if (len > frame_header_bytes + payload_len) {
        raise(ErrorCode::malformed_frame, "trailing bytes after payload");
    }
    const std::uint8_t* payload = data + frame_header_bytes;
    if (msg.kind == MsgKind::err) {
        msg.text.assign(reinterpret_cast<const char*>(payload), payload_len);
    } else {
        if (payload_len % 8 != 0) {
            raise(ErrorCode::malformed_frame,
                  "numeric payload length not a multiple of 8");
        }
        msg.values.resize(payload_len / 8);
        for (std::size_t i = 0; i < msg.values.size(); ++i) {
            msg.values[i] = get_f64(payload + 8 * i);
        }
    }
    return msg;
}

Message decode_frame(const std::vector<std::uint8_t>& buf) {
    return decode_frame(buf.data(), buf.size());
}

Endpoint parse_endpoint(const std::string& text) {
    const std::size_t colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 ||
        colon + 1 == text.size()) {
        raise(ErrorCode::config_error,
              "endpoint must be host:port, got '" + text + "'");
    }
    Endpoint ep;
    ep.host = text.substr(0, colon);
    const std::string port_text = text.substr(colon + 1);
    long port = 0;
    for (char c : port_text) {
        if (c < '0' || c > '9') {
            raise(ErrorCode::config_error,
                  "endpoint port must be numeric, got '" + port_text + "'");
        }
        port = port * 10 + (c - '0');
        if (port > 65535) {
            raise(ErrorCode::config_error, "endpoint port out of range");
        }
    }
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

Transcript::Transcript(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) {
        raise(ErrorCode::io_error, "cannot open transcript " + path);
    }
}

void Transcript::log(char direction, const std::uint8_t* data,
                     std::size_t len) {
    if (!out_.is_open()) return;
    static const char hex[] = "0123456789abcdef";
    std::string line;
    line.reserve(2 + 3 * len);
    line.push_back(direction);
    for (std::size_t i = 0; i < len; ++i) {
        line.push_back(' ');
        line.push_back(hex[data[i] >> 4]);
        line.push_back(hex[data[i] & 0xf]);
    }
    line.push_back('\n');
    out_ << line;
    out_.flush();
}

namespace {

void set_socket_timeout(int fd, double seconds) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(seconds);
    tv.tv_usec = static_cast<suseconds_t>(
        std::lround((seconds - static_cast<double>(tv.tv_sec)) * 1e6));
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void send_all(int fd, const std::uint8_t* data, std::size_t len) {
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            raise(ErrorCode::io_error,
                  std::string("send failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

/// Reads exactly n bytes. Returns false on a clean close before the
/// first byte; raises on timeouts and mid-buffer closes.
bool recv_exact(int fd, std::uint8_t* data, std::size_t len) {
    std::size_t got = 0;
    while (got < len) {
        const ssize_t n = ::recv(fd, data + got, len - got, 0);
        if (n == 0) {
            if (got == 0) return false;
            raise(ErrorCode::truncated_frame,
                  "peer closed mid-frame after " + std::to_string(got) +
                      " bytes");
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                raise(ErrorCode::io_error, "receive timed out");
            }
            raise(ErrorCode::io_error,
                  std::string("recv failed: ") + std::strerror(errno));
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

void write_message(int fd, const Message& msg, Transcript& transcript) {
    const std::vector<std::uint8_t> bytes = encode_frame(msg);
    transcript.log('>', bytes.data(), bytes.size());
    send_all(fd, bytes.data(), bytes.size());
}

/// Reads one frame; nullopt on a clean close between frames.
std::optional<Message> read_message(int fd, Transcript& transcript) {
    std::vector<std::uint8_t> buf(frame_header_bytes);
    if (!recv_exact(fd, buf.data(), frame_header_bytes)) {
        return std::nullopt;
    }
    const std::uint32_t payload_len = get_u32(buf.data() + 10);
    if (payload_len > max_payload_bytes) {
        transcript.log('<', buf.data(), buf.size());
        raise(ErrorCode::malformed_frame, "payload length implausibly large");
    }
    buf.resize(frame_header_bytes + payload_len);
    if (payload_len > 0 &&
        !recv_exact(fd, buf.data() + frame_header_bytes, payload_len)) {
        // recv_exact only returns false at byte zero, so this close is
        // mid-frame by definition.
        raise(ErrorCode::truncated_frame, "peer closed before the payload");
    }
    transcript.log('<', buf.data(), buf.size());
    return decode_frame(buf);
}

int open_listener(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) {
        raise(ErrorCode::io_error,
              std::string("socket failed: ") + std::strerror(errno));
    }
    const int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        raise(ErrorCode::config_error, "cannot parse address " + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        const int saved = errno;
        ::close(fd);
        raise(ErrorCode::io_error, "cannot bind " + host + ":" +
                                       std::to_string(port) + ": " +
                                       std::strerror(saved));
    }
    if (::listen(fd, 1) != 0) {
        const int saved = errno;
        ::close(fd);
        raise(ErrorCode::io_error,
              std::string("listen failed: ") + std::strerror(saved));
    }
    return fd;
}

std::uint16_t bound_port(int fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        raise(ErrorCode::io_error,
              std::string("getsockname failed: ") + std::strerror(errno));
    }
    return ntohs(addr.sin_port);
}

} // namespace

ModelServer::ModelServer(PiModel model, const std::string& host,
                         std::uint16_t port, ServerOptions opt)
    : model_(std::move(model)), opt_(std::move(opt)) {
    listen_fd_ = open_listener(host, port);
    port_ = bound_port(listen_fd_);
}

ModelServer::~ModelServer() {
    request_stop();
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

bool ModelServer::wait_for_connection(int& conn_fd) {
    while (!stop_.load()) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 100);
        if (ready < 0) {
            if (errno == EINTR) continue;
            raise(ErrorCode::io_error,
                  std::string("poll failed: ") + std::strerror(errno));
        }
        if (ready == 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            raise(ErrorCode::io_error,
                  std::string("accept failed: ") + std::strerror(errno));
        }
        conn_fd = fd;
        return true;
    }
    return false;
}

void ModelServer::serve_forever() {
    int fd = -1;
    while (wait_for_connection(fd)) {
        handle_session(fd);
    }
}

bool ModelServer::serve_one() {
    int fd = -1;
    if (!wait_for_connection(fd)) return false;
    handle_session(fd);
    return true;
}

void ModelServer::handle_session(int fd) {
    set_socket_timeout(fd, opt_.timeout_s);
    Transcript transcript(opt_.transcript_path);

    std::optional<ModelSession> session;
    bool primed = false;
    bool have_hello = false;
    std::int64_t last_step = -1;

    auto send_err = [&](std::uint32_t step, const std::string& text) {
        Message err;
        err.kind = MsgKind::err;
        err.step = step;
        err.text = text;
        try {
            write_message(fd, err, transcript);
        } catch (const Error&) {
            // Peer already gone; nothing further to report.
        }
    };

    try {
        while (true) {
            std::optional<Message> req = read_message(fd, transcript);
            if (!req) break; // connection closed between frames
            if (static_cast<std::int64_t>(req->step) <= last_step) {
                send_err(req->step, "out-of-order step");
                break;
            }
            last_step = req->step;

            if (!have_hello) {
                if (req->kind != MsgKind::hello) {
                    send_err(req->step, "expected HELLO first");
                    break;
                }
                if (req->values.size() != 1 || req->values[0] != 1.0) {
                    send_err(req->step, "unsupported dof count");
                    break;
                }
                have_hello = true;
                session.emplace(model_);
                Message ack;
                ack.kind = MsgKind::hello_ack;
                ack.step = req->step;
                ack.values = {1.0};
                write_message(fd, ack, transcript);
                continue;
            }

            if (req->kind == MsgKind::disp) {
                if (req->values.size() != 1) {
                    send_err(req->step, "DISP payload must hold one value");
                    break;
                }
                const double x = req->values[0];
                if (!std::isfinite(x)) {
                    send_err(req->step, "displacement must be finite");
                    break;
                }
                const double force =
                    primed ? session->step(x) : session->init(x);
                primed = true;
                Message reply;
                reply.kind = MsgKind::force;
                reply.step = req->step;
                reply.values = {force};
                write_message(fd, reply, transcript);
            } else if (req->kind == MsgKind::snapshot ||
                       req->kind == MsgKind::restore) {
                if (!req->values.empty()) {
                    send_err(req->step, "unexpected payload");
                    break;
                }
                if (req->kind == MsgKind::snapshot) {
                    session->snapshot();
                } else {
                    session->restore();
                }
                Message reply;
                reply.kind = req->kind;
                reply.step = req->step;
                write_message(fd, reply, transcript);
            } else if (req->kind == MsgKind::bye) {
                Message reply;
                reply.kind = MsgKind::bye;
                reply.step = req->step;
                write_message(fd, reply, transcript);
                break;
            } else {
                send_err(req->step,
                         std::string("unexpected ") + kind_name(req->kind));
                break;
            }
        }
    } catch (const Error& e) {
        send_err(last_step < 0 ? 0 : static_cast<std::uint32_t>(last_step),
                 std::string(error_code_name(e.code())) + ": " + e.what());
    }
    ::close(fd);
}

RemoteBraceProvider::RemoteBraceProvider(std::string host, std::uint16_t port,
                                         ClientOptions opt)
    : host_(std::move(host)), port_(port), opt_(std::move(opt)),
      transcript_(opt_.transcript_path) {}

RemoteBraceProvider::~RemoteBraceProvider() {
    try {
        bye();
    } catch (const Error&) {
        close_now();
    }
}

void RemoteBraceProvider::close_now() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void RemoteBraceProvider::connect_and_hello() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) {
        raise(ErrorCode::provider_fault,
              std::string("socket failed: ") + std::strerror(errno));
    }
    set_socket_timeout(fd, opt_.timeout_s);
    const int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port_);
    if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        raise(ErrorCode::provider_fault, "cannot parse address " + host_);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        const int saved = errno;
        ::close(fd);
        raise(ErrorCode::provider_fault,
              "cannot reach " + host_ + ":" + std::to_string(port_) + ": " +
                  std::strerror(saved));
    }
    fd_ = fd;
    next_step_ = 0;

    const Message ack = round_trip(MsgKind::hello, {1.0});
    if (ack.values.size() != 1 || ack.values[0] != 1.0) {
        close_now();
        raise(ErrorCode::provider_fault, "handshake returned a wrong dof");
    }
}

Message RemoteBraceProvider::round_trip(MsgKind kind,
                                        std::vector<double> values) {
    Message req;
    req.kind = kind;
    req.step = next_step_++;
    req.values = std::move(values);

    const MsgKind expected = kind == MsgKind::hello ? MsgKind::hello_ack
                             : kind == MsgKind::disp ? MsgKind::force
                                                     : kind;
    try {
        write_message(fd_, req, transcript_);
        std::optional<Message> reply = read_message(fd_, transcript_);
        if (!reply) {
            raise(ErrorCode::provider_fault,
                  "server closed the connection mid-exchange");
        }
        if (reply->kind == MsgKind::err) {
            raise(ErrorCode::provider_fault, "server error: " + reply->text);
        }
        if (reply->kind != expected || reply->step != req.step) {
            raise(ErrorCode::provider_fault,
                  std::string("expected ") + kind_name(expected) + " for step " +
                      std::to_string(req.step) + ", got " +
                      kind_name(reply->kind) + " step " +
                      std::to_string(reply->step));
        }
        return *reply;
    } catch (const Error& e) {
        close_now();
        if (e.code() == ErrorCode::provider_fault) throw;
        raise(ErrorCode::provider_fault,
              std::string(error_code_name(e.code())) + ": " + e.what());
    }
}

double RemoteBraceProvider::init(double x0) {
    if (fd_ >= 0) bye(); // restarting a session reconnects cleanly
    connect_and_hello();
    const Message reply = round_trip(MsgKind::disp, {x0});
    if (reply.values.size() != 1) {
        close_now();
        raise(ErrorCode::provider_fault, "FORCE payload must hold one value");
    }
    return reply.values[0];
}

double RemoteBraceProvider::step(double x) {
    if (fd_ < 0) {
        raise(ErrorCode::protocol_misuse, "remote brace stepped before init");
    }
    const Message reply = round_trip(MsgKind::disp, {x});
    if (reply.values.size() != 1) {
        close_now();
        raise(ErrorCode::provider_fault, "FORCE payload must hold one value");
    }
    return reply.values[0];
}

void RemoteBraceProvider::snapshot() {
    if (fd_ < 0) {
        raise(ErrorCode::protocol_misuse, "snapshot before init");
    }
    round_trip(MsgKind::snapshot, {});
}

void RemoteBraceProvider::restore() {
    if (fd_ < 0) {
        raise(ErrorCode::protocol_misuse, "restore before init");
    }
    round_trip(MsgKind::restore, {});
}

void RemoteBraceProvider::bye() {
    if (fd_ < 0) return;
    try {
        round_trip(MsgKind::bye, {});
    } catch (const Error&) {
        // A vanished peer still counts as closed.
    }
    close_now();
}

} // namespace pisindy
