#include "securekl/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "securekl/errors.hpp"

namespace securekl {

void encode_header(const FrameHeader& h, uint8_t out[kHeaderSize]) {
    auto put32 = [&](size_t off, uint32_t v) {
        out[off + 0] = uint8_t(v);
        out[off + 1] = uint8_t(v >> 8);
        out[off + 2] = uint8_t(v >> 16);
        out[off + 3] = uint8_t(v >> 24);
    };
    out[0] = h.version;
    out[1] = h.opcode;
    out[2] = uint8_t(h.flags);
    out[3] = uint8_t(h.flags >> 8);
    put32(4, h.session);
    put32(8, h.tensor);
    put32(12, h.payload_len);
}

FrameHeader decode_header(const uint8_t in[kHeaderSize]) {
    auto get32 = [&](size_t off) {
        return uint32_t(in[off]) | uint32_t(in[off + 1]) << 8 | uint32_t(in[off + 2]) << 16 |
               uint32_t(in[off + 3]) << 24;
    };
    FrameHeader h;
    h.version = in[0];
    if (h.version != kWireVersion) {
        throw ProtocolDesync("wire version " + std::to_string(int(h.version)) + " != " +
                             std::to_string(int(kWireVersion)));
    }
    h.opcode = in[1];
    h.flags = uint16_t(in[2]) | uint16_t(uint16_t(in[3]) << 8);
    h.session = get32(4);
    h.tensor = get32(8);
    h.payload_len = get32(12);
    return h;
}

std::vector<uint8_t> pack_words(const std::vector<uint64_t>& words) {
    std::vector<uint8_t> out(words.size() * 8);
    for (size_t i = 0; i < words.size(); ++i) {
        uint64_t w = words[i];
        for (int b = 0; b < 8; ++b) out[i * 8 + b] = uint8_t(w >> (8 * b));
    }
    return out;
}

std::vector<uint64_t> unpack_words(const std::vector<uint8_t>& bytes) {
    if (bytes.size() % 8 != 0) throw TransportError("word payload not a multiple of 8 bytes");
    std::vector<uint64_t> out(bytes.size() / 8);
    for (size_t i = 0; i < out.size(); ++i) {
        uint64_t w = 0;
        for (int b = 0; b < 8; ++b) w |= uint64_t(bytes[i * 8 + b]) << (8 * b);
        out[i] = w;
    }
    return out;
}

// ===== in-process channel =====

namespace {

struct InProcQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::vector<uint8_t>> frames;  // header || payload
    bool closed = false;

    void push(std::vector<uint8_t> f) {
        {
            std::lock_guard<std::mutex> lk(mu);
            frames.push_back(std::move(f));
        }
        cv.notify_one();
    }

    std::vector<uint8_t> pop() {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return !frames.empty() || closed; });
        if (frames.empty()) throw TransportError("in-process peer closed");
        auto f = std::move(frames.front());
        frames.pop_front();
        return f;
    }

    void close() {
        {
            std::lock_guard<std::mutex> lk(mu);
            closed = true;
        }
        cv.notify_all();
    }
};

class InProcChannel : public Channel {
public:
    InProcChannel(std::shared_ptr<InProcQueue> tx, std::shared_ptr<InProcQueue> rx)
        : tx_(std::move(tx)), rx_(std::move(rx)) {}

    ~InProcChannel() override { tx_->close(); }

    void send(const FrameHeader& h, const uint8_t* payload, size_t len) override {
        FrameHeader hh = h;
        hh.payload_len = static_cast<uint32_t>(len);
        std::vector<uint8_t> f(kHeaderSize + len);
        encode_header(hh, f.data());
        if (len) std::memcpy(f.data() + kHeaderSize, payload, len);
        tx_->push(std::move(f));
    }

    FrameHeader recv(std::vector<uint8_t>& payload) override {
        auto f = rx_->pop();
        if (f.size() < kHeaderSize) throw TransportError("short in-process frame");
        FrameHeader h = decode_header(f.data());
        if (f.size() != kHeaderSize + h.payload_len) throw TransportError("in-process frame length lies");
        payload.assign(f.begin() + kHeaderSize, f.end());
        return h;
    }

private:
    std::shared_ptr<InProcQueue> tx_, rx_;
};

} // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_inproc_pair() {
    auto a = std::make_shared<InProcQueue>();
    auto b = std::make_shared<InProcQueue>();
    return {std::make_unique<InProcChannel>(a, b), std::make_unique<InProcChannel>(b, a)};
}

// ===== TCP =====

namespace {

void full_write(int fd, const uint8_t* p, size_t n) {
    while (n > 0) {
        ssize_t k = ::write(fd, p, n);
        if (k < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("write: ") + std::strerror(errno));
        }
        p += k;
        n -= static_cast<size_t>(k);
    }
}

void full_read(int fd, uint8_t* p, size_t n) {
    while (n > 0) {
        ssize_t k = ::read(fd, p, n);
        if (k == 0) throw TransportError("peer closed connection");
        if (k < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("read: ") + std::strerror(errno));
        }
        p += k;
        n -= static_cast<size_t>(k);
    }
}

class TcpChannel : public Channel {
public:
    explicit TcpChannel(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }

    ~TcpChannel() override {
        if (fd_ >= 0) ::close(fd_);
    }

    void send(const FrameHeader& h, const uint8_t* payload, size_t len) override {
        FrameHeader hh = h;
        hh.payload_len = static_cast<uint32_t>(len);
        uint8_t hdr[kHeaderSize];
        encode_header(hh, hdr);
        full_write(fd_, hdr, kHeaderSize);
        if (len) full_write(fd_, payload, len);
    }

    FrameHeader recv(std::vector<uint8_t>& payload) override {
        uint8_t hdr[kHeaderSize];
        full_read(fd_, hdr, kHeaderSize);
        FrameHeader h = decode_header(hdr);
        payload.resize(h.payload_len);
        if (h.payload_len) full_read(fd_, payload.data(), h.payload_len);
        return h;
    }

private:
    int fd_;
};

} // namespace

TcpListener::TcpListener(uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        throw TransportError("bind :" + std::to_string(port) + ": " + std::strerror(errno));
    }
    if (::listen(fd_, 4) < 0) throw TransportError(std::string("listen: ") + std::strerror(errno));
    socklen_t alen = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept_one() {
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) throw TransportError(std::string("accept: ") + std::strerror(errno));
    return std::make_unique<TcpChannel>(cfd);
}

std::unique_ptr<Channel> tcp_connect(const std::string& host, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        // only numeric IPv4 plus "localhost" are supported
        if (host == "localhost") {
            ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        } else {
            throw ConfigInvalid("unsupported host (use a numeric IPv4 address): " + host);
        }
    }
    int backoff_ms = 100;
    std::string last_err;
    for (int attempt = 0; attempt < 3; ++attempt) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
            return std::make_unique<TcpChannel>(fd);
        }
        last_err = std::strerror(errno);
        ::close(fd);
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
    }
    throw TransportError("connect " + host + ":" + std::to_string(port) +
                         " failed after 3 attempts: " + last_err);
}

std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint) {
    auto colon = endpoint.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= endpoint.size()) {
        throw ConfigInvalid("endpoint must be host:port, got '" + endpoint + "'");
    }
    int port = 0;
    try {
        port = std::stoi(endpoint.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigInvalid("bad port in endpoint '" + endpoint + "'");
    }
    if (port <= 0 || port > 65535) throw ConfigInvalid("port out of range in '" + endpoint + "'");
    return {endpoint.substr(0, colon), static_cast<uint16_t>(port)};
}

} // namespace securekl
