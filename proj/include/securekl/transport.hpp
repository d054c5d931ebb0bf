#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace securekl {

// ===== wire format =====
//
// Length-prefixed binary frames. 16-byte header, little-endian throughout:
//
//   offset 0  u8   version        (kWireVersion)
//   offset 1  u8   opcode
//   offset 2  u16  flags
//   offset 4  u32  session id
//   offset 8  u32  tensor id
//   offset 12 u32  payload length in bytes
//
// followed by `payload length` bytes. Ring elements travel as little-endian
// u64 words.

inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kHeaderSize = 16;

enum class Opcode : uint8_t {
    hello = 1,        // session handshake (public run parameters)
    tensor = 2,       // share distribution / generic tensor payload
    open_share = 3,   // a party's share of a value being opened
    triple_req = 4,   // party -> dealer: next correlated-randomness request
    triple_data = 5,  // dealer -> party: requested shares
};

struct FrameHeader {
    uint8_t version = kWireVersion;
    uint8_t opcode = 0;
    uint16_t flags = 0;
    uint32_t session = 0;
    uint32_t tensor = 0;
    uint32_t payload_len = 0;
};

void encode_header(const FrameHeader& h, uint8_t out[kHeaderSize]);
FrameHeader decode_header(const uint8_t in[kHeaderSize]);   // throws ProtocolDesync on bad version

/// u64 vector <-> little-endian bytes.
std::vector<uint8_t> pack_words(const std::vector<uint64_t>& words);
std::vector<uint64_t> unpack_words(const std::vector<uint8_t>& bytes);

// ===== channels =====

/// Blocking, ordered, reliable duplex byte-frame channel.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send(const FrameHeader& h, const uint8_t* payload, size_t len) = 0;
    /// Blocks until a full frame arrives. Throws TransportError if the peer
    /// is gone.
    virtual FrameHeader recv(std::vector<uint8_t>& payload) = 0;
};

/// Two connected in-memory endpoints (for in-process runs and tests).
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_inproc_pair();

// ===== TCP =====

class TcpListener {
public:
    explicit TcpListener(uint16_t port);           // binds 0.0.0.0:port (port 0 = ephemeral)
    ~TcpListener();
    uint16_t port() const { return port_; }
    std::unique_ptr<Channel> accept_one();         // blocks for one connection

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

/// Connect with retry (3 attempts, exponential backoff starting at 100ms).
std::unique_ptr<Channel> tcp_connect(const std::string& host, uint16_t port);

/// "host:port" -> pair; throws ConfigInvalid on malformed input.
std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint);

} // namespace securekl
