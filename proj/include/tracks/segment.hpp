// Simulated TCP segment and 32-bit sequence-space helpers.
#pragma once

#include <array>
#include <cstdint>

namespace tracks {

constexpr std::uint32_t kDefaultMss = 1460;
constexpr std::uint32_t kHeaderBytes = 40;  // IPv4 + TCP, options not accounted
constexpr std::uint32_t kFakeSackWidth = 40;

// Modular sequence comparisons (RFC 1982 style).
inline bool seq_lt(std::uint32_t a, std::uint32_t b) { return static_cast<std::int32_t>(a - b) < 0; }
inline bool seq_le(std::uint32_t a, std::uint32_t b) { return static_cast<std::int32_t>(a - b) <= 0; }
inline bool seq_gt(std::uint32_t a, std::uint32_t b) { return seq_lt(b, a); }
inline bool seq_ge(std::uint32_t a, std::uint32_t b) { return seq_le(b, a); }

struct FlowTuple {
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;

    FlowTuple reversed() const { return {dst_ip, src_ip, dst_port, src_port}; }
    friend bool operator==(const FlowTuple&, const FlowTuple&) = default;
};

struct SackBlock {
    std::uint32_t left = 0;
    std::uint32_t right = 0;  // exclusive
    friend bool operator==(const SackBlock&, const SackBlock&) = default;
};

namespace tcp_flags {
constexpr std::uint8_t kSyn = 0x01;
constexpr std::uint8_t kFin = 0x02;
constexpr std::uint8_t kAck = 0x04;
}  // namespace tcp_flags

struct Segment {
    FlowTuple tuple;
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;
    std::uint8_t flags = 0;
    std::uint32_t payload_len = 0;

    bool ect = false;  // ECN-capable transport codepoint
    bool ce = false;
    bool ece = false;
    bool cwr = false;

    bool has_ts = false;
    std::uint32_t ts_val = 0;
    std::uint32_t ts_ecr = 0;

    bool sack_permitted = false;  // SYN / SYN-ACK option
    std::uint8_t sack_count = 0;
    std::array<SackBlock, 3> sack_blocks{};

    // Simulation metadata, invisible to protocol logic.
    std::uint32_t flow_id = 0;
    std::uint64_t digest = 0;       // payload content fingerprint
    bool spoofed = false;           // injected by the shim
    bool retransmission = false;
    std::uint16_t tx_window_pos = 0;  // 1-based position in the window at first send
    std::uint16_t tx_cwnd = 0;        // cwnd (segments) at first send
    std::uint64_t uid = 0;

    bool syn() const { return flags & tcp_flags::kSyn; }
    bool fin() const { return flags & tcp_flags::kFin; }
    bool has_ack() const { return flags & tcp_flags::kAck; }
    bool pure_ack() const { return has_ack() && !syn() && !fin() && payload_len == 0; }

    void add_sack(SackBlock b) {
        if (sack_count < sack_blocks.size()) sack_blocks[sack_count++] = b;
    }

    std::uint32_t wire_bytes(std::uint32_t frame_overhead = 0) const {
        return payload_len + kHeaderBytes + frame_overhead;
    }
};

}  // namespace tracks
