// Minimal TcpServices for driving endpoints by hand: records emitted
// segments and the latest timer request.
#pragma once

#include <map>
#include <vector>

#include "tracks/tcp.hpp"

namespace tracks::testing {

struct FakeHost : TcpServices {
    SimTime t = 0;
    std::vector<Segment> out;
    struct Timer {
        SimTime at;
        std::uint64_t token;
    };
    std::map<std::uint32_t, Timer> timers;
    std::vector<std::uint32_t> completed;
    Observer* obs = nullptr;

    SimTime now() const override { return t; }
    void emit(const Segment& s) override { out.push_back(s); }
    void set_timer(std::uint32_t id, SimTime at, std::uint64_t token) override { timers[id] = {at, token}; }
    void flow_completed(std::uint32_t id) override { completed.push_back(id); }
    Observer* observer() const override { return obs; }

    std::vector<Segment> take() {
        auto v = std::move(out);
        out.clear();
        return v;
    }
};

inline FlowTuple tuple_ab() { return {0x0A000001, 0x0A000002, 10000, 80}; }

}  // namespace tracks::testing
