#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "mergesim/coordinator.hpp"

using namespace mergesim;

namespace {

double bits_to_double(std::uint64_t bits) {
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

bool same_bits(double a, double b) {
    std::uint64_t ba, bb;
    std::memcpy(&ba, &a, sizeof a);
    std::memcpy(&bb, &b, sizeof b);
    return ba == bb;
}

}  // namespace

TEST_SUITE("coordinator") {

TEST_CASE("first arrival takes index 1, later ones extend the queue") {
    Coordinator coord;
    CHECK(coord.admit(10, Lane::main, 0.0) == 1);
    CHECK(coord.admit(11, Lane::merging, 0.5) == 2);
    CHECK(coord.admit(12, Lane::main, 0.9) == 3);
    CHECK(coord.size() == 3);
    CHECK_THROWS_AS(coord.admit(10, Lane::main, 1.0), std::logic_error);
}

TEST_CASE("index counting includes the just-left slot") {
    Coordinator coord;
    for (VehicleId id = 1; id <= 5; ++id) coord.admit(id, Lane::main, id * 1.0);
    coord.cross_mp(1);  // 1 takes the index-0 slot
    REQUIRE(coord.entry_for(1)->index == 0);
    // four in the CZ plus index 0 -> the next arrival is number five
    CHECK(coord.admit(99, Lane::merging, 9.0) == 5);
}

TEST_CASE("crossing shifts every index and drops the previous leader") {
    Coordinator coord;
    coord.admit(1, Lane::main, 0.0);    // A
    coord.admit(2, Lane::merging, 1.0); // B
    coord.admit(3, Lane::main, 2.0);    // C
    CHECK(coord.cross_mp(1) == std::nullopt);  // nobody at index 0 yet
    REQUIRE(coord.entry_for(1)->index == 0);
    const auto dropped = coord.cross_mp(2);
    REQUIRE(dropped.has_value());
    CHECK(*dropped == 1);
    CHECK(coord.entry_for(2)->index == 0);
    CHECK(coord.entry_for(3)->index == 1);
    CHECK_FALSE(coord.contains(1));
}

TEST_CASE("singleton queue crossing leaves only the index-0 slot") {
    Coordinator coord;
    coord.admit(5, Lane::merging, 0.0);
    CHECK(coord.cross_mp(5) == std::nullopt);
    REQUIRE(coord.size() == 1);
    CHECK(coord.entry_for(5)->index == 0);
}

TEST_CASE("out-of-order crossing is logged and force-reordered") {
    Coordinator coord;
    coord.admit(1, Lane::main, 0.0);
    coord.admit(2, Lane::main, 1.0);
    coord.admit(3, Lane::merging, 2.0);
    CHECK(coord.protocol_errors() == 0);
    coord.cross_mp(3);  // index 3 jumps the queue
    CHECK(coord.protocol_errors() == 1);
    CHECK(coord.entry_for(3)->index == 0);
    CHECK(coord.entry_for(1)->index == 1);
    CHECK(coord.entry_for(2)->index == 2);
}

TEST_CASE("neighbor resolution follows lanes and queue positions") {
    Coordinator coord;
    coord.admit(1, Lane::main, 0.0);
    coord.admit(2, Lane::main, 1.0);
    coord.admit(3, Lane::merging, 2.0);

    const auto n3 = coord.resolve_neighbors(3);
    CHECK_FALSE(n3.ip.has_value());  // no merging-lane predecessor
    REQUIRE(n3.ic.has_value());
    CHECK(*n3.ic == 2);

    const auto n2 = coord.resolve_neighbors(2);
    REQUIRE(n2.ip.has_value());
    CHECK(*n2.ip == 1);
    CHECK_FALSE(n2.ic.has_value());  // index 1 is the same-lane predecessor

    const auto n1 = coord.resolve_neighbors(1);
    CHECK_FALSE(n1.ip.has_value());
    CHECK_FALSE(n1.ic.has_value());
}

TEST_CASE("video scenario ordering gives the double-constrained tail") {
    // main: 1, 2, 4; merging: 3, 5 -> vehicle 5 follows 3 and yields to 4.
    Coordinator coord;
    coord.admit(1, Lane::main, 0.0);
    coord.admit(2, Lane::main, 1.0);
    coord.admit(3, Lane::merging, 2.0);
    coord.admit(4, Lane::main, 3.0);
    coord.admit(5, Lane::merging, 4.0);

    const auto n5 = coord.resolve_neighbors(5);
    REQUIRE(n5.ip.has_value());
    CHECK(*n5.ip == 3);
    REQUIRE(n5.ic.has_value());
    CHECK(*n5.ic == 4);
}

TEST_CASE("index 0 keeps serving as a neighbor until dropped") {
    Coordinator coord;
    coord.admit(1, Lane::main, 0.0);
    coord.admit(2, Lane::main, 1.0);
    coord.cross_mp(1);
    const auto n2 = coord.resolve_neighbors(2);
    REQUIRE(n2.ip.has_value());
    CHECK(*n2.ip == 1);
}

TEST_CASE("routing reaches only the affected larger-index vehicles") {
    Coordinator coord;
    coord.admit(1, Lane::main, 0.0);
    coord.admit(2, Lane::merging, 1.0);  // conflict follower of 1
    coord.admit(3, Lane::main, 2.0);     // same-lane follower of 1

    StatePacket origin;
    origin.index = 1;
    origin.x_long = 1.4;
    origin.x_lat = 0.0;
    origin.v = 0.8;
    const auto deliveries = coord.route_update(origin);
    REQUIRE(deliveries.size() == 2);
    CHECK(deliveries[0].destination == 2);
    REQUIRE(deliveries[0].packet.ic.has_value());
    CHECK_FALSE(deliveries[0].packet.ip.has_value());
    CHECK(deliveries[0].packet.ic->x_long == 1.4);
    CHECK(deliveries[1].destination == 3);
    REQUIRE(deliveries[1].packet.ip.has_value());
    CHECK_FALSE(deliveries[1].packet.ic.has_value());

    // The tail vehicle affects nobody.
    StatePacket tail;
    tail.index = 3;
    CHECK(coord.route_update(tail).empty());
}

TEST_CASE("routing respects queue order over 10000 random histories") {
    std::mt19937_64 gen(5);
    Coordinator coord;
    VehicleId next_id = 1;
    std::uniform_int_distribution<int> op(0, 2);
    for (int step = 0; step < 10000; ++step) {
        const int what = op(gen);
        if (what <= 1 || coord.size() == 0) {
            coord.admit(next_id++, (what == 0) ? Lane::main : Lane::merging, step * 0.1);
        } else {
            const auto head = coord.entry_at_index(1);
            if (head) coord.cross_mp(head->id);
        }
        // Queue integrity: consecutive indices, unique ids.
        const auto& entries = coord.entries();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (i > 0) CHECK(entries[i].index == entries[i - 1].index + 1);
            CHECK((entries[i].index == 0 || entries[i].index >= 1));
        }
        if (!entries.empty()) {
            CHECK((entries.front().index == 0 || entries.front().index == 1));
            // Routing from a random member never reaches a smaller index.
            std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
            const QueueEntry& origin_entry = entries[pick(gen)];
            StatePacket pkt;
            pkt.index = static_cast<std::uint32_t>(origin_entry.index);
            if (origin_entry.index >= 0) {
                for (const auto& d : coord.route_update(pkt)) {
                    CHECK(coord.entry_for(d.destination)->index > origin_entry.index);
                    // Minimality: the destination's constraints reference the origin.
                    const auto n = coord.resolve_neighbors(d.destination);
                    const bool references = (n.ip && *n.ip == origin_entry.id) ||
                                            (n.ic && *n.ic == origin_entry.id);
                    CHECK(references);
                }
            }
        }
    }
    CHECK(coord.protocol_errors() == 0);
}

TEST_CASE("state packets round-trip bit-exactly") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 10000; ++trial) {
        StatePacket pkt;
        pkt.index = static_cast<std::uint32_t>(gen());
        pkt.x_long = bits_to_double(gen());
        pkt.x_lat = bits_to_double(gen());
        pkt.v = bits_to_double(gen());
        const auto bytes = encode(pkt);
        CHECK(bytes.size() == 4 + 28);
        const StatePacket back = decode_state_packet(bytes);
        CHECK(back.index == pkt.index);
        CHECK(same_bits(back.x_long, pkt.x_long));  // NaN payloads included
        CHECK(same_bits(back.x_lat, pkt.x_lat));
        CHECK(same_bits(back.v, pkt.v));
        CHECK(encode(back) == bytes);
    }
}

TEST_CASE("neighbor packets round-trip with every presence combination") {
    std::mt19937_64 gen(19);
    for (int trial = 0; trial < 10000; ++trial) {
        NeighborPacket pkt;
        if (trial % 4 == 1 || trial % 4 == 3) {
            pkt.ip = NeighborPacket::Fields{bits_to_double(gen()), bits_to_double(gen()),
                                            bits_to_double(gen())};
        }
        if (trial % 4 >= 2) {
            pkt.ic = NeighborPacket::Fields{bits_to_double(gen()), bits_to_double(gen()),
                                            bits_to_double(gen())};
        }
        const auto bytes = encode(pkt);
        CHECK(bytes.size() == 4 + 49);
        const NeighborPacket back = decode_neighbor_packet(bytes);
        CHECK(back.ip.has_value() == pkt.ip.has_value());
        CHECK(back.ic.has_value() == pkt.ic.has_value());
        if (pkt.ip) {
            CHECK(same_bits(back.ip->x_long, pkt.ip->x_long));
            CHECK(same_bits(back.ip->x_lat, pkt.ip->x_lat));
            CHECK(same_bits(back.ip->v, pkt.ip->v));
        }
        if (pkt.ic) {
            CHECK(same_bits(back.ic->x_long, pkt.ic->x_long));
            CHECK(same_bits(back.ic->v, pkt.ic->v));
        }
        CHECK(encode(back) == bytes);
    }
}

TEST_CASE("wire format is little-endian with a length prefix") {
    StatePacket pkt;
    pkt.index = 0x01020304u;
    pkt.x_long = 1.0;  // 0x3FF0000000000000
    const auto bytes = encode(pkt);
    CHECK(bytes[0] == 28);  // payload length, little-endian
    CHECK(bytes[1] == 0);
    CHECK(bytes[4] == 0x04);
    CHECK(bytes[5] == 0x03);
    CHECK(bytes[6] == 0x02);
    CHECK(bytes[7] == 0x01);
    CHECK(bytes[8] == 0x00);   // low byte of 1.0
    CHECK(bytes[15] == 0x3F);  // high byte of 1.0
}

TEST_CASE("decoders reject malformed buffers") {
    CHECK_THROWS(decode_state_packet({1, 2, 3}));
    auto bytes = encode(StatePacket{});
    bytes.pop_back();
    CHECK_THROWS(decode_state_packet(bytes));

    auto nb = encode(NeighborPacket{});
    nb[4] = 0x04;  // unknown presence bit
    CHECK_THROWS(decode_neighbor_packet(nb));
}

TEST_CASE("bus delivers through the codec in queue order") {
    Coordinator coord;
    coord.admit(1, Lane::main, 0.0);
    coord.admit(2, Lane::merging, 1.0);
    coord.admit(3, Lane::main, 2.0);
    MessageBus bus;
    StatePacket origin;
    origin.index = 1;
    origin.x_long = 0.5;
    origin.v = 0.4;
    bus.publish(coord, origin);
    CHECK(bus.published() == 1);
    CHECK(bus.delivered() == 2);
    const auto deliveries = bus.drain();
    REQUIRE(deliveries.size() == 2);
    CHECK(deliveries[0].destination == 2);
    CHECK(deliveries[1].destination == 3);
    CHECK(bus.drain().empty());
}

}  // TEST_SUITE
