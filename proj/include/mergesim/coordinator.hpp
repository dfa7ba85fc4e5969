#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "mergesim/types.hpp"

namespace mergesim {

/// State update published by a vehicle after re-solving its QP:
/// (index, longitudinal position, lateral position, speed).
struct StatePacket {
    std::uint32_t index = 0;
    double x_long = 0.0;
    double x_lat = 0.0;
    double v = 0.0;

    bool operator==(const StatePacket&) const = default;
};

/// Neighbor information delivered to an affected vehicle. Each half is
/// present only when the originating vehicle plays that role for the
/// destination.
struct NeighborPacket {
    struct Fields {
        double x_long = 0.0;
        double x_lat = 0.0;
        double v = 0.0;
        bool operator==(const Fields&) const = default;
    };
    std::optional<Fields> ip;
    std::optional<Fields> ic;

    bool operator==(const NeighborPacket&) const = default;
};

// Length-prefixed little-endian codec for both packet types. Round-trips are
// bit-exact, including NaN payloads. Decoders throw std::runtime_error on
// short buffers, bad lengths or unknown presence bits.
std::vector<std::uint8_t> encode(const StatePacket& pkt);
std::vector<std::uint8_t> encode(const NeighborPacket& pkt);
StatePacket decode_state_packet(const std::vector<std::uint8_t>& buf);
NeighborPacket decode_neighbor_packet(const std::vector<std::uint8_t>& buf);

struct QueueEntry {
    int index = 0;
    VehicleId id = 0;
    Lane lane = Lane::main;
    double entry_time = 0.0;
};

struct Delivery {
    VehicleId destination;
    NeighborPacket packet;
};

/// FIFO queue over the control zone. Index 0 is the vehicle that has just
/// crossed the merging point; it stays a valid constraint target until the
/// next crossing shifts it to -1 and drops it. Indices are always a
/// consecutive range ending at the newest arrival.
class Coordinator {
public:
    /// Assigns the next FIFO index (slot 0 is reserved whether or not it is
    /// occupied, so the first arrival gets index 1). Throws std::logic_error
    /// on duplicate admission.
    int admit(VehicleId id, Lane lane, double t);

    /// Handles an MP crossing: every index decreases by one and the previous
    /// index-0 vehicle (if any) is dropped and returned. A crossing by a
    /// non-head vehicle is a FIFO violation: it is logged, the queue is
    /// reordered to put the crosser at the head, and the crossing proceeds.
    std::optional<VehicleId> cross_mp(VehicleId id);

    struct Neighbors {
        std::optional<VehicleId> ip;
        std::optional<VehicleId> ic;
    };
    /// i_p: nearest same-lane vehicle ahead (smaller index, index 0 counts
    /// until dropped). i_c: the vehicle at index i-1 when it sits in the
    /// other lane; absent when index i-1 is the same-lane predecessor.
    Neighbors resolve_neighbors(VehicleId id) const;

    /// Fans a state update out to the vehicles whose constraints reference
    /// the origin: the same-lane follower and the vehicle for which the
    /// origin is the merge conflict. Every delivery goes to a strictly larger
    /// index. Deliveries are ordered by destination index.
    std::vector<Delivery> route_update(const StatePacket& origin) const;

    const std::vector<QueueEntry>& entries() const { return entries_; }
    std::optional<QueueEntry> entry_for(VehicleId id) const;
    std::optional<QueueEntry> entry_at_index(int index) const;
    bool contains(VehicleId id) const;
    std::size_t size() const { return entries_.size(); }
    std::uint64_t protocol_errors() const { return protocol_errors_; }

    /// Lateral offset carried in packets; constant per lane in this
    /// single-lane-per-road geometry.
    static double lane_lat(Lane lane) { return lane == Lane::main ? 0.0 : 0.5; }

private:
    std::vector<QueueEntry> entries_;  // sorted by index ascending
    std::uint64_t protocol_errors_ = 0;
};

/// In-process message bus standing in for the V2I transport: packets are
/// encoded, queued per destination in origin-index order, and drained once
/// per tick. Payload bytes are exactly the wire codec above.
class MessageBus {
public:
    void publish(const Coordinator& coord, const StatePacket& origin);
    /// Drains all pending deliveries in publication order.
    std::vector<Delivery> drain();
    std::uint64_t published() const { return published_; }
    std::uint64_t delivered() const { return delivered_; }

private:
    std::deque<Delivery> pending_;
    std::uint64_t published_ = 0;
    std::uint64_t delivered_ = 0;
};

}  // namespace mergesim
