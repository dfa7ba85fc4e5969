#include "mergesim/coordinator.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>

namespace mergesim {

namespace {

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    buf.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
        buf.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& buf, std::size_t at) {
    return static_cast<std::uint32_t>(buf[at]) | (static_cast<std::uint32_t>(buf[at + 1]) << 8) |
           (static_cast<std::uint32_t>(buf[at + 2]) << 16) |
           (static_cast<std::uint32_t>(buf[at + 3]) << 24);
}

double get_f64(const std::vector<std::uint8_t>& buf, std::size_t at) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(buf[at + i]) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

constexpr std::size_t kStatePayload = 4 + 3 * 8;
constexpr std::size_t kNeighborPayload = 1 + 6 * 8;

}  // namespace

std::vector<std::uint8_t> encode(const StatePacket& pkt) {
    std::vector<std::uint8_t> buf;
    buf.reserve(4 + kStatePayload);
    put_u32(buf, kStatePayload);
    put_u32(buf, pkt.index);
    put_f64(buf, pkt.x_long);
    put_f64(buf, pkt.x_lat);
    put_f64(buf, pkt.v);
    return buf;
}

std::vector<std::uint8_t> encode(const NeighborPacket& pkt) {
    std::vector<std::uint8_t> buf;
    buf.reserve(4 + kNeighborPayload);
    put_u32(buf, kNeighborPayload);
    std::uint8_t mask = 0;
    if (pkt.ip) mask |= 1;
    if (pkt.ic) mask |= 2;
    buf.push_back(mask);
    const NeighborPacket::Fields ip = pkt.ip.value_or(NeighborPacket::Fields{});
    const NeighborPacket::Fields ic = pkt.ic.value_or(NeighborPacket::Fields{});
    put_f64(buf, ip.x_long);
    put_f64(buf, ip.x_lat);
    put_f64(buf, ip.v);
    put_f64(buf, ic.x_long);
    put_f64(buf, ic.x_lat);
    put_f64(buf, ic.v);
    return buf;
}

StatePacket decode_state_packet(const std::vector<std::uint8_t>& buf) {
    if (buf.size() < 4) throw std::runtime_error("state packet: truncated length prefix");
    if (get_u32(buf, 0) != kStatePayload || buf.size() != 4 + kStatePayload) {
        throw std::runtime_error("state packet: bad length");
    }
    StatePacket pkt;
    pkt.index = get_u32(buf, 4);
    pkt.x_long = get_f64(buf, 8);
    pkt.x_lat = get_f64(buf, 16);
    pkt.v = get_f64(buf, 24);
    return pkt;
}

NeighborPacket decode_neighbor_packet(const std::vector<std::uint8_t>& buf) {
    if (buf.size() < 4) throw std::runtime_error("neighbor packet: truncated length prefix");
    if (get_u32(buf, 0) != kNeighborPayload || buf.size() != 4 + kNeighborPayload) {
        throw std::runtime_error("neighbor packet: bad length");
    }
    const std::uint8_t mask = buf[4];
    if (mask & ~0x03u) throw std::runtime_error("neighbor packet: unknown presence bits");
    NeighborPacket pkt;
    if (mask & 1) {
        pkt.ip = NeighborPacket::Fields{get_f64(buf, 5), get_f64(buf, 13), get_f64(buf, 21)};
    }
    if (mask & 2) {
        pkt.ic = NeighborPacket::Fields{get_f64(buf, 29), get_f64(buf, 37), get_f64(buf, 45)};
    }
    return pkt;
}

int Coordinator::admit(VehicleId id, Lane lane, double t) {
    if (contains(id)) {
        throw std::logic_error("admit: vehicle " + std::to_string(id) + " already queued");
    }
    const int index = entries_.empty() ? 1 : entries_.back().index + 1;
    entries_.push_back({index, id, lane, t});
    return index;
}

std::optional<VehicleId> Coordinator::cross_mp(VehicleId id) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const QueueEntry& e) { return e.id == id; });
    if (it == entries_.end()) throw std::logic_error("cross_mp: vehicle not queued");
    if (it->index < 1) throw std::logic_error("cross_mp: vehicle already past the MP");

    if (it->index != 1) {
        // FIFO violation: a vehicle overtook the queue head. Log it and force
        // the crosser to the head so indices stay consistent.
        ++protocol_errors_;
        QueueEntry crosser = *it;
        entries_.erase(it);
        auto head = std::find_if(entries_.begin(), entries_.end(),
                                 [](const QueueEntry& e) { return e.index >= 1; });
        for (auto fix = head; fix != entries_.end(); ++fix) ++fix->index;
        crosser.index = 1;
        entries_.insert(head, crosser);
    }

    std::optional<VehicleId> dropped;
    for (auto& e : entries_) --e.index;
    if (!entries_.empty() && entries_.front().index == -1) {
        dropped = entries_.front().id;
        entries_.erase(entries_.begin());
    }
    return dropped;
}

Coordinator::Neighbors Coordinator::resolve_neighbors(VehicleId id) const {
    Neighbors out;
    const auto self = entry_for(id);
    if (!self) return out;
    for (const auto& e : entries_) {
        if (e.index >= self->index) break;
        if (e.lane == self->lane) out.ip = e.id;  // entries ascend, keep the nearest
    }
    const auto ahead = entry_at_index(self->index - 1);
    if (ahead && ahead->lane != self->lane) out.ic = ahead->id;
    return out;
}

std::vector<Delivery> Coordinator::route_update(const StatePacket& origin) const {
    const auto origin_entry = entry_at_index(static_cast<int>(origin.index));
    if (!origin_entry) throw std::logic_error("route_update: origin index not queued");

    std::vector<Delivery> out;
    NeighborPacket::Fields fields{origin.x_long, origin.x_lat, origin.v};

    // The vehicle merging right after the origin, from the other road.
    std::optional<Delivery> conflict;
    const auto next = entry_at_index(origin_entry->index + 1);
    if (next && next->lane != origin_entry->lane) {
        NeighborPacket pkt;
        pkt.ic = fields;
        conflict = Delivery{next->id, pkt};
    }
    // The nearest same-lane follower.
    std::optional<Delivery> follower;
    for (const auto& e : entries_) {
        if (e.index <= origin_entry->index || e.lane != origin_entry->lane) continue;
        NeighborPacket pkt;
        pkt.ip = fields;
        follower = Delivery{e.id, pkt};
        break;
    }

    const auto index_of = [&](const Delivery& d) { return entry_for(d.destination)->index; };
    if (conflict) out.push_back(*conflict);
    if (follower) {
        if (out.empty() || index_of(*follower) > index_of(out.front())) {
            out.push_back(*follower);
        } else {
            out.insert(out.begin(), *follower);
        }
    }
    return out;
}

std::optional<QueueEntry> Coordinator::entry_for(VehicleId id) const {
    for (const auto& e : entries_) {
        if (e.id == id) return e;
    }
    return std::nullopt;
}

std::optional<QueueEntry> Coordinator::entry_at_index(int index) const {
    for (const auto& e : entries_) {
        if (e.index == index) return e;
    }
    return std::nullopt;
}

bool Coordinator::contains(VehicleId id) const { return entry_for(id).has_value(); }

void MessageBus::publish(const Coordinator& coord, const StatePacket& origin) {
    ++published_;
    for (const auto& d : coord.route_update(origin)) {
        // Run the payload through the wire codec so delivered bytes are
        // exactly what a transport would carry.
        const NeighborPacket decoded = decode_neighbor_packet(encode(d.packet));
        pending_.push_back({d.destination, decoded});
        ++delivered_;
    }
}

std::vector<Delivery> MessageBus::drain() {
    std::vector<Delivery> out(pending_.begin(), pending_.end());
    pending_.clear();
    return out;
}

}  // namespace mergesim
