#pragma once

#include <cstdint>
#include <string_view>

#include "agentry/codec.hpp"

namespace agentry::relay {

// Store and peer-to-peer request opcodes. Requests are framed as
//   u8 version, u8 opcode, fields...
// and responses as
//   u8 version, u8 status, fields...
// inside the standard 4-byte length-delimited frame.
enum class Opcode : uint8_t {
    Register = 0x01,
    Advertise = 0x02,
    Locate = 0x03,
    PutMsg = 0x04,
    PollMsgs = 0x05,
    Close = 0x06,
    Discover = 0x07,
    ObjPut = 0x08,
    ObjGet = 0x09,
    ObjDel = 0x0A,
    Stats = 0x0B,

    // Peer-to-peer, on an entity's direct listener.
    DirectMsg = 0x20,
    Fetch = 0x21,
};

enum class Status : uint8_t {
    Ok = 0,
    AlreadyExists = 1,
    Closed = 2,
    NotFound = 3,
    UnknownEntity = 4,
    Error = 5,
};

std::string_view status_name(Status s);

// Starts a request: version + opcode. Callers append fields then frame it.
inline ByteWriter begin_request(Opcode op) {
    ByteWriter w;
    w.u8(kWireVersion);
    w.u8(static_cast<uint8_t>(op));
    return w;
}

inline ByteWriter begin_response(Status st) {
    ByteWriter w;
    w.u8(kWireVersion);
    w.u8(static_cast<uint8_t>(st));
    return w;
}

}  // namespace agentry::relay
