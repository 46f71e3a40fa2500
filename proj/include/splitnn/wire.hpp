// SPDX-License-Identifier: Apache-2.0
#pragma once

// Byte-exact wire format shared by every transport. All integers and floats
// are little-endian regardless of host order.
//
// Frame = 16-byte header + payload:
//   offset 0  magic   "SPLN"
//   offset 4  version u8   (currently 1)
//   offset 5  type    u8   (FrameType)
//   offset 6  step    u32
//   offset 10 sender  u16  (role tag)
//   offset 12 payload u32  (byte length)
//
// Tensor payload = rank u32, dims rank*u32, values numel*f32. A Weights
// payload is a back-to-back sequence of tensor payloads. A Labels payload is
// count u32 + count*u16. A Control payload is opcode u8 plus opcode-specific
// arguments.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "splitnn/error.hpp"
#include "splitnn/tensor.hpp"

namespace splitnn {

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;
inline constexpr char kMagic[4] = {'S', 'P', 'L', 'N'};

enum class FrameType : std::uint8_t {
  Activation = 1,
  Gradient = 2,
  Weights = 3,
  Logits = 4,
  Labels = 5,
  Control = 6,
};

inline const char* frame_type_name(FrameType t) {
  switch (t) {
    case FrameType::Activation: return "activation";
    case FrameType::Gradient: return "gradient";
    case FrameType::Weights: return "weights";
    case FrameType::Logits: return "logits";
    case FrameType::Labels: return "labels";
    case FrameType::Control: return "control";
  }
  return "?";
}

enum class ControlOp : std::uint8_t {
  EndEpoch = 1,
  BatchRange = 2,
  Shutdown = 3,
};

struct ControlMsg {
  ControlOp op = ControlOp::EndEpoch;
  std::uint32_t start = 0;  // BatchRange only
  std::uint32_t count = 0;  // BatchRange only

  bool operator==(const ControlMsg&) const = default;
};

struct Frame {
  FrameType type = FrameType::Control;
  std::uint32_t step = 0;
  std::uint16_t sender = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const Frame&) const = default;
  std::size_t wire_size() const { return kHeaderSize + payload.size(); }
};

// ---- little-endian primitives ----

namespace wire_detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline void put_f32(std::vector<std::uint8_t>& b, float v) {
  put_u32(b, std::bit_cast<std::uint32_t>(v));
}

inline void need(std::span<const std::uint8_t> b, std::size_t off, std::size_t n) {
  if (off + n > b.size())
    throw DecodeError(DecodeError::Kind::LengthMismatch, off,
                      "buffer ends before " + std::to_string(n) + " byte field");
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t& off) {
  need(b, off, 2);
  std::uint16_t v = static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
  off += 2;
  return v;
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t& off) {
  need(b, off, 4);
  std::uint32_t v = static_cast<std::uint32_t>(b[off]) |
                    (static_cast<std::uint32_t>(b[off + 1]) << 8) |
                    (static_cast<std::uint32_t>(b[off + 2]) << 16) |
                    (static_cast<std::uint32_t>(b[off + 3]) << 24);
  off += 4;
  return v;
}

inline float get_f32(std::span<const std::uint8_t> b, std::size_t& off) {
  return std::bit_cast<float>(get_u32(b, off));
}

}  // namespace wire_detail

// ---- tensor payloads ----

inline std::size_t tensor_payload_size(const Shape& shape) {
  return 4 + 4 * shape.size() + 4 * static_cast<std::size_t>(shape_numel(shape));
}

inline void encode_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  wire_detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape) wire_detail::put_u32(out, d);
  for (float v : t.data) wire_detail::put_f32(out, v);
}

inline Tensor decode_tensor(std::span<const std::uint8_t> b, std::size_t& off) {
  std::size_t rank_at = off;
  std::uint32_t rank = wire_detail::get_u32(b, off);
  if (rank == 0 || rank > 8)
    throw DecodeError(DecodeError::Kind::LengthMismatch, rank_at,
                      "tensor rank " + std::to_string(rank) + " outside [1,8]");
  Shape shape(rank);
  std::uint64_t numel = 1;
  for (auto& d : shape) {
    d = wire_detail::get_u32(b, off);
    numel *= d;
  }
  if (numel == 0 || numel > (1ull << 31))
    throw DecodeError(DecodeError::Kind::LengthMismatch, rank_at,
                      "tensor with " + std::to_string(numel) + " elements");
  wire_detail::need(b, off, static_cast<std::size_t>(numel) * 4);
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.data) v = wire_detail::get_f32(b, off);
  return t;
}

// ---- payload builders ----

inline std::vector<std::uint8_t> tensor_payload(const Tensor& t) {
  std::vector<std::uint8_t> p;
  p.reserve(tensor_payload_size(t.shape));
  encode_tensor(p, t);
  return p;
}

inline Tensor parse_tensor_payload(std::span<const std::uint8_t> p) {
  std::size_t off = 0;
  Tensor t = decode_tensor(p, off);
  if (off != p.size())
    throw DecodeError(DecodeError::Kind::LengthMismatch, off,
                      std::to_string(p.size() - off) + " trailing bytes after tensor");
  return t;
}

inline std::vector<std::uint8_t> weights_payload(const std::vector<Tensor>& tensors) {
  std::vector<std::uint8_t> p;
  for (const auto& t : tensors) encode_tensor(p, t);
  return p;
}

inline std::vector<Tensor> parse_weights_payload(std::span<const std::uint8_t> p) {
  std::vector<Tensor> out;
  std::size_t off = 0;
  while (off < p.size()) out.push_back(decode_tensor(p, off));
  return out;
}

inline std::vector<std::uint8_t> labels_payload(std::span<const std::uint16_t> labels) {
  std::vector<std::uint8_t> p;
  p.reserve(4 + 2 * labels.size());
  wire_detail::put_u32(p, static_cast<std::uint32_t>(labels.size()));
  for (auto y : labels) wire_detail::put_u16(p, y);
  return p;
}

inline std::vector<std::uint16_t> parse_labels_payload(std::span<const std::uint8_t> p) {
  std::size_t off = 0;
  std::uint32_t count = wire_detail::get_u32(p, off);
  std::vector<std::uint16_t> labels(count);
  for (auto& y : labels) y = wire_detail::get_u16(p, off);
  if (off != p.size())
    throw DecodeError(DecodeError::Kind::LengthMismatch, off,
                      std::to_string(p.size() - off) + " trailing bytes after labels");
  return labels;
}

inline std::vector<std::uint8_t> control_payload(const ControlMsg& m) {
  std::vector<std::uint8_t> p;
  p.push_back(static_cast<std::uint8_t>(m.op));
  if (m.op == ControlOp::BatchRange) {
    wire_detail::put_u32(p, m.start);
    wire_detail::put_u32(p, m.count);
  }
  return p;
}

inline ControlMsg parse_control_payload(std::span<const std::uint8_t> p) {
  if (p.empty())
    throw DecodeError(DecodeError::Kind::LengthMismatch, 0, "empty control payload");
  ControlMsg m;
  std::size_t off = 1;
  switch (p[0]) {
    case 1: m.op = ControlOp::EndEpoch; break;
    case 2:
      m.op = ControlOp::BatchRange;
      m.start = wire_detail::get_u32(p, off);
      m.count = wire_detail::get_u32(p, off);
      break;
    case 3: m.op = ControlOp::Shutdown; break;
    default:
      throw DecodeError(DecodeError::Kind::UnknownFrameType, 0,
                        "unknown control opcode " + std::to_string(p[0]));
  }
  if (off != p.size())
    throw DecodeError(DecodeError::Kind::LengthMismatch, off,
                      std::to_string(p.size() - off) + " trailing bytes after control");
  return m;
}

// ---- whole frames ----

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + f.payload.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(f.type));
  wire_detail::put_u32(out, f.step);
  wire_detail::put_u16(out, f.sender);
  wire_detail::put_u32(out, static_cast<std::uint32_t>(f.payload.size()));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

// Strict inverse of encode_frame over exactly one frame's bytes.
inline Frame decode_frame(std::span<const std::uint8_t> b) {
  if (b.size() < kHeaderSize)
    throw DecodeError(DecodeError::Kind::LengthMismatch, b.size(),
                      "buffer shorter than 16 byte header");
  if (std::memcmp(b.data(), kMagic, 4) != 0)
    throw DecodeError(DecodeError::Kind::BadMagic, 0, "bad magic");
  if (b[4] != kWireVersion)
    throw DecodeError(DecodeError::Kind::UnsupportedVersion, 4,
                      "version " + std::to_string(b[4]));
  if (b[5] < 1 || b[5] > 6)
    throw DecodeError(DecodeError::Kind::UnknownFrameType, 5,
                      "frame type " + std::to_string(b[5]));
  Frame f;
  f.type = static_cast<FrameType>(b[5]);
  std::size_t off = 6;
  f.step = wire_detail::get_u32(b, off);
  f.sender = wire_detail::get_u16(b, off);
  std::uint32_t plen = wire_detail::get_u32(b, off);
  if (static_cast<std::size_t>(plen) + kHeaderSize != b.size())
    throw DecodeError(DecodeError::Kind::LengthMismatch, 12,
                      "payload length " + std::to_string(plen) + " vs " +
                          std::to_string(b.size() - kHeaderSize) + " bytes present");
  f.payload.assign(b.begin() + kHeaderSize, b.end());
  return f;
}

// Convenience constructors used by the roles.

inline Frame make_tensor_frame(FrameType type, std::uint32_t step, std::uint16_t sender,
                               const Tensor& t) {
  return Frame{type, step, sender, tensor_payload(t)};
}

inline Frame make_labels_frame(std::uint32_t step, std::uint16_t sender,
                               std::span<const std::uint16_t> labels) {
  return Frame{FrameType::Labels, step, sender, labels_payload(labels)};
}

inline Frame make_weights_frame(std::uint32_t step, std::uint16_t sender,
                                const std::vector<Tensor>& tensors) {
  return Frame{FrameType::Weights, step, sender, weights_payload(tensors)};
}

inline Frame make_control_frame(std::uint32_t step, std::uint16_t sender, const ControlMsg& m) {
  return Frame{FrameType::Control, step, sender, control_payload(m)};
}

// Exact wire sizes, used by the cost predictor so that predicted bytes and
// transported bytes agree to the byte.

inline std::uint64_t tensor_frame_bytes(const Shape& shape) {
  return kHeaderSize + tensor_payload_size(shape);
}

inline std::uint64_t labels_frame_bytes(std::uint32_t count) {
  return kHeaderSize + 4 + 2ull * count;
}

inline std::uint64_t control_frame_bytes(ControlOp op) {
  return kHeaderSize + 1 + (op == ControlOp::BatchRange ? 8 : 0);
}

inline std::uint64_t weights_frame_bytes(const std::vector<Shape>& shapes) {
  std::uint64_t n = kHeaderSize;
  for (const auto& s : shapes) n += tensor_payload_size(s);
  return n;
}

}  // namespace splitnn
