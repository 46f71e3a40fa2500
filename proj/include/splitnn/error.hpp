// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splitnn {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape incompatibility; message names the layer and both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite value produced by a numeric op.
struct NumericError : Error {
  using Error::Error;
};

// Layer API misuse, e.g. backward without a prior forward.
struct ProtocolMisuse : Error {
  using Error::Error;
};

// Wire decode failure. `offset` is the byte offset of the offending field.
struct DecodeError : Error {
  enum class Kind { BadMagic, UnsupportedVersion, UnknownFrameType, LengthMismatch };

  DecodeError(Kind k, std::size_t off, const std::string& msg)
      : Error(msg + " (offset " + std::to_string(off) + ")"), kind(k), offset(off) {}

  Kind kind;
  std::size_t offset;
};

// Receive on a closed, drained channel.
struct ChannelClosed : Error {
  using Error::Error;
};

// Invalid partition plan construction input.
struct PlanError : Error {
  using Error::Error;
};

// Dataset / config file problems; message carries file and offset or line.
struct DataError : Error {
  using Error::Error;
};

// Invalid experiment configuration.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace splitnn
