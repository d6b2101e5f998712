/**
 * Copyright 2026 The FDML Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fdml {

// Worker <-> coordinator messages. Only iteration counters, sample ids and
// scalar predictions (or their sums) appear here; there is no field that
// could carry a parameter block or a raw feature.

struct PushRequest {
  std::uint16_t worker = 0;
  std::uint64_t iteration = 0;
  std::vector<std::pair<std::uint64_t, double>> pairs;  // (sample id, c)
  bool operator==(const PushRequest&) const = default;
};

struct PushAck {
  std::uint64_t iteration = 0;
  bool operator==(const PushAck&) const = default;
};

struct PullRequest {
  std::uint16_t worker = 0;
  std::uint64_t iteration = 0;
  std::vector<std::uint64_t> sample_ids;
  bool operator==(const PullRequest&) const = default;
};

struct PullGrant {
  std::uint64_t iteration = 0;
  std::vector<double> sums;
  bool operator==(const PullGrant&) const = default;
};

struct PullReject {
  std::uint64_t iteration = 0;
  std::uint64_t slowest = 0;
  bool operator==(const PullReject&) const = default;
};

enum class ErrorCode : std::uint16_t {
  kUnknownWorker = 1,
  kSampleOutOfRange = 2,
  kBadIteration = 3,
  kConfigMismatch = 4,
  kMalformedFrame = 5,
  kUnexpectedMessage = 6,
};

struct ErrorReply {
  std::uint16_t code = 0;
  std::string detail;
  bool operator==(const ErrorReply&) const = default;
};

// Session handshake sent once per connection so the coordinator can refuse
// workers configured for a different run.
struct Hello {
  std::uint16_t worker = 0;
  std::uint16_t parties = 0;
  std::uint64_t samples = 0;
  std::uint64_t iterations = 0;
  std::uint64_t schedule_digest = 0;
  bool operator==(const Hello&) const = default;
};

struct Welcome {
  std::uint64_t tau = 0;
  bool operator==(const Welcome&) const = default;
};

using Message = std::variant<PushRequest, PushAck, PullRequest, PullGrant,
                             PullReject, ErrorReply, Hello, Welcome>;

enum class MessageTag : std::uint8_t {
  kPushRequest = 1,
  kPushAck = 2,
  kPullRequest = 3,
  kPullGrant = 4,
  kPullReject = 5,
  kError = 6,
  kHello = 7,
  kWelcome = 8,
};

MessageTag tag_of(const Message& msg);
std::string describe(const Message& msg);

// Frame: [u32 LE length of everything after this field][u8 tag][payload].
// Payload fields are little-endian in declaration order; reals are IEEE-754
// binary64; counts are u32; strings are u32-length-prefixed UTF-8.
constexpr std::size_t kFrameHeaderBytes = 4;
constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

std::vector<std::uint8_t> encode(const Message& msg);

// Decodes one complete frame. Throws DecodeError on a bad tag, a length
// that disagrees with the buffer or payload, truncation, or non-finite
// reals.
Message decode(std::span<const std::uint8_t> frame);

// Reads the length prefix; throws DecodeError if it is out of bounds.
std::uint32_t frame_body_length(std::span<const std::uint8_t, 4> header);

// Something that turns one request frame into one reply frame; the
// coordinator service implements it.
class FrameHandler {
 public:
  struct Reply {
    std::vector<std::uint8_t> frame;
    bool close_connection = false;
  };

  virtual ~FrameHandler() = default;
  virtual Reply handle_frame(std::span<const std::uint8_t> request) = 0;
};

// A worker's link to the coordinator. One request outstanding at a time;
// requests from one carrier are delivered in order.
class Carrier {
 public:
  virtual ~Carrier() = default;
  virtual Message exchange(const Message& request) = 0;
};

enum class FrameDirection { kRequest, kReply };
using FrameTap =
    std::function<void(FrameDirection, std::span<const std::uint8_t>)>;

// Delivers frames to a handler in the caller's thread. Every message still
// goes through encode/decode so both carriers see identical bytes.
class InProcessCarrier : public Carrier {
 public:
  explicit InProcessCarrier(FrameHandler& handler, FrameTap tap = {})
      : handler_(handler), tap_(std::move(tap)) {}

  Message exchange(const Message& request) override;

 private:
  FrameHandler& handler_;
  FrameTap tap_;
};

// TCP client carrier (one connection per worker).
class SocketCarrier : public Carrier {
 public:
  // Tries to connect up to `connect_attempts` times, 100 ms apart. Throws
  // TransportError when every attempt is refused.
  SocketCarrier(const std::string& host, std::uint16_t port,
                int connect_attempts = 50, FrameTap tap = {});
  ~SocketCarrier() override;

  Message exchange(const Message& request) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  FrameTap tap_;
};

// TCP server: one thread per accepted connection, each reading a frame,
// handing it to the handler and writing the reply. A malformed frame gets an
// error reply and the connection is dropped.
class SocketServer {
 public:
  SocketServer(FrameHandler& handler, const std::string& host,
               std::uint16_t port);
  ~SocketServer();

  SocketServer(const SocketServer&) = delete;
  SocketServer& operator=(const SocketServer&) = delete;

  // The bound port (useful when constructed with port 0).
  std::uint16_t port() const;

  // Waits until every accepted connection has closed. False on timeout.
  bool drain(std::chrono::milliseconds timeout);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port" -> (host, port). Throws ConfigError.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text);

}  // namespace fdml
