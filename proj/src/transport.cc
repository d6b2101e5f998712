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

#include "fdml/transport.h"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <condition_variable>
#include <list>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>

#include "fdml/errors.h"

namespace fdml {
namespace {

using boost::asio::ip::tcp;

class Writer {
 public:
  Writer() { bytes_.resize(kFrameHeaderBytes); }

  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void count(std::size_t n) {
    if (n > UINT32_MAX) throw ProtocolError("message count exceeds u32");
    u32(static_cast<std::uint32_t>(n));
  }

  std::vector<std::uint8_t> finish() && {
    const std::size_t body = bytes_.size() - kFrameHeaderBytes;
    if (body > kMaxFrameBytes) throw ProtocolError("message exceeds frame limit");
    for (int i = 0; i < 4; ++i) {
      bytes_[i] = static_cast<std::uint8_t>(body >> (8 * i));
    }
    return std::move(bytes_);
  }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> body) : body_(body) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() {
    const double v = std::bit_cast<double>(get(8));
    if (!std::isfinite(v)) throw DecodeError("non-finite real in frame");
    return v;
  }
  // A count whose elements take `element_bytes` each must fit the rest of
  // the frame; checked before allocating.
  std::uint32_t count(std::size_t element_bytes) {
    const std::uint32_t n = u32();
    if (static_cast<std::uint64_t>(n) * element_bytes > remaining()) {
      throw DecodeError("count " + std::to_string(n) + " exceeds frame payload");
    }
    return n;
  }
  std::size_t remaining() const { return body_.size() - pos_; }
  void finish() const {
    if (remaining() != 0) {
      throw DecodeError(std::to_string(remaining()) + " trailing bytes in frame");
    }
  }

 private:
  std::uint64_t get(std::size_t n) {
    if (remaining() < n) throw DecodeError("truncated frame payload");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(body_[pos_ + i]) << (8 * i);
    }
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> body_;
  std::size_t pos_ = 0;
};

struct Encoder {
  Writer& w;

  void operator()(const PushRequest& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kPushRequest));
    w.u16(m.worker);
    w.u64(m.iteration);
    w.count(m.pairs.size());
    for (const auto& [sample, value] : m.pairs) {
      w.u64(sample);
      w.f64(value);
    }
  }
  void operator()(const PushAck& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kPushAck));
    w.u64(m.iteration);
  }
  void operator()(const PullRequest& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kPullRequest));
    w.u16(m.worker);
    w.u64(m.iteration);
    w.count(m.sample_ids.size());
    for (std::uint64_t id : m.sample_ids) w.u64(id);
  }
  void operator()(const PullGrant& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kPullGrant));
    w.u64(m.iteration);
    w.count(m.sums.size());
    for (double s : m.sums) w.f64(s);
  }
  void operator()(const PullReject& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kPullReject));
    w.u64(m.iteration);
    w.u64(m.slowest);
  }
  void operator()(const ErrorReply& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kError));
    w.u16(m.code);
    w.count(m.detail.size());
    for (char c : m.detail) w.u8(static_cast<std::uint8_t>(c));
  }
  void operator()(const Hello& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kHello));
    w.u16(m.worker);
    w.u16(m.parties);
    w.u64(m.samples);
    w.u64(m.iterations);
    w.u64(m.schedule_digest);
  }
  void operator()(const Welcome& m) {
    w.u8(static_cast<std::uint8_t>(MessageTag::kWelcome));
    w.u64(m.tau);
  }
};

Message decode_body(std::span<const std::uint8_t> body) {
  Reader r(body);
  const std::uint8_t tag = r.u8();
  Message msg;
  switch (static_cast<MessageTag>(tag)) {
    case MessageTag::kPushRequest: {
      PushRequest m;
      m.worker = r.u16();
      m.iteration = r.u64();
      const std::uint32_t n = r.count(16);
      m.pairs.reserve(n);
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::uint64_t id = r.u64();
        m.pairs.emplace_back(id, r.f64());
      }
      msg = std::move(m);
      break;
    }
    case MessageTag::kPushAck:
      msg = PushAck{r.u64()};
      break;
    case MessageTag::kPullRequest: {
      PullRequest m;
      m.worker = r.u16();
      m.iteration = r.u64();
      const std::uint32_t n = r.count(8);
      m.sample_ids.reserve(n);
      for (std::uint32_t k = 0; k < n; ++k) m.sample_ids.push_back(r.u64());
      msg = std::move(m);
      break;
    }
    case MessageTag::kPullGrant: {
      PullGrant m;
      m.iteration = r.u64();
      const std::uint32_t n = r.count(8);
      m.sums.reserve(n);
      for (std::uint32_t k = 0; k < n; ++k) m.sums.push_back(r.f64());
      msg = std::move(m);
      break;
    }
    case MessageTag::kPullReject: {
      PullReject m;
      m.iteration = r.u64();
      m.slowest = r.u64();
      msg = m;
      break;
    }
    case MessageTag::kError: {
      ErrorReply m;
      m.code = r.u16();
      const std::uint32_t n = r.count(1);
      m.detail.reserve(n);
      for (std::uint32_t k = 0; k < n; ++k) {
        m.detail.push_back(static_cast<char>(r.u8()));
      }
      msg = std::move(m);
      break;
    }
    case MessageTag::kHello: {
      Hello m;
      m.worker = r.u16();
      m.parties = r.u16();
      m.samples = r.u64();
      m.iterations = r.u64();
      m.schedule_digest = r.u64();
      msg = m;
      break;
    }
    case MessageTag::kWelcome:
      msg = Welcome{r.u64()};
      break;
    default:
      throw DecodeError("unknown message tag " + std::to_string(tag));
  }
  r.finish();
  return msg;
}

void read_exact(tcp::socket& socket, std::span<std::uint8_t> out) {
  boost::asio::read(socket, boost::asio::buffer(out.data(), out.size()));
}

// Reads one frame (header included). Throws DecodeError on a bad length and
// boost::system::system_error on I/O failure.
std::vector<std::uint8_t> read_frame(tcp::socket& socket) {
  std::vector<std::uint8_t> frame(kFrameHeaderBytes);
  read_exact(socket, frame);
  const std::uint32_t body =
      frame_body_length(std::span<const std::uint8_t, 4>(frame.data(), 4));
  frame.resize(kFrameHeaderBytes + body);
  read_exact(socket, std::span(frame).subspan(kFrameHeaderBytes));
  return frame;
}

}  // namespace

MessageTag tag_of(const Message& msg) {
  return static_cast<MessageTag>(msg.index() + 1);
}

std::string describe(const Message& msg) {
  static constexpr const char* kNames[] = {"PushRequest", "PushAck",
                                           "PullRequest", "PullGrant",
                                           "PullReject",  "Error",
                                           "Hello",       "Welcome"};
  std::string out = kNames[msg.index()];
  if (const auto* e = std::get_if<ErrorReply>(&msg)) {
    out += "{code=" + std::to_string(e->code) + ", " + e->detail + "}";
  }
  return out;
}

std::vector<std::uint8_t> encode(const Message& msg) {
  Writer w;
  std::visit(Encoder{w}, msg);
  return std::move(w).finish();
}

std::uint32_t frame_body_length(std::span<const std::uint8_t, 4> header) {
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(header[i]) << (8 * i);
  if (n == 0) throw DecodeError("empty frame");
  if (n > kMaxFrameBytes) throw DecodeError("frame length " + std::to_string(n) + " over limit");
  return n;
}

Message decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < kFrameHeaderBytes + 1) throw DecodeError("truncated frame header");
  const std::uint32_t body = frame_body_length(frame.first<4>());
  if (frame.size() - kFrameHeaderBytes != body) {
    throw DecodeError("frame length " + std::to_string(body) + " disagrees with " +
                      std::to_string(frame.size() - kFrameHeaderBytes) +
                      " received bytes");
  }
  return decode_body(frame.subspan(kFrameHeaderBytes));
}

Message InProcessCarrier::exchange(const Message& request) {
  const std::vector<std::uint8_t> out = encode(request);
  if (tap_) tap_(FrameDirection::kRequest, out);
  const FrameHandler::Reply reply = handler_.handle_frame(out);
  if (tap_) tap_(FrameDirection::kReply, reply.frame);
  return decode(reply.frame);
}

struct SocketCarrier::Impl {
  boost::asio::io_context io;
  tcp::socket socket{io};
};

SocketCarrier::SocketCarrier(const std::string& host, std::uint16_t port,
                             int connect_attempts, FrameTap tap)
    : impl_(std::make_unique<Impl>()), tap_(std::move(tap)) {
  tcp::resolver resolver(impl_->io);
  boost::system::error_code ec;
  for (int attempt = 0; attempt < std::max(1, connect_attempts); ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    auto endpoints = resolver.resolve(host, std::to_string(port), ec);
    if (ec) continue;
    boost::asio::connect(impl_->socket, endpoints, ec);
    if (!ec) {
      impl_->socket.set_option(tcp::no_delay(true));
      return;
    }
  }
  throw TransportError("cannot connect to coordinator at " + host + ":" +
                       std::to_string(port) + ": " + ec.message());
}

SocketCarrier::~SocketCarrier() = default;

Message SocketCarrier::exchange(const Message& request) {
  const std::vector<std::uint8_t> out = encode(request);
  if (tap_) tap_(FrameDirection::kRequest, out);
  try {
    boost::asio::write(impl_->socket, boost::asio::buffer(out));
    const std::vector<std::uint8_t> reply = read_frame(impl_->socket);
    if (tap_) tap_(FrameDirection::kReply, reply);
    return decode(reply);
  } catch (const boost::system::system_error& e) {
    throw TransportError(std::string("coordinator connection lost: ") + e.what());
  }
}

struct SocketServer::Impl {
  FrameHandler& handler;
  boost::asio::io_context io;
  tcp::acceptor acceptor{io};
  std::uint16_t port = 0;
  std::thread accept_thread;
  std::mutex mu;
  std::list<std::shared_ptr<tcp::socket>> sockets;
  std::list<std::thread> connections;
  std::size_t open = 0;
  std::condition_variable closed;
  bool stopping = false;

  explicit Impl(FrameHandler& h) : handler(h) {}

  void serve(std::shared_ptr<tcp::socket> socket) {
    try {
      for (;;) {
        std::vector<std::uint8_t> frame;
        try {
          frame = read_frame(*socket);
        } catch (const DecodeError& e) {
          const auto reply = encode(ErrorReply{
              static_cast<std::uint16_t>(ErrorCode::kMalformedFrame), e.what()});
          boost::asio::write(*socket, boost::asio::buffer(reply));
          break;
        }
        const FrameHandler::Reply reply = handler.handle_frame(frame);
        boost::asio::write(*socket, boost::asio::buffer(reply.frame));
        if (reply.close_connection) break;
      }
    } catch (const boost::system::system_error&) {
      // Peer went away.
    }
    boost::system::error_code ignored;
    socket->shutdown(tcp::socket::shutdown_both, ignored);
    std::lock_guard lock(mu);
    --open;
    closed.notify_all();
  }

  void accept_loop() {
    for (;;) {
      auto socket = std::make_shared<tcp::socket>(io);
      boost::system::error_code ec;
      acceptor.accept(*socket, ec);
      std::lock_guard lock(mu);
      if (stopping) return;
      if (ec) continue;
      socket->set_option(tcp::no_delay(true), ec);
      sockets.push_back(socket);
      ++open;
      connections.emplace_back([this, socket] { serve(socket); });
    }
  }
};

SocketServer::SocketServer(FrameHandler& handler, const std::string& host,
                           std::uint16_t port)
    : impl_(std::make_unique<Impl>(handler)) {
  try {
    tcp::resolver resolver(impl_->io);
    const tcp::endpoint endpoint =
        resolver.resolve(host, std::to_string(port))->endpoint();
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    impl_->port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw TransportError("cannot listen on " + host + ":" +
                         std::to_string(port) + ": " + e.what());
  }
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

SocketServer::~SocketServer() { stop(); }

std::uint16_t SocketServer::port() const { return impl_->port; }

bool SocketServer::drain(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mu);
  return impl_->closed.wait_for(lock, timeout, [this] { return impl_->open == 0; });
}

void SocketServer::stop() {
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->stopping) return;
    impl_->stopping = true;
    for (auto& socket : impl_->sockets) {
      boost::system::error_code ignored;
      socket->shutdown(tcp::socket::shutdown_both, ignored);
    }
  }
  // Wake the blocking accept with a throwaway connection.
  {
    boost::asio::io_context io;
    tcp::socket poke(io);
    boost::system::error_code ignored;
    poke.connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"),
                               impl_->port),
                 ignored);
  }
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  for (auto& t : impl_->connections) t.join();
  boost::system::error_code ignored;
  impl_->acceptor.close(ignored);
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("expected HOST:PORT, got '" + text + "'");
  }
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port > 65535) throw std::out_of_range("");
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + text + "'");
  }
  return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace fdml
