// SPDX-License-Identifier: Apache-2.0
#pragma once

// Duplex frame channels between roles with two bindings: an in-process byte
// queue and real loopback TCP. Both move encoded bytes (never in-memory
// tensors), charge both ledgers at send time, and feed the same transcript,
// so byte accounting and recorded traffic are binding-independent.
//
// The whole system is single-threaded: roles are stepped in a deterministic
// order, and a receive only happens after the matching send. The TCP binding
// therefore keeps a userspace backlog per endpoint and drains every backlog
// whenever some receive is starved, which makes progress without threads even
// when kernel socket buffers fill up.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "splitnn/error.hpp"
#include "splitnn/ledger.hpp"
#include "splitnn/wire.hpp"

namespace splitnn {

struct TranscriptEntry {
  std::string from, to;
  Frame frame;
};
using Transcript = std::vector<TranscriptEntry>;

class Fabric;

// One side of a duplex link. send() encodes, charges both roles' ledgers and
// records the transcript entry before handing bytes to the binding.
class Endpoint {
 public:
  Endpoint(std::string self, std::string peer, ResourceLedger* self_ledger,
           ResourceLedger* peer_ledger, Transcript* transcript)
      : self_(std::move(self)),
        peer_(std::move(peer)),
        self_ledger_(self_ledger),
        peer_ledger_(peer_ledger),
        transcript_(transcript) {}
  virtual ~Endpoint() = default;

  const std::string& self() const { return self_; }
  const std::string& peer() const { return peer_; }

  void send(const Frame& f) {
    std::vector<std::uint8_t> bytes = encode_frame(f);
    self_ledger_->add_sent(f.type, bytes.size());
    peer_ledger_->add_received(f.type, bytes.size());
    if (transcript_) transcript_->push_back({self_, peer_, f});
    send_bytes(std::move(bytes));
  }

  Frame receive() { return decode_frame(receive_bytes()); }

  virtual void close() = 0;

 protected:
  virtual void send_bytes(std::vector<std::uint8_t> bytes) = 0;
  virtual std::vector<std::uint8_t> receive_bytes() = 0;

 private:
  std::string self_, peer_;
  ResourceLedger* self_ledger_;
  ResourceLedger* peer_ledger_;
  Transcript* transcript_;
};

using EndpointPtr = std::unique_ptr<Endpoint>;

// Creates linked endpoint pairs; concrete fabrics pick the binding.
class Fabric {
 public:
  Fabric(LedgerSet& ledgers, Transcript* transcript)
      : ledgers_(&ledgers), transcript_(transcript) {}
  virtual ~Fabric() = default;

  // Duplex link between roles a and b; first endpoint belongs to a.
  virtual std::pair<EndpointPtr, EndpointPtr> link(const std::string& a,
                                                   const std::string& b) = 0;

  LedgerSet& ledgers() { return *ledgers_; }
  Transcript* transcript() { return transcript_; }

 protected:
  LedgerSet* ledgers_;
  Transcript* transcript_;
};

// ---- in-process binding ----

namespace transport_detail {

struct ByteQueue {
  std::deque<std::vector<std::uint8_t>> frames;
  bool closed = false;
};

}  // namespace transport_detail

class InProcEndpoint final : public Endpoint {
 public:
  InProcEndpoint(std::string self, std::string peer, ResourceLedger* sl, ResourceLedger* pl,
                 Transcript* tr, std::shared_ptr<transport_detail::ByteQueue> out,
                 std::shared_ptr<transport_detail::ByteQueue> in)
      : Endpoint(std::move(self), std::move(peer), sl, pl, tr),
        out_(std::move(out)),
        in_(std::move(in)) {}

  void close() override {
    out_->closed = true;
    in_->closed = true;
  }

 protected:
  void send_bytes(std::vector<std::uint8_t> bytes) override {
    if (out_->closed) throw ChannelClosed("send on closed channel " + self() + "->" + peer());
    out_->frames.push_back(std::move(bytes));
  }
  std::vector<std::uint8_t> receive_bytes() override {
    if (in_->frames.empty()) {
      if (in_->closed)
        throw ChannelClosed("receive on closed channel " + peer() + "->" + self());
      // single-threaded: an empty queue can never fill while we wait
      throw ProtocolMisuse("receive on empty channel " + peer() + "->" + self());
    }
    auto bytes = std::move(in_->frames.front());
    in_->frames.pop_front();
    return bytes;
  }

 private:
  std::shared_ptr<transport_detail::ByteQueue> out_, in_;
};

class InProcFabric final : public Fabric {
 public:
  using Fabric::Fabric;
  std::pair<EndpointPtr, EndpointPtr> link(const std::string& a,
                                           const std::string& b) override {
    auto ab = std::make_shared<transport_detail::ByteQueue>();
    auto ba = std::make_shared<transport_detail::ByteQueue>();
    auto ea = std::make_unique<InProcEndpoint>(a, b, &ledgers_->at(a), &ledgers_->at(b),
                                               transcript_, ab, ba);
    auto eb = std::make_unique<InProcEndpoint>(b, a, &ledgers_->at(b), &ledgers_->at(a),
                                               transcript_, ba, ab);
    return {std::move(ea), std::move(eb)};
  }
};

// ---- tcp binding ----

class TcpFabric;

class TcpEndpoint final : public Endpoint {
 public:
  TcpEndpoint(std::string self, std::string peer, ResourceLedger* sl, ResourceLedger* pl,
              Transcript* tr, int fd, TcpFabric* fabric);
  ~TcpEndpoint() override;

  void close() override;

  // Pushes backlog bytes into the socket; returns false when blocked again.
  bool try_flush() {
    while (!backlog_.empty()) {
      ssize_t n = ::send(fd_, backlog_.data() + backlog_off_,
                         backlog_.size() - backlog_off_, MSG_NOSIGNAL);
      if (n > 0) {
        backlog_off_ += static_cast<std::size_t>(n);
        if (backlog_off_ == backlog_.size()) {
          backlog_.clear();
          backlog_off_ = 0;
        }
        continue;
      }
      if (errno == EAGAIN || errno == EWOULDBLOCK) return false;
      throw ChannelClosed("tcp send " + self() + "->" + peer() + ": " +
                          std::strerror(errno));
    }
    return true;
  }

 protected:
  void send_bytes(std::vector<std::uint8_t> bytes) override {
    if (fd_ < 0) throw ChannelClosed("send on closed channel " + self() + "->" + peer());
    backlog_.insert(backlog_.end(), bytes.begin(), bytes.end());
    try_flush();
  }

  std::vector<std::uint8_t> receive_bytes() override;

 private:
  bool frame_ready(std::size_t* total) const {
    if (rbuf_.size() < kHeaderSize) return false;
    std::uint32_t plen = static_cast<std::uint32_t>(rbuf_[12]) |
                         (static_cast<std::uint32_t>(rbuf_[13]) << 8) |
                         (static_cast<std::uint32_t>(rbuf_[14]) << 16) |
                         (static_cast<std::uint32_t>(rbuf_[15]) << 24);
    *total = kHeaderSize + plen;
    return rbuf_.size() >= *total;
  }

  int fd_ = -1;
  TcpFabric* fabric_;
  std::vector<std::uint8_t> backlog_;  // userspace send queue
  std::size_t backlog_off_ = 0;
  std::vector<std::uint8_t> rbuf_;     // receive accumulator
};

class TcpFabric final : public Fabric {
 public:
  // port 0 binds ephemeral loopback ports; a nonzero base allocates
  // base, base+1, ... per link.
  explicit TcpFabric(LedgerSet& ledgers, Transcript* transcript,
                     const std::string& host = "127.0.0.1", std::uint16_t port_base = 0)
      : Fabric(ledgers, transcript), host_(host), port_base_(port_base) {}

  std::pair<EndpointPtr, EndpointPtr> link(const std::string& a,
                                           const std::string& b) override {
    auto [fa, fb] = connected_pair();
    auto ea = std::make_unique<TcpEndpoint>(a, b, &ledgers_->at(a), &ledgers_->at(b),
                                            transcript_, fa, this);
    auto eb = std::make_unique<TcpEndpoint>(b, a, &ledgers_->at(b), &ledgers_->at(a),
                                            transcript_, fb, this);
    return {std::move(ea), std::move(eb)};
  }

  void register_endpoint(TcpEndpoint* e) { endpoints_.push_back(e); }
  void unregister_endpoint(TcpEndpoint* e) {
    std::erase(endpoints_, e);
  }

  // Drain every endpoint's backlog; called by starved receivers.
  void flush_all() {
    for (auto* e : endpoints_) e->try_flush();
  }

 private:
  std::pair<int, int> connected_pair() {
    int lsock = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lsock < 0) throw Error("socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(lsock, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
      ::close(lsock);
      throw ConfigError("bad tcp host '" + host_ + "'");
    }
    addr.sin_port = htons(next_port());
    if (::bind(lsock, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
        ::listen(lsock, 1) < 0) {
      int err = errno;
      ::close(lsock);
      throw Error("bind/listen " + host_ + ": " + std::strerror(err));
    }
    socklen_t alen = sizeof addr;
    ::getsockname(lsock, reinterpret_cast<sockaddr*>(&addr), &alen);

    int cli = ::socket(AF_INET, SOCK_STREAM, 0);
    if (cli < 0 || ::connect(cli, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      int err = errno;
      ::close(lsock);
      if (cli >= 0) ::close(cli);
      throw Error("connect: " + std::string(std::strerror(err)));
    }
    int srv = ::accept(lsock, nullptr, nullptr);
    ::close(lsock);
    if (srv < 0) {
      ::close(cli);
      throw Error("accept: " + std::string(std::strerror(errno)));
    }
    for (int fd : {cli, srv}) {
      int fl = ::fcntl(fd, F_GETFL, 0);
      ::fcntl(fd, F_SETFL, fl | O_NONBLOCK);
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    return {cli, srv};
  }

  std::uint16_t next_port() {
    if (port_base_ == 0) return 0;
    return port_base_ + links_made_++;
  }

  std::string host_;
  std::uint16_t port_base_;
  std::uint16_t links_made_ = 0;
  std::vector<TcpEndpoint*> endpoints_;
};

inline TcpEndpoint::TcpEndpoint(std::string self, std::string peer, ResourceLedger* sl,
                                ResourceLedger* pl, Transcript* tr, int fd, TcpFabric* fabric)
    : Endpoint(std::move(self), std::move(peer), sl, pl, tr), fd_(fd), fabric_(fabric) {
  fabric_->register_endpoint(this);
}

inline TcpEndpoint::~TcpEndpoint() {
  fabric_->unregister_endpoint(this);
  if (fd_ >= 0) ::close(fd_);
}

inline void TcpEndpoint::close() {
  try_flush();
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_WR);
    ::close(fd_);
    fd_ = -1;
  }
}

inline std::vector<std::uint8_t> TcpEndpoint::receive_bytes() {
  constexpr int kMaxStarvedSpins = 1000000;
  int spins = 0;
  std::uint8_t tmp[65536];
  for (;;) {
    std::size_t total = 0;
    if (frame_ready(&total)) {
      std::vector<std::uint8_t> out(rbuf_.begin(), rbuf_.begin() + total);
      rbuf_.erase(rbuf_.begin(), rbuf_.begin() + total);
      return out;
    }
    if (fd_ < 0) throw ChannelClosed("receive on closed channel " + peer() + "->" + self());
    ssize_t n = ::recv(fd_, tmp, sizeof tmp, 0);
    if (n > 0) {
      rbuf_.insert(rbuf_.end(), tmp, tmp + n);
      spins = 0;
      continue;
    }
    if (n == 0)
      throw ChannelClosed("peer closed channel " + peer() + "->" + self());
    if (errno != EAGAIN && errno != EWOULDBLOCK)
      throw ChannelClosed("tcp recv " + peer() + "->" + self() + ": " +
                          std::strerror(errno));
    // nothing readable: push everyone's backlog forward and retry
    fabric_->flush_all();
    if (++spins > kMaxStarvedSpins)
      throw ProtocolMisuse("receive starved on tcp channel " + peer() + "->" + self());
  }
}

}  // namespace splitnn
