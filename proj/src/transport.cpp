#include "wuw/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>

#include "wuw/error.hpp"
#include "wuw/wire.hpp"

namespace wuw::transport {
namespace {

[[noreturn]] void sys_fail(const std::string& what) {
  throw Error(Errc::io_error, what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    addrinfo hints{}, *res = nullptr;
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res)
      throw Error(Errc::io_error, "cannot resolve " + host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
  }
  return addr;
}

}  // namespace

std::optional<std::vector<std::uint8_t>> read_frame(ByteStream& stream) {
  std::array<std::uint8_t, wire::kHeaderSize> header{};
  if (!stream.read_exact(header)) return std::nullopt;
  const std::uint32_t len = wire::parse_header(header);
  std::vector<std::uint8_t> frame(wire::kHeaderSize + len);
  std::copy(header.begin(), header.end(), frame.begin());
  if (len > 0 && !stream.read_exact(std::span<std::uint8_t>(frame).subspan(wire::kHeaderSize)))
    throw Error(Errc::truncated, "stream ended inside a frame body");
  return frame;
}

TcpStream& TcpStream::operator=(TcpStream&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    mu_ = std::move(o.mu_);
    o.fd_ = -1;
  }
  return *this;
}

void TcpStream::write_all(std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

bool TcpStream::read_exact(std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    if (n == 0) {
      if (got == 0) return false;
      throw Error(Errc::truncated, "peer closed mid-message");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

void TcpStream::close() {
  if (!mu_) return;
  std::lock_guard lock(*mu_);
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpStream::shutdown() {
  if (!mu_) return;
  std::lock_guard lock(*mu_);
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

TcpStream connect_tcp(const std::string& host, std::uint16_t port) {
  const sockaddr_in addr = resolve(host, port);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  TcpStream stream(fd);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) sys_fail("connect");
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return stream;
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) : fd_(::socket(AF_INET, SOCK_STREAM, 0)) {
  if (fd_ < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int saved = errno;
    close();
    errno = saved;
    sys_fail("bind");
  }
  if (::listen(fd_, 16) != 0) sys_fail("listen");
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

std::optional<TcpStream> TcpListener::accept(int timeout_ms) {
  if (fd_ < 0) return std::nullopt;
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready <= 0) return std::nullopt;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return std::nullopt;
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return TcpStream(fd);
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

MemoryPipe::MemoryPipe() {
  auto ab = std::make_shared<End::Channel>();
  auto ba = std::make_shared<End::Channel>();
  a_.out_ = ab;
  a_.in_ = ba;
  b_.out_ = ba;
  b_.in_ = ab;
}

void MemoryPipe::End::write_all(std::span<const std::uint8_t> data) {
  std::lock_guard lock(out_->mu);
  if (out_->closed) throw Error(Errc::io_error, "write to a closed pipe");
  out_->bytes.insert(out_->bytes.end(), data.begin(), data.end());
  out_->cv.notify_all();
}

bool MemoryPipe::End::read_exact(std::span<std::uint8_t> out) {
  std::unique_lock lock(in_->mu);
  std::size_t got = 0;
  while (got < out.size()) {
    in_->cv.wait(lock, [&] { return !in_->bytes.empty() || in_->closed; });
    if (in_->bytes.empty()) {
      if (got == 0) return false;
      throw Error(Errc::truncated, "pipe closed mid-message");
    }
    while (got < out.size() && !in_->bytes.empty()) {
      out[got++] = in_->bytes.front();
      in_->bytes.pop_front();
    }
  }
  return true;
}

void MemoryPipe::End::close() {
  for (auto* ch : {out_.get(), in_.get()}) {
    std::lock_guard lock(ch->mu);
    ch->closed = true;
    ch->cv.notify_all();
  }
}

}  // namespace wuw::transport
