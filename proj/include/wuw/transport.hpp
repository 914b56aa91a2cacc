#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Reliable ordered byte streams: loopback TCP for real deployments and an
// in-memory pipe for tests.
namespace wuw::transport {

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;
  // Fills `out` completely. Returns false on end-of-stream before the first
  // byte; throws Error{truncated} on end-of-stream mid-read.
  virtual bool read_exact(std::span<std::uint8_t> out) = 0;
  virtual void close() = 0;
};

// Reads one "WUWP" frame (header + body). The header is validated (magic,
// 16 MiB cap) before the body buffer is allocated. nullopt on clean EOF.
std::optional<std::vector<std::uint8_t>> read_frame(ByteStream& stream);

class TcpStream final : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd), mu_(std::make_unique<std::mutex>()) {}
  TcpStream(TcpStream&& o) noexcept : fd_(o.fd_), mu_(std::move(o.mu_)) { o.fd_ = -1; }
  TcpStream& operator=(TcpStream&& o) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream() override { close(); }

  void write_all(std::span<const std::uint8_t> data) override;
  bool read_exact(std::span<std::uint8_t> out) override;
  void close() override;
  // Unblocks pending reads on both sides without releasing the descriptor.
  void shutdown();

 private:
  int fd_;
  // Guards close() against a concurrent shutdown() from another thread.
  std::unique_ptr<std::mutex> mu_;
};

TcpStream connect_tcp(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  // port 0 picks an ephemeral port; see port().
  TcpListener(const std::string& host, std::uint16_t port);
  TcpListener(TcpListener&& o) noexcept : fd_(o.fd_), port_(o.port_) { o.fd_ = -1; }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener() { close(); }

  std::uint16_t port() const { return port_; }
  // Waits up to timeout_ms for a connection.
  std::optional<TcpStream> accept(int timeout_ms);
  void close();

 private:
  int fd_;
  std::uint16_t port_ = 0;
};

// Two connected in-memory endpoints.
class MemoryPipe {
 public:
  class End final : public ByteStream {
   public:
    void write_all(std::span<const std::uint8_t> data) override;
    bool read_exact(std::span<std::uint8_t> out) override;
    void close() override;

   private:
    friend class MemoryPipe;
    struct Channel {
      std::mutex mu;
      std::condition_variable cv;
      std::deque<std::uint8_t> bytes;
      bool closed = false;
    };
    std::shared_ptr<Channel> in_;
    std::shared_ptr<Channel> out_;
  };

  MemoryPipe();
  End& a() { return a_; }
  End& b() { return b_; }

 private:
  End a_;
  End b_;
};

}  // namespace wuw::transport
