#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <json.hpp>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "pmisim/scenario.hpp"

namespace pmisim {

using json = nlohmann::json;

class decode_error : public std::runtime_error {
 public:
  decode_error(const std::string& what, size_t byte_offset)
      : std::runtime_error(what + " (byte " + std::to_string(byte_offset) + ")"),
        byte_offset(byte_offset) {}
  size_t byte_offset;
};

class validation_error : public std::runtime_error {
 public:
  validation_error(const std::string& what, std::string field)
      : std::runtime_error(what + " (field '" + field + "')"), field(std::move(field)) {}
  std::string field;
};

/// PMI override for one cell: which UEs get which (rank, index), on all
/// subbands or a listed subset.
struct PmiAssignment {
  int ue = 0;
  int ri = 1;
  int pmi = 0;
  std::vector<int> subbands;  // empty = all subbands
};

struct ControlDirective {
  int pci = 0;
  long long tti = 0;
  std::string agent;
  std::vector<PmiAssignment> assignments;
};

inline json to_json(const ControlDirective& d) {
  json arr = json::array();
  for (const PmiAssignment& a : d.assignments) {
    json e{{"ue", a.ue}, {"ri", a.ri}, {"pmi", a.pmi}};
    if (a.subbands.empty()) {
      e["subbands"] = "all";
    } else {
      e["subbands"] = a.subbands;
    }
    arr.push_back(std::move(e));
  }
  return json{{"pci", d.pci}, {"tti", d.tti}, {"agent", d.agent}, {"assignments", arr}};
}

inline ControlDirective control_directive_from_json(const json& j) {
  ControlDirective d;
  d.pci = j.at("pci").get<int>();
  d.tti = j.at("tti").get<long long>();
  d.agent = j.at("agent").get<std::string>();
  for (const json& e : j.at("assignments")) {
    PmiAssignment a;
    a.ue = e.at("ue").get<int>();
    a.ri = e.at("ri").get<int>();
    a.pmi = e.at("pmi").get<int>();
    const json& sb = e.at("subbands");
    if (!(sb.is_string() && sb.get<std::string>() == "all")) {
      a.subbands = sb.get<std::vector<int>>();
    }
    d.assignments.push_back(std::move(a));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Subjects

inline std::vector<std::string_view> split_subject(std::string_view s) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t dot = s.find('.', start);
    if (dot == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, dot - start));
    start = dot + 1;
  }
  return out;
}

inline bool is_number_token(std::string_view t) {
  if (t.empty()) return false;
  for (char c : t) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

/// Valid subjects: csi.cell.<pci>.ue.<ueid> and ctrl.cell.<pci>.
inline bool subject_well_formed(std::string_view subject) {
  const auto tok = split_subject(subject);
  if (tok.size() == 5 && tok[0] == "csi" && tok[1] == "cell" && is_number_token(tok[2]) &&
      tok[3] == "ue" && is_number_token(tok[4])) {
    return true;
  }
  if (tok.size() == 3 && tok[0] == "ctrl" && tok[1] == "cell" && is_number_token(tok[2])) {
    return true;
  }
  return false;
}

/// `*` matches one token; a trailing `>` matches the rest.
inline bool subject_matches(std::string_view pattern, std::string_view subject) {
  const auto pt = split_subject(pattern);
  const auto st = split_subject(subject);
  size_t i = 0;
  for (; i < pt.size(); ++i) {
    if (pt[i] == ">") return i + 1 == pt.size() && i < st.size();
    if (i >= st.size()) return false;
    if (pt[i] != "*" && pt[i] != st[i]) return false;
  }
  return i == st.size();
}

// ---------------------------------------------------------------------------
// Wire format: one UTF-8 JSON object per LF-terminated line.

struct BusMessage {
  std::string subject;
  long long tti = 0;
  json payload;
};

inline void validate_payload(const BusMessage& m) {
  const auto require = [&](const char* field) {
    if (!m.payload.contains(field)) {
      throw validation_error("payload missing required field", field);
    }
  };
  if (m.subject.rfind("csi.", 0) == 0) {
    for (const char* f : {"ue", "pci", "tti", "ri", "pmi", "cqi", "wb_cqi", "rsrp_dbm",
                          "thr_mbps", "interf_mw"}) {
      require(f);
    }
    if (!m.payload.at("pmi").is_array()) throw validation_error("expected array", "pmi");
    if (!m.payload.at("cqi").is_array()) throw validation_error("expected array", "cqi");
    if (!m.payload.at("interf_mw").is_array()) {
      throw validation_error("expected array", "interf_mw");
    }
  } else {
    for (const char* f : {"pci", "tti", "agent", "assignments"}) require(f);
    if (!m.payload.at("assignments").is_array()) {
      throw validation_error("expected array", "assignments");
    }
    for (const json& e : m.payload.at("assignments")) {
      for (const char* f : {"ue", "ri", "pmi", "subbands"}) {
        if (!e.contains(f)) throw validation_error("assignment missing field", f);
      }
    }
  }
}

/// Canonical single-line encoding (keys in nlohmann's sorted order).
inline std::string encode(const BusMessage& m) {
  json j{{"subject", m.subject}, {"tti", m.tti}, {"payload", m.payload}};
  return j.dump() + "\n";
}

/// Decodes one line (with or without the trailing newline).
inline BusMessage decode(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw decode_error(std::string("invalid JSON line: ") + e.what(), e.byte);
  }
  BusMessage m;
  if (!j.contains("subject") || !j.at("subject").is_string()) {
    throw validation_error("message missing subject", "subject");
  }
  if (!j.contains("tti") || !j.at("tti").is_number_integer()) {
    throw validation_error("message missing tti", "tti");
  }
  if (!j.contains("payload") || !j.at("payload").is_object()) {
    throw validation_error("message missing payload", "payload");
  }
  m.subject = j.at("subject").get<std::string>();
  m.tti = j.at("tti").get<long long>();
  m.payload = j.at("payload");
  if (!subject_well_formed(m.subject)) {
    throw validation_error("malformed subject", "subject");
  }
  validate_payload(m);
  return m;
}

// ---------------------------------------------------------------------------
// In-process bus

/// Subject-routed publish/subscribe hub. Delivery is synchronous under a
/// lock, which keeps per-subject FIFO order and makes in-process delivery
/// lossless; callbacks must not block.
class Bus {
 public:
  using Callback = std::function<void(const BusMessage&)>;

  int subscribe(std::string pattern, Callback cb) {
    std::lock_guard<std::mutex> lk(mu_);
    const int id = next_id_++;
    subs_.push_back({id, std::move(pattern), std::move(cb)});
    return id;
  }

  void unsubscribe(int id) {
    std::lock_guard<std::mutex> lk(mu_);
    std::erase_if(subs_, [id](const Sub& s) { return s.id == id; });
  }

  void publish(const BusMessage& m) {
    if (!subject_well_formed(m.subject)) {
      throw validation_error("malformed subject", "subject");
    }
    validate_payload(m);
    std::lock_guard<std::mutex> lk(mu_);
    for (const Sub& s : subs_) {
      if (subject_matches(s.pattern, m.subject)) s.cb(m);
    }
  }

 private:
  struct Sub {
    int id;
    std::string pattern;
    Callback cb;
  };

  std::mutex mu_;
  std::vector<Sub> subs_;
  int next_id_ = 1;
};

/// Convenience subscriber buffering messages until drained.
class MessageQueue {
 public:
  explicit MessageQueue(Bus& bus, const std::string& pattern) : bus_(bus) {
    id_ = bus_.subscribe(pattern, [this](const BusMessage& m) {
      std::lock_guard<std::mutex> lk(mu_);
      q_.push_back(m);
    });
  }

  ~MessageQueue() { bus_.unsubscribe(id_); }

  std::vector<BusMessage> drain() {
    std::lock_guard<std::mutex> lk(mu_);
    std::vector<BusMessage> out(q_.begin(), q_.end());
    q_.clear();
    return out;
  }

 private:
  Bus& bus_;
  int id_ = 0;
  std::mutex mu_;
  std::deque<BusMessage> q_;
};

// ---------------------------------------------------------------------------
// TCP transport: NDJSON over a socket; the first client line declares the
// subscription: {"op":"sub","pattern":"..."}.

inline bool parse_host_port(const std::string& addr, std::string& host, int& port) {
  const size_t colon = addr.rfind(':');
  if (colon == std::string::npos) return false;
  host = addr.substr(0, colon);
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (...) {
    return false;
  }
  return port >= 0 && port < 65536;  // 0 = ephemeral (server side)
}

class TcpBusServer {
 public:
  TcpBusServer(Bus& bus, const std::string& addr) : bus_(bus) {
    std::string host;
    int port = 0;
    if (!parse_host_port(addr, host, port)) {
      throw config_error("bus.tcp_addr: expected host:port, got '" + addr + "'");
    }
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("tcp server: socket() failed");
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
      ::close(listen_fd_);
      throw config_error("bus.tcp_addr: bad host '" + host + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
        ::listen(listen_fd_, 16) != 0) {
      ::close(listen_fd_);
      throw std::runtime_error("tcp server: bind/listen failed on " + addr);
    }
    socklen_t len = sizeof(sa);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    port_ = ntohs(sa.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  ~TcpBusServer() { stop(); }

  int port() const { return port_; }

  void stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard<std::mutex> lk(mu_);
    for (auto& c : conns_) c->close_and_join(bus_);
    conns_.clear();
  }

 private:
  struct Conn {
    int fd = -1;
    int sub_id = 0;
    std::thread writer;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> outbox;
    bool closed = false;

    void enqueue(std::string line) {
      {
        std::lock_guard<std::mutex> lk(mu);
        if (closed) return;
        outbox.push_back(std::move(line));
      }
      cv.notify_one();
    }

    void write_loop() {
      for (;;) {
        std::string line;
        {
          std::unique_lock<std::mutex> lk(mu);
          cv.wait(lk, [this] { return closed || !outbox.empty(); });
          if (closed && outbox.empty()) return;
          line = std::move(outbox.front());
          outbox.pop_front();
        }
        size_t off = 0;
        while (off < line.size()) {
          const ssize_t n = ::send(fd, line.data() + off, line.size() - off, MSG_NOSIGNAL);
          if (n <= 0) {
            std::lock_guard<std::mutex> lk(mu);
            closed = true;
            outbox.clear();
            return;
          }
          off += static_cast<size_t>(n);
        }
      }
    }

    void close_and_join(Bus& bus) {
      if (sub_id > 0) bus.unsubscribe(sub_id);
      {
        std::lock_guard<std::mutex> lk(mu);
        closed = true;
      }
      cv.notify_one();
      if (writer.joinable()) writer.join();
      if (fd >= 0) ::close(fd);
    }
  };

  static std::optional<std::string> read_line(int fd) {
    std::string line;
    char c;
    for (;;) {
      const ssize_t n = ::recv(fd, &c, 1, 0);
      if (n <= 0) return std::nullopt;
      if (c == '\n') return line;
      line.push_back(c);
    }
  }

  void accept_loop() {
    for (;;) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) return;
      const auto sub_line = read_line(fd);
      std::string pattern;
      if (sub_line) {
        try {
          const json j = json::parse(*sub_line);
          if (j.value("op", "") == "sub") pattern = j.at("pattern").get<std::string>();
        } catch (...) {
        }
      }
      if (pattern.empty()) {
        ::close(fd);
        continue;
      }
      auto conn = std::make_unique<Conn>();
      conn->fd = fd;
      Conn* raw = conn.get();
      conn->writer = std::thread([raw] { raw->write_loop(); });
      conn->sub_id = bus_.subscribe(pattern, [raw](const BusMessage& m) {
        raw->enqueue(encode(m));
      });
      std::lock_guard<std::mutex> lk(mu_);
      conns_.push_back(std::move(conn));
    }
  }

  Bus& bus_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::unique_ptr<Conn>> conns_;
};

/// Loopback subscriber; invalid lines are dropped and the stream picks up
/// again at the next newline.
class TcpBusClient {
 public:
  TcpBusClient(const std::string& addr, const std::string& pattern) {
    std::string host;
    int port = 0;
    if (!parse_host_port(addr, host, port)) {
      throw config_error("tcp client: expected host:port, got '" + addr + "'");
    }
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("tcp client: socket() failed");
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<uint16_t>(port));
    ::inet_pton(AF_INET, host.c_str(), &sa.sin_addr);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      ::close(fd_);
      throw std::runtime_error("tcp client: connect to " + addr + " failed");
    }
    const std::string sub = json{{"op", "sub"}, {"pattern", pattern}}.dump() + "\n";
    ::send(fd_, sub.data(), sub.size(), MSG_NOSIGNAL);
    reader_ = std::thread([this] { read_loop(); });
  }

  ~TcpBusClient() { close(); }

  void close() {
    bool expected = false;
    if (!closing_.compare_exchange_strong(expected, true)) return;
    ::shutdown(fd_, SHUT_RDWR);
    if (reader_.joinable()) reader_.join();
    ::close(fd_);
  }

  std::vector<BusMessage> drain() {
    std::lock_guard<std::mutex> lk(mu_);
    std::vector<BusMessage> out(q_.begin(), q_.end());
    q_.clear();
    return out;
  }

  size_t decode_failures() const { return decode_failures_.load(); }

 private:
  void read_loop() {
    std::string buf;
    char chunk[4096];
    for (;;) {
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n <= 0) return;
      buf.append(chunk, static_cast<size_t>(n));
      size_t start = 0;
      for (;;) {
        const size_t nl = buf.find('\n', start);
        if (nl == std::string::npos) break;
        const std::string_view line(buf.data() + start, nl - start);
        try {
          BusMessage m = decode(line);
          std::lock_guard<std::mutex> lk(mu_);
          q_.push_back(std::move(m));
        } catch (const std::exception&) {
          decode_failures_.fetch_add(1);
        }
        start = nl + 1;
      }
      buf.erase(0, start);
    }
  }

  int fd_ = -1;
  std::atomic<bool> closing_{false};
  std::thread reader_;
  std::mutex mu_;
  std::deque<BusMessage> q_;
  std::atomic<size_t> decode_failures_{0};
};

}  // namespace pmisim
