#include "icescope/wire.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <deque>
#include <mutex>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

namespace icescope::wire {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Codecs

std::string encode_hello() {
    return json{{"op", "hello"}, {"version", kProtocolVersion}}.dump() + "\n";
}

std::string encode_predict(std::int64_t id, std::span<const double> rows, std::size_t p) {
    if (p == 0 || rows.empty() || rows.size() % p != 0) {
        throw std::invalid_argument("encode_predict: batch must hold m >= 1 rows of p values");
    }
    json x = json::array();
    for (std::size_t i = 0; i < rows.size() / p; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < p; ++j) {
            const double v = rows[i * p + j];
            if (!std::isfinite(v)) {
                throw std::invalid_argument(fmt::format("non-finite value at row {}, column {} cannot be sent", i, j));
            }
            row.push_back(v);
        }
        x.push_back(std::move(row));
    }
    return json{{"op", "predict"}, {"id", id}, {"X", std::move(x)}}.dump() + "\n";
}

namespace {

json parse_line(const std::string& line, std::int64_t last_good_id) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw WireError("malformed reply: not a JSON object", last_good_id);
        return j;
    } catch (const json::parse_error& e) {
        throw WireError(fmt::format("malformed reply: {}", e.what()), last_good_id);
    }
}

[[noreturn]] void throw_adapter_error(const json& j, std::int64_t last_good_id) {
    const std::string msg = j.contains("msg") && j["msg"].is_string() ? j["msg"].get<std::string>() : "(no message)";
    if (j.contains("id") && j["id"].is_number_integer()) {
        throw WireError(fmt::format("adapter error for request {}: {}", j["id"].get<std::int64_t>(), msg),
                        last_good_id);
    }
    throw WireError(fmt::format("adapter error: {}", msg), last_good_id);
}

}  // namespace

HelloReply decode_hello(const std::string& line) {
    const json j = parse_line(line, -1);
    const auto op = j.value("op", std::string{});
    if (op == "error") throw_adapter_error(j, -1);
    if (op != "hello") throw WireError(fmt::format("malformed hello reply: op is '{}'", op), -1);
    if (!j.contains("n_features") || !j["n_features"].is_number_unsigned()) {
        throw WireError("malformed hello reply: n_features missing or not a non-negative integer", -1);
    }
    HelloReply reply;
    reply.n_features = j["n_features"].get<std::size_t>();
    if (j.contains("name") && j["name"].is_string()) reply.name = j["name"].get<std::string>();
    return reply;
}

std::vector<double> decode_predict(const std::string& line, std::int64_t expected_id, std::size_t expected_len,
                                   std::int64_t last_good_id) {
    const json j = parse_line(line, last_good_id);
    const auto op = j.value("op", std::string{});
    if (op == "error") throw_adapter_error(j, last_good_id);
    if (op != "predict") throw WireError(fmt::format("malformed reply: op is '{}'", op), last_good_id);
    if (!j.contains("id") || !j["id"].is_number_integer()) {
        throw WireError("malformed reply: id missing or not an integer", last_good_id);
    }
    const auto id = j["id"].get<std::int64_t>();
    if (id != expected_id) {
        throw WireError(fmt::format("id mismatch: expected {}, got {}", expected_id, id), last_good_id);
    }
    if (!j.contains("y") || !j["y"].is_array()) throw WireError("malformed reply: y missing", last_good_id);
    const json& y = j["y"];
    if (y.size() != expected_len) {
        throw WireError(fmt::format("length mismatch for request {}: expected {} values, got {}", id, expected_len,
                                    y.size()),
                        last_good_id);
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (!y[k].is_number() || !std::isfinite(y[k].get<double>())) {
            throw WireError(fmt::format("non-finite value at position {} of reply {}", k, id), last_good_id);
        }
        out.push_back(y[k].get<double>());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transport

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

// Full-duplex line channel over a pair of descriptors (a pipe pair or one socket).
class Channel {
public:
    Channel(int read_fd, int write_fd, pid_t child, std::string peer)
        : read_fd_(read_fd), write_fd_(write_fd), child_(child), peer_(std::move(peer)) {
        set_nonblocking(read_fd_);
        if (write_fd_ != read_fd_) set_nonblocking(write_fd_);
    }
    Channel(const Channel&) = delete;
    Channel& operator=(const Channel&) = delete;

    ~Channel() {
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        if (child_ > 0) {
            // Closing stdin asks the adapter to exit; give it a moment, then insist.
            for (int k = 0; k < 20; ++k) {
                if (::waitpid(child_, nullptr, WNOHANG) == child_) return;
                ::usleep(10000);
            }
            ::kill(child_, SIGKILL);
            ::waitpid(child_, nullptr, 0);
        }
    }

    const std::string& peer() const { return peer_; }

    struct Outgoing {
        std::string bytes;
        std::size_t sent = 0;
    };

    // Pumps pending output and input until on_line() has consumed `want`
    // lines or output drains with nothing outstanding. Returns false when no
    // progress happened within timeout.
    template <typename Feed, typename OnLine>
    void pump(Feed&& feed, OnLine&& on_line, std::function<bool()> done, std::chrono::milliseconds timeout,
              std::int64_t last_good_id_hint, const std::function<std::int64_t()>& last_good_id) {
        (void)last_good_id_hint;
        Outgoing out;
        auto deadline = Clock::now() + timeout;
        while (!done()) {
            if (out.sent == out.bytes.size()) {
                out.bytes.clear();
                out.sent = 0;
                feed(out.bytes);
            }
            const bool want_write = out.sent < out.bytes.size();
            pollfd fds[2];
            int nfds = 0;
            fds[nfds++] = {read_fd_, POLLIN, 0};
            int write_slot = -1;
            if (want_write) {
                if (write_fd_ == read_fd_) {
                    fds[0].events |= POLLOUT;
                    write_slot = 0;
                } else {
                    write_slot = nfds;
                    fds[nfds++] = {write_fd_, POLLOUT, 0};
                }
            }
            const auto remaining =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            if (remaining <= 0) {
                throw WireError(fmt::format("timeout after {} ms waiting for adapter {}", timeout.count(), peer_),
                                last_good_id());
            }
            const int rc = ::poll(fds, static_cast<nfds_t>(nfds), static_cast<int>(remaining));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw WireError(fmt::format("poll failed: {}", std::strerror(errno)), last_good_id());
            }
            if (rc == 0) continue;  // deadline check above reports it

            bool progressed = false;
            if (write_slot >= 0 && (fds[write_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
                const ssize_t n = ::write(write_fd_, out.bytes.data() + out.sent, out.bytes.size() - out.sent);
                if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
                    throw WireError(fmt::format("broken pipe writing to adapter {}: {}", peer_, std::strerror(errno)),
                                    last_good_id());
                }
                if (n > 0) {
                    out.sent += static_cast<std::size_t>(n);
                    progressed = true;
                }
            }
            if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
                char buf[65536];
                const ssize_t n = ::read(read_fd_, buf, sizeof buf);
                if (n == 0) {
                    throw WireError(fmt::format("adapter {} closed the connection", peer_), last_good_id());
                }
                if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
                    throw WireError(fmt::format("read from adapter {} failed: {}", peer_, std::strerror(errno)),
                                    last_good_id());
                }
                if (n > 0) {
                    progressed = true;
                    inbox_.append(buf, static_cast<std::size_t>(n));
                    std::size_t pos;
                    while ((pos = inbox_.find('\n')) != std::string::npos) {
                        std::string line = inbox_.substr(0, pos);
                        inbox_.erase(0, pos + 1);
                        if (!line.empty() && line.back() == '\r') line.pop_back();
                        if (line.empty()) continue;
                        on_line(line);
                    }
                }
            }
            if (progressed) deadline = Clock::now() + timeout;
        }
    }

private:
    int read_fd_;
    int write_fd_;
    pid_t child_;
    std::string peer_;
    std::string inbox_;
};

std::unique_ptr<Channel> spawn(const StdioTransport& t) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw WireError(fmt::format("pipe: {}", std::strerror(errno)), -1);
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw WireError(fmt::format("pipe: {}", std::strerror(errno)), -1);
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw WireError(fmt::format("fork: {}", std::strerror(errno)), -1);
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", t.command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::make_unique<Channel>(from_child[0], to_child[1], pid, fmt::format("'{}'", t.command));
}

std::unique_ptr<Channel> connect_tcp(const TcpTransport& t, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(t.port);
    if (const int rc = ::getaddrinfo(t.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw WireError(fmt::format("cannot resolve {}:{}: {}", t.host, t.port, ::gai_strerror(rc)), -1);
    }
    std::string last_error = "no addresses";
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        set_nonblocking(fd);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (rc == 1) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
                errno = err;
            } else {
                rc = -1;
                errno = rc == 0 ? ETIMEDOUT : errno;
            }
        }
        if (rc == 0) {
            ::freeaddrinfo(res);
            return std::make_unique<Channel>(fd, fd, -1, fmt::format("{}:{}", t.host, t.port));
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    ::freeaddrinfo(res);
    throw WireError(fmt::format("cannot connect to {}:{}: {}", t.host, t.port, last_error), -1);
}

class WireModel final : public Model {
public:
    WireModel(std::unique_ptr<Channel> channel, const WireConfig& config, std::size_t p)
        : channel_(std::move(channel)), config_(config), p_(p) {}

    std::size_t n_features() const override { return p_; }

    void predict(std::span<const double> rows, std::span<double> out) const override {
        const std::size_t m = out.size();
        if (m == 0) throw WireError("predict batch must contain at least one row", last_good_id_);
        std::lock_guard lock(mutex_);
        if (broken_) throw WireError(fmt::format("connection to {} is unusable after an earlier error",
                                                 channel_->peer()), last_good_id_);

        struct Pending {
            std::int64_t id;
            std::size_t offset;
            std::size_t len;
        };
        std::deque<Pending> in_flight;
        std::size_t next_row = 0;
        std::size_t answered = 0;

        auto feed = [&](std::string& bytes) {
            if (next_row >= m || in_flight.size() >= config_.window) return;
            const std::size_t len = std::min(config_.batch_size, m - next_row);
            const std::int64_t id = next_id_++;
            bytes = encode_predict(id, rows.subspan(next_row * p_, len * p_), p_);
            in_flight.push_back({id, next_row, len});
            next_row += len;
        };
        auto on_line = [&](const std::string& line) {
            if (in_flight.empty()) throw WireError("unexpected message from adapter: " + line, last_good_id_);
            const Pending req = in_flight.front();
            const auto y = decode_predict(line, req.id, req.len, last_good_id_);
            std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(req.offset));
            in_flight.pop_front();
            answered += req.len;
            last_good_id_ = req.id;
        };
        try {
            channel_->pump(feed, on_line, [&] { return answered == m; }, config_.timeout, last_good_id_,
                           [this] { return last_good_id_; });
        } catch (const WireError& e) {
            broken_ = true;
            throw WireError(fmt::format("{} (last good id {})", e.what(), last_good_id_), last_good_id_);
        } catch (...) {
            broken_ = true;
            throw;
        }
    }

private:
    std::unique_ptr<Channel> channel_;
    WireConfig config_;
    std::size_t p_;
    mutable std::mutex mutex_;
    mutable std::int64_t next_id_ = 1;
    mutable std::int64_t last_good_id_ = -1;
    mutable bool broken_ = false;
};

}  // namespace

PredictorHandle handshake(const WireConfig& config) {
    if (config.batch_size < 1) throw std::invalid_argument("wire: batch_size must be >= 1");
    if (config.window < 1) throw std::invalid_argument("wire: window must be >= 1");
    if (config.timeout.count() <= 0) throw std::invalid_argument("wire: timeout must be positive");
    ignore_sigpipe();

    std::unique_ptr<Channel> channel;
    PredictorKind kind = PredictorKind::external_process;
    std::map<std::string, std::string> meta;
    if (const auto* s = std::get_if<StdioTransport>(&config.transport)) {
        channel = spawn(*s);
        meta["command"] = s->command;
    } else {
        const auto& t = std::get<TcpTransport>(config.transport);
        channel = connect_tcp(t, config.timeout);
        kind = PredictorKind::external_tcp;
        meta["address"] = fmt::format("{}:{}", t.host, t.port);
    }

    std::optional<HelloReply> hello;
    bool sent = false;
    channel->pump(
        [&](std::string& bytes) {
            if (!sent) {
                bytes = encode_hello();
                sent = true;
            }
        },
        [&](const std::string& line) {
            if (hello) throw WireError("unexpected extra message during handshake: " + line, -1);
            hello = decode_hello(line);
        },
        [&] { return hello.has_value(); }, config.timeout, -1, [] { return std::int64_t{-1}; });

    if (config.n_features != 0 && hello->n_features != config.n_features) {
        throw WireError(fmt::format("feature-count mismatch: adapter reports {} features, dataset has {}",
                                    hello->n_features, config.n_features),
                        -1);
    }
    if (hello->n_features == 0) throw WireError("adapter reports 0 features", -1);
    meta["name"] = hello->name;
    meta["n_features"] = std::to_string(hello->n_features);
    return PredictorHandle(std::make_shared<WireModel>(std::move(channel), config, hello->n_features), kind,
                           std::move(meta));
}

std::vector<double> predict_batch(const PredictorHandle& handle, std::span<const double> rows) {
    const std::size_t p = handle.n_features();
    if (rows.empty() || rows.size() % p != 0) {
        throw std::invalid_argument(fmt::format("predict_batch: {} values do not form m >= 1 rows of {} features",
                                                rows.size(), p));
    }
    return handle.evaluate(rows);
}

}  // namespace icescope::wire
