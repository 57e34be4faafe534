#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "icescope/predictor.hpp"

// Newline-delimited JSON prediction protocol. The normative grammar lives in
// docs/wire-protocol.md.
namespace icescope::wire {

inline constexpr int kProtocolVersion = 1;

class WireError : public std::runtime_error {
public:
    /// last_good_id is the id of the last fully answered predict request, or -1.
    WireError(const std::string& what, std::int64_t last_good_id)
        : std::runtime_error(what), last_good_id_(last_good_id) {}
    std::int64_t last_good_id() const { return last_good_id_; }

private:
    std::int64_t last_good_id_;
};

struct StdioTransport {
    std::string command;  // run through /bin/sh -c
};

struct TcpTransport {
    std::string host;
    std::uint16_t port = 0;
};

struct WireConfig {
    std::variant<StdioTransport, TcpTransport> transport;
    std::size_t batch_size = 10000;
    std::chrono::milliseconds timeout{30000};
    /// Feature count the adapter must report; 0 accepts any.
    std::size_t n_features = 0;
    /// Maximum predict requests in flight before a reply is required.
    std::size_t window = 4;
};

/// Connects, exchanges hello messages and returns a handle whose batch
/// evaluations go over the wire. Calls through the handle are serialized.
PredictorHandle handshake(const WireConfig& config);

/// m x p row-major batch through an external handle; m >= 1.
std::vector<double> predict_batch(const PredictorHandle& handle, std::span<const double> rows);

// Message codecs, exposed for tests and transcript tooling.
std::string encode_hello();
std::string encode_predict(std::int64_t id, std::span<const double> rows, std::size_t p);

struct HelloReply {
    std::size_t n_features = 0;
    std::string name;
};
HelloReply decode_hello(const std::string& line);

/// Validates op, id and length; throws WireError on any violation.
std::vector<double> decode_predict(const std::string& line, std::int64_t expected_id,
                                   std::size_t expected_len, std::int64_t last_good_id);

}  // namespace icescope::wire
