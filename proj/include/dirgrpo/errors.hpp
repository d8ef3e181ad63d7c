#ifndef DIRGRPO_ERRORS_HPP_
#define DIRGRPO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dirgrpo {

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered during an optimization step (CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written or parsed (CLI exit code 4).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A batch peer produced no valid trajectory, so it has no mean anchor.
class PeerAllInvalid : public std::runtime_error {
 public:
  explicit PeerAllInvalid(std::size_t peer)
      : std::runtime_error("peer " + std::to_string(peer) + " has no valid trajectory"),
        peer_(peer) {}

  std::size_t peer() const noexcept { return peer_; }

 private:
  std::size_t peer_;
};

}  // namespace dirgrpo

#endif  // DIRGRPO_ERRORS_HPP_
