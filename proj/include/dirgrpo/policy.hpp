#ifndef DIRGRPO_POLICY_HPP_
#define DIRGRPO_POLICY_HPP_

// Toy numeric policies with exact log-probabilities and analytic gradients.
//
// DirectCategorical: one softmax over the integer values {0..R}, logits
// W [1, f]. Every output is format-valid.
//
// DigitAutoregressive: tokens {D0..D9, EOS, BAD}. At each step the logits are
// W [1, f, onehot(prev)] where prev ranges over {BOS, D0..D9}; the same W is
// used at every position. EOS and BAD terminate the sequence, as does
// reaching max_len tokens. Rendering wraps the digits in answer tags; BAD
// renders as '?', so a leading BAD yields a non-numeric answer.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dirgrpo/errors.hpp"
#include "dirgrpo/io.hpp"
#include "dirgrpo/protocol.hpp"
#include "dirgrpo/rng.hpp"

namespace dirgrpo {

enum class PolicyFamily { DirectCategorical, DigitAutoregressive };

inline const char* family_name(PolicyFamily f) {
  return f == PolicyFamily::DirectCategorical ? "direct" : "digit";
}

inline PolicyFamily parse_family(std::string_view s) {
  if (s == "direct") return PolicyFamily::DirectCategorical;
  if (s == "digit") return PolicyFamily::DigitAutoregressive;
  throw ConfigError("unknown policy family '" + std::string(s) + "'");
}

using Token = int;

namespace digit_tokens {
inline constexpr Token kEos = 10;
inline constexpr Token kBad = 11;
inline constexpr int kVocab = 12;
inline constexpr int kPrevSlots = 11;  // BOS, D0..D9
inline constexpr char kBadChar = '?';
}  // namespace digit_tokens

class Policy {
 public:
  Policy() = default;

  /// Zero-initialized policy. `value_range` R bounds valid answers to [0, R];
  /// the direct family has floor(R) + 1 classes.
  Policy(PolicyFamily family, int feature_dim, double value_range, int max_len = 0)
      : family_(family), feature_dim_(feature_dim), value_range_(value_range) {
    if (feature_dim < 1) throw std::invalid_argument("policy: feature_dim must be >= 1");
    if (!(value_range > 0.0)) throw std::invalid_argument("policy: value_range must be > 0");
    if (family == PolicyFamily::DirectCategorical) {
      max_len_ = 1;
      vocab_ = static_cast<int>(std::floor(value_range)) + 1;
    } else {
      max_len_ = max_len > 0 ? max_len : static_cast<int>(std::to_string(static_cast<long long>(value_range)).size()) + 1;
      vocab_ = digit_tokens::kVocab;
    }
    weights_ = Eigen::MatrixXd::Zero(vocab_, input_dim());
  }

  PolicyFamily family() const { return family_; }
  int feature_dim() const { return feature_dim_; }
  int max_len() const { return max_len_; }
  int vocab() const { return vocab_; }
  double value_range() const { return value_range_; }

  int input_dim() const {
    return 1 + feature_dim_ + (family_ == PolicyFamily::DigitAutoregressive ? digit_tokens::kPrevSlots : 0);
  }

  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::MatrixXd& weights() { return weights_; }

  /// Weights ~ N(0, std^2) from a seeded stream.
  void init_normal(std::uint64_t seed, double stddev = 0.01) {
    RngStream rng(stream_key({seed, 0x706f6c696379ULL}));
    for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_.cols(); ++c) weights_(r, c) = stddev * rng.normal();
    }
  }

 private:
  PolicyFamily family_ = PolicyFamily::DirectCategorical;
  int feature_dim_ = 1;
  double value_range_ = 1.0;
  int max_len_ = 1;
  int vocab_ = 2;
  Eigen::MatrixXd weights_;
};

/// Frozen copy used as the old/reference policy.
inline Policy snapshot(const Policy& p) { return p; }

struct Trajectory {
  std::vector<Token> tokens;
  double logprob = 0.0;
  std::string rendered;
  ParsedAnswer parsed;
};

// ---------------------------------------------------------------------------
// Step machinery

/// Input encoding for one decoding step; `prev` is -1 for BOS.
inline Eigen::VectorXd encode_input(const Policy& p, std::span<const double> features, Token prev = -1) {
  if (static_cast<int>(features.size()) != p.feature_dim()) {
    throw std::invalid_argument("policy: feature dimension mismatch");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.input_dim());
  x[0] = 1.0;
  for (int c = 0; c < p.feature_dim(); ++c) x[1 + c] = features[static_cast<std::size_t>(c)];
  if (p.family() == PolicyFamily::DigitAutoregressive) {
    x[1 + p.feature_dim() + (prev + 1)] = 1.0;
  }
  return x;
}

inline Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

inline bool is_terminal(const Policy& p, Token t) {
  return p.family() == PolicyFamily::DirectCategorical || t == digit_tokens::kEos || t == digit_tokens::kBad;
}

/// Throws unless `tokens` is a sequence the policy can emit.
inline void check_tokens(const Policy& p, std::span<const Token> tokens) {
  if (tokens.empty() || static_cast<int>(tokens.size()) > p.max_len()) {
    throw std::invalid_argument("policy: token sequence length out of bounds");
  }
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || tokens[t] >= p.vocab()) throw std::invalid_argument("policy: token outside vocabulary");
    if (t + 1 < tokens.size() && is_terminal(p, tokens[t])) {
      throw std::invalid_argument("policy: token after end of sequence");
    }
  }
}

/// One teacher-forced step: the input encoding and log-probabilities.
struct StepView {
  Eigen::VectorXd input;
  Eigen::VectorXd logp;
  Token token;
};

inline std::vector<StepView> teacher_forced_steps(const Policy& p, std::span<const double> features,
                                                  std::span<const Token> tokens) {
  check_tokens(p, tokens);
  std::vector<StepView> steps;
  steps.reserve(tokens.size());
  Token prev = -1;
  for (Token t : tokens) {
    auto x = encode_input(p, features, prev);
    Eigen::VectorXd logits = p.weights() * x;
    steps.push_back({std::move(x), log_softmax(logits), t});
    prev = t;
  }
  return steps;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_tokens(const Policy& p, std::span<const Token> tokens) {
  std::string body;
  if (p.family() == PolicyFamily::DirectCategorical) {
    body = std::to_string(tokens.front());
  } else {
    for (Token t : tokens) {
      if (t == digit_tokens::kEos) break;
      if (t == digit_tokens::kBad) {
        body += digit_tokens::kBadChar;
        break;
      }
      body += static_cast<char>('0' + t);
    }
  }
  std::string s(kAnswerOpen);
  s += body;
  s += kAnswerClose;
  return s;
}

inline Trajectory make_trajectory(const Policy& p, std::vector<Token> tokens, double logprob) {
  Trajectory tr;
  tr.tokens = std::move(tokens);
  tr.logprob = logprob;
  tr.rendered = render_tokens(p, tr.tokens);
  tr.parsed = parse_answer(tr.rendered, 0.0, p.value_range());
  return tr;
}

// ---------------------------------------------------------------------------
// Operations

inline double logprob(const Policy& p, std::span<const double> features, std::span<const Token> tokens) {
  double lp = 0.0;
  for (const auto& s : teacher_forced_steps(p, features, tokens)) lp += s.logp[s.token];
  return lp;
}

/// grad += scale * d/dW log pi(tokens | features).
inline void accumulate_logprob_gradient(const Policy& p, std::span<const double> features,
                                        std::span<const Token> tokens, double scale, Eigen::MatrixXd& grad) {
  for (const auto& s : teacher_forced_steps(p, features, tokens)) {
    Eigen::VectorXd g = -s.logp.array().exp();
    g[s.token] += 1.0;
    grad.noalias() += (scale * g) * s.input.transpose();
  }
}

inline Eigen::MatrixXd logprob_gradient(const Policy& p, std::span<const double> features,
                                        std::span<const Token> tokens) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(p.weights().rows(), p.weights().cols());
  accumulate_logprob_gradient(p, features, tokens, 1.0, grad);
  return grad;
}

namespace detail {

inline Token sample_categorical(const Eigen::VectorXd& logp, double u) {
  double cum = 0.0;
  for (Eigen::Index a = 0; a < logp.size(); ++a) {
    cum += std::exp(logp[a]);
    if (u < cum) return static_cast<Token>(a);
  }
  // u landed in the rounding slack above the accumulated mass
  Eigen::Index last = logp.size() - 1;
  while (last > 0 && !(logp[last] > -std::numeric_limits<double>::infinity())) --last;
  return static_cast<Token>(last);
}

template <typename Choose>
Trajectory decode(const Policy& p, std::span<const double> features, Choose&& choose) {
  std::vector<Token> tokens;
  double lp = 0.0;
  Token prev = -1;
  for (int step = 0; step < p.max_len(); ++step) {
    const Eigen::VectorXd logp = log_softmax(p.weights() * encode_input(p, features, prev));
    const Token t = choose(logp);
    tokens.push_back(t);
    lp += logp[t];
    if (is_terminal(p, t)) break;
    prev = t;
  }
  return make_trajectory(p, std::move(tokens), lp);
}

}  // namespace detail

/// K independent temperature-1 samples.
inline std::vector<Trajectory> sample_generations(const Policy& p, std::span<const double> features, int k,
                                                  RngStream& rng) {
  if (k < 1) throw std::invalid_argument("sample_generations: K must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    out.push_back(detail::decode(p, features, [&](const Eigen::VectorXd& logp) {
      return detail::sample_categorical(logp, rng.uniform());
    }));
  }
  return out;
}

/// Argmax decoding (lowest index wins ties).
inline Trajectory greedy_decode(const Policy& p, std::span<const double> features) {
  return detail::decode(p, features, [](const Eigen::VectorXd& logp) {
    Eigen::Index best = 0;
    logp.maxCoeff(&best);
    return static_cast<Token>(best);
  });
}

// ---------------------------------------------------------------------------
// Checkpoints: plain-text header, then one CSV row per weight row.

inline constexpr std::string_view kCheckpointMagic = "dirgrpo-policy v1";

inline std::string checkpoint_to_string(const Policy& p) {
  std::string out(kCheckpointMagic);
  out += "\nfamily=" + std::string(family_name(p.family()));
  out += "\nfeature_dim=" + std::to_string(p.feature_dim());
  out += "\nmax_len=" + std::to_string(p.max_len());
  out += "\nvalue_range=" + io::format_double(p.value_range());
  out += "\nvocab=" + std::to_string(p.vocab());
  out += "\nrows=" + std::to_string(p.weights().rows());
  out += "\ncols=" + std::to_string(p.weights().cols());
  out += "\nweights\n";
  for (Eigen::Index r = 0; r < p.weights().rows(); ++r) {
    for (Eigen::Index c = 0; c < p.weights().cols(); ++c) {
      if (c) out += ',';
      out += io::format_double(p.weights()(r, c));
    }
    out += '\n';
  }
  return out;
}

inline void save_checkpoint(const Policy& p, const std::filesystem::path& path) {
  io::write_file(path, checkpoint_to_string(p));
}

inline Policy load_checkpoint(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  if (lines.empty() || lines[0] != kCheckpointMagic) throw IoError(path.string() + ": not a policy checkpoint");
  std::size_t li = 1;
  auto field = [&](std::string_view key) {
    if (li >= lines.size()) throw IoError(path.string() + ": truncated header");
    const auto& line = lines[li++];
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != key) {
      throw IoError(path.string() + ": expected header field " + std::string(key));
    }
    return line.substr(eq + 1);
  };
  const auto family = parse_family(field("family"));
  const auto feature_dim = static_cast<int>(io::parse_int(field("feature_dim")));
  const auto max_len = static_cast<int>(io::parse_int(field("max_len")));
  const double value_range = io::parse_double(field("value_range"));
  const auto vocab = io::parse_int(field("vocab"));
  const auto rows = io::parse_int(field("rows"));
  const auto cols = io::parse_int(field("cols"));
  if (li >= lines.size() || lines[li++] != "weights") throw IoError(path.string() + ": missing weights section");

  Policy p(family, feature_dim, value_range, max_len);
  if (p.vocab() != vocab || p.weights().rows() != rows || p.weights().cols() != cols || p.max_len() != max_len) {
    throw IoError(path.string() + ": header shape inconsistent with family");
  }
  for (Eigen::Index r = 0; r < rows; ++r, ++li) {
    if (li >= lines.size()) throw IoError(path.string() + ": truncated weights");
    const auto cells = io::split(lines[li], ',');
    if (static_cast<long long>(cells.size()) != cols) throw IoError(path.string() + ": ragged weight row");
    for (Eigen::Index c = 0; c < cols; ++c) p.weights()(r, c) = io::parse_double(cells[static_cast<std::size_t>(c)]);
  }
  return p;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_POLICY_HPP_
