// Portable seeded randomness with deterministic stream splitting.
//
// Every draw in a simulation comes from a stream keyed by
// (master seed, entity id, time step, purpose):
//
//   key  = fmix(master ^ purpose_tag)
//   key  = fmix(key ^ fnv1a64(entity))
//   seed = fmix(key ^ step)
//
// where fmix is one SplitMix64 output step. The stream itself is
// std::mt19937_64, whose output sequence is fixed by the standard; uniforms
// take the top 53 bits, and categorical draws invert the CDF in state order.
// No std:: distribution is used, so logs are identical across standard
// libraries.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include <Eigen/Dense>

namespace riskdesk::rng {

enum class Purpose : std::uint64_t {
  kEnvironment = 0x656e76,
  kTransition = 0x7472616e,
  kObservation = 0x6f6273,
  kPerturbation = 0x70657274,
  kTrial = 0x747269616c,
  kInitial = 0x696e6974,
};

std::uint64_t fmix(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t stream_seed(std::uint64_t master, std::string_view entity, std::uint64_t step,
                          Purpose purpose);

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t master, std::string_view entity, std::uint64_t step, Purpose purpose)
      : engine_(stream_seed(master, entity, step, purpose)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Index drawn from a probability vector by CDF inversion.
  std::size_t categorical(std::span<const double> probabilities);
  std::size_t categorical(const Eigen::VectorXd& probabilities);

 private:
  std::mt19937_64 engine_;
};

}  // namespace riskdesk::rng
