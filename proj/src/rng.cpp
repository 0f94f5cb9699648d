#include "riskdesk/rng.hpp"

namespace riskdesk::rng {

std::uint64_t fmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t stream_seed(std::uint64_t master, std::string_view entity, std::uint64_t step,
                          Purpose purpose) {
  std::uint64_t key = fmix(master ^ static_cast<std::uint64_t>(purpose));
  key = fmix(key ^ fnv1a64(entity));
  return fmix(key ^ step);
}

double Stream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Stream::categorical(std::span<const double> probabilities) {
  const double u = uniform();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    cum += probabilities[i];
    last_positive = i;
    if (u < cum) return i;
  }
  // Rounding left the cumulative sum just short of 1.
  return last_positive;
}

std::size_t Stream::categorical(const Eigen::VectorXd& probabilities) {
  return categorical(std::span<const double>(probabilities.data(),
                                             static_cast<std::size_t>(probabilities.size())));
}

}  // namespace riskdesk::rng
