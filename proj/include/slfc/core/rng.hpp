#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Deterministic random source. Normal draws use Box-Muller with a fixed
/// consumption of two engine words per draw, so the stream state is fully
/// captured by the engine alone (no cached spare value to serialize).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal draw; consumes exactly two engine words.
  double normal() {
    // u1 in (0, 1] keeps the log finite.
    double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector normal_vector(std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = normal();
    return v;
  }

  Matrix normal_matrix(std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * normal();
    return m;
  }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t integer(std::uint64_t bound) {
    if (bound == 0) throw ContractError("Rng::integer: bound must be positive");
    return engine_() % bound;
  }

  /// Independent stream derived from the base seed and an index; unaffected
  /// by draws already made on this stream.
  Rng substream(std::uint64_t index) const {
    return Rng(detail::splitmix64(seed_ ^ (0x9e3779b97f4a7c15ULL * (index + 1))));
  }

  std::uint64_t seed() const { return seed_; }

  std::string serialize() const {
    std::ostringstream os;
    os << seed_ << ' ' << engine_;
    return os.str();
  }

  static Rng deserialize(const std::string& s) {
    std::istringstream is(s);
    std::uint64_t seed = 0;
    is >> seed;
    Rng r(seed);
    is >> r.engine_;
    if (!is) throw IoError("Rng::deserialize: malformed state string");
    return r;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace slfc
