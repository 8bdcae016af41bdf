#include "mmaf/rng_paths.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mmaf::rng {

namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kInv53 = 0x1.0p-53;

struct Block {
  uint32_t x0, x1, x2, x3;
};

inline Block philox_block(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
                          uint32_t k0, uint32_t k1) {
  for (int r = 0; r < 10; ++r) {
    const uint64_t p0 = static_cast<uint64_t>(kMul0) * c0;
    const uint64_t p1 = static_cast<uint64_t>(kMul1) * c2;
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
    const uint32_t lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
    const uint32_t lo1 = static_cast<uint32_t>(p1);
    c0 = hi1 ^ c1 ^ k0;
    c1 = lo1;
    c2 = hi0 ^ c3 ^ k1;
    c3 = lo0;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {c0, c1, c2, c3};
}

inline uint64_t join64(uint32_t hi, uint32_t lo) {
  return (static_cast<uint64_t>(hi) << 32) | lo;
}

// counter = (rep, k, block index, tag), key = master seed split in two words.
inline Block draw_block(uint64_t seed, uint32_t rep, int32_t k, uint32_t idx,
                        StreamTag tag) {
  return philox_block(rep, static_cast<uint32_t>(k), idx,
                      static_cast<uint32_t>(tag),
                      static_cast<uint32_t>(seed),
                      static_cast<uint32_t>(seed >> 32));
}

inline void box_muller(uint64_t a, uint64_t b, double& z0, double& z1) {
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * kInv53;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * kInv53;          // [0, 1)
  const double r = std::sqrt(-2.0 * std::log(u1));
  z0 = r * std::cos(kTwoPi * u2);
  z1 = r * std::sin(kTwoPi * u2);
}

}  // namespace

std::array<uint32_t, 4> philox4x32(const std::array<uint32_t, 4>& counter,
                                   const std::array<uint32_t, 2>& key) {
  const Block out = philox_block(counter[0], counter[1], counter[2], counter[3],
                                 key[0], key[1]);
  return {out.x0, out.x1, out.x2, out.x3};
}

void normal_block(uint64_t seed, uint32_t rep, int32_t k, StreamTag tag,
                  uint32_t i0, uint32_t count, double* out) {
  if (count == 0) return;
  uint32_t i = i0;
  uint32_t left = count;
  // The Box-Muller pair for block p covers draws 2p and 2p+1.
  constexpr uint32_t kChunk = 512;
  uint64_t ua[kChunk], ub[kChunk];
  double za[kChunk], zb[kChunk];
  while (left > 0) {
    const uint32_t p0 = i >> 1;
    const uint32_t pend = (i + left - 1) >> 1;
    const uint32_t pairs = std::min(pend - p0 + 1, kChunk);
    for (uint32_t q = 0; q < pairs; ++q) {
      const Block blk = draw_block(seed, rep, k, p0 + q, tag);
      ua[q] = join64(blk.x0, blk.x1);
      ub[q] = join64(blk.x2, blk.x3);
    }
    for (uint32_t q = 0; q < pairs; ++q) box_muller(ua[q], ub[q], za[q], zb[q]);
    for (uint32_t q = 0; q < pairs && left > 0; ++q) {
      const uint32_t base = (p0 + q) << 1;
      if (base >= i) {
        *out++ = za[q];
        --left;
        ++i;
      }
      if (left > 0 && base + 1 >= i) {
        *out++ = zb[q];
        --left;
        ++i;
      }
    }
  }
}

double normal_draw(uint64_t seed, uint32_t rep, int32_t k, uint32_t i,
                   StreamTag tag) {
  double pair[2];
  normal_block(seed, rep, k, tag, i & ~1u, 2, pair);
  return pair[i & 1u];
}

double uniform_draw(uint64_t seed, uint32_t rep, int32_t k, uint32_t i,
                    StreamTag tag) {
  const Block blk = draw_block(seed, rep, k, i, tag);
  return static_cast<double>(join64(blk.x0, blk.x1) >> 11) * kInv53;
}

std::optional<int> TimeGrid::index_of(double t) const {
  if (!(t >= 0.0) || !(t <= horizon)) return std::nullopt;
  const double r = t / dt;
  const int i = static_cast<int>(std::llround(r));
  if (i < 0 || i > steps) return std::nullopt;
  if (std::abs(t - time(i)) <= dt * 1e-9) return i;
  return std::nullopt;
}

TimeGrid make_grid(double horizon, int steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("make_grid: horizon must be positive and finite");
  if (steps < 1) throw std::invalid_argument("make_grid: steps must be >= 1");
  TimeGrid g;
  g.horizon = horizon;
  g.steps = steps;
  g.dt = horizon / steps;
  return g;
}

DrivingEnsemble sample_driving(int index_lo, int index_hi, const TimeGrid& grid,
                               uint64_t master_seed, uint32_t replication_id) {
  if (index_lo > index_hi)
    throw std::invalid_argument("sample_driving: index_lo > index_hi");
  if (grid.steps < 1 || !(grid.dt > 0.0))
    throw std::invalid_argument("sample_driving: invalid grid");
  DrivingEnsemble ens;
  ens.index_lo = index_lo;
  ens.index_hi = index_hi;
  ens.grid = grid;
  ens.seeds = {master_seed, replication_id};
  const int m = grid.steps;
  const double sdt = std::sqrt(grid.dt);
  ens.paths.resize(index_hi - index_lo + 1);
  std::vector<double> z(m);
  for (int k = index_lo; k <= index_hi; ++k) {
    auto& row = ens.paths[k - index_lo];
    row.resize(m + 1);
    row[0] = static_cast<double>(k);
    normal_block(master_seed, replication_id, k, StreamTag::increment, 0,
                 static_cast<uint32_t>(m), z.data());
    for (int i = 0; i < m; ++i) row[i + 1] = row[i] + sdt * z[i];
  }
  return ens;
}

double bridge_crossing_prob(double d0, double d1, double sigma2, double dt) {
  if (!(sigma2 > 0.0) || !(dt > 0.0))
    throw std::invalid_argument(
        "bridge_crossing_prob: sigma2 and dt must be positive");
  if (!(d0 >= 0.0) || !(d1 >= 0.0))
    throw std::invalid_argument(
        "bridge_crossing_prob: endpoint gaps must be nonnegative");
  return std::exp(-2.0 * d0 * d1 / (sigma2 * dt));
}

}  // namespace mmaf::rng
