#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vrpc/entropy.hpp"
#include "vrpc/pointcloud.hpp"

namespace vrpc {

inline constexpr int kAlphabetBound = 127;
inline constexpr int kFrequencyBits = 16;
inline constexpr std::uint32_t kFrequencyTotal = 1u << kFrequencyBits;
inline constexpr int kEscapeBits = 16;

// Static per-element frequency tables over the symbols [-A, A] followed by
// one escape symbol. Every symbol has frequency >= 1 and each table sums to
// kFrequencyTotal. Escaped values are sent as 16 raw bits (two's
// complement).
class CdfTable {
 public:
  static CdfTable build(const FactorizedDensity& model, int bound = kAlphabetBound);
  // Builds one table from explicit probabilities (alphabet() entries, escape
  // last); used by tests and by build().
  static std::vector<std::uint32_t> quantize_pmf(std::span<const double> pmf);

  CdfTable(int bound, std::vector<std::vector<std::uint32_t>> cumulative);

  int bound() const { return bound_; }
  std::size_t size() const { return cdf_.size(); }
  std::size_t alphabet() const { return static_cast<std::size_t>(2 * bound_ + 2); }
  std::size_t escape_index() const { return alphabet() - 1; }

  // Index of a value in the alphabet, or escape_index() when out of range.
  std::size_t symbol_index(std::int32_t value) const;
  std::uint32_t cum(std::size_t element, std::size_t symbol) const { return cdf_[element][symbol]; }
  std::uint32_t freq(std::size_t element, std::size_t symbol) const {
    return cdf_[element][symbol + 1] - cdf_[element][symbol];
  }
  const std::vector<std::uint32_t>& cumulative(std::size_t element) const { return cdf_[element]; }

  // Ideal code length in bits of symbols[i] under table i, escapes included.
  double cross_entropy_bits(std::span<const std::int32_t> symbols) const;

  bool operator==(const CdfTable&) const = default;

 private:
  int bound_;
  std::vector<std::vector<std::uint32_t>> cdf_;  // alphabet()+1 cumulative counts each
};

// Byte-oriented range encoder: 32-bit range, 64-bit low register with
// deferred carry propagation. Integer arithmetic only.
class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq);
  void encode_bits(std::uint32_t value, int bits);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool first_ = true;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data);

  // Cumulative frequency target for the next symbol.
  std::uint32_t target();
  void consume(std::uint32_t cum, std::uint32_t freq);
  std::uint32_t decode_bits(int bits);

 private:
  std::uint8_t next_byte();
  void normalize();

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
  std::uint32_t step_ = 0;
};

// symbols[i] is coded with table i. An empty input gives an empty payload.
std::vector<std::uint8_t> encode_symbols(std::span<const std::int32_t> symbols, const CdfTable& table);
// Decodes count symbols; running out of payload raises kCorrupt.
std::vector<std::int32_t> decode_symbols(std::span<const std::uint8_t> payload, std::size_t count,
                                         const CdfTable& table);

inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::size_t kBitstreamHeaderBytes = 61;

// Layout (little-endian): "VRPC", version u8, n u32, l u16, k u16,
// offset 3 x f64, scale f64, model hash u64, payload length u32,
// CRC32 of the preceding header bytes u32, payload.
struct Bitstream {
  std::uint32_t points = 0;
  std::uint16_t latent = 0;
  std::uint16_t kept = 0;
  NormalizationRecord normalization;
  std::uint64_t model_hash = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const Bitstream& o) const {
    return points == o.points && latent == o.latent && kept == o.kept &&
           normalization.offset == o.normalization.offset && normalization.scale == o.normalization.scale &&
           model_hash == o.model_hash && payload == o.payload;
  }
};

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs);
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace vrpc
