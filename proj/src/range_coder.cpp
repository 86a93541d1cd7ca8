#include "vrpc/range_coder.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "vrpc/bytes.hpp"
#include "vrpc/error.hpp"

namespace vrpc {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

// ---- tables ------------------------------------------------------------

std::vector<std::uint32_t> CdfTable::quantize_pmf(std::span<const double> pmf) {
  const std::size_t m = pmf.size();
  if (m < 2 || m > kFrequencyTotal) throw Error(ErrorCode::kRange, "quantize_pmf: bad alphabet size");
  double total = 0.0;
  for (const double p : pmf) total += std::max(p, 0.0);
  if (!(total > 0.0)) throw Error(ErrorCode::kNumeric, "quantize_pmf: probabilities sum to zero");

  std::vector<std::uint32_t> freq(m);
  std::int64_t sum = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const double scaled = std::max(pmf[s], 0.0) / total * kFrequencyTotal;
    freq[s] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::floor(scaled + 0.5)));
    sum += freq[s];
  }
  // Settle the rounding residue on the most probable symbols.
  std::int64_t diff = static_cast<std::int64_t>(kFrequencyTotal) - sum;
  while (diff != 0) {
    std::size_t top = 0;
    for (std::size_t s = 1; s < m; ++s) {
      if (freq[s] > freq[top]) top = s;
    }
    if (diff > 0) {
      freq[top] += static_cast<std::uint32_t>(diff);
      diff = 0;
    } else {
      const std::int64_t take = std::min<std::int64_t>(-diff, freq[top] - 1);
      freq[top] -= static_cast<std::uint32_t>(take);
      diff += take;
    }
  }
  std::vector<std::uint32_t> cdf(m + 1, 0);
  for (std::size_t s = 0; s < m; ++s) cdf[s + 1] = cdf[s] + freq[s];
  return cdf;
}

CdfTable CdfTable::build(const FactorizedDensity& model, int bound) {
  if (bound < 1 || bound > 32767) throw Error(ErrorCode::kRange, "alphabet bound must lie in [1, 32767]");
  const std::size_t alphabet = static_cast<std::size_t>(2 * bound + 2);
  std::vector<std::vector<std::uint32_t>> tables;
  tables.reserve(model.size());
  std::vector<double> pmf(alphabet);
  for (std::size_t i = 0; i < model.size(); ++i) {
    for (int v = -bound; v <= bound; ++v) pmf[static_cast<std::size_t>(v + bound)] = model.interval_mass(i, v);
    const double mu = model.location[i];
    const double s = model.scale(i);
    // Tail mass beyond [-A - 1/2, A + 1/2], computed without cancellation.
    pmf[alphabet - 1] = logistic_cdf(-bound - 0.5, mu, s) + logistic_cdf(mu, bound + 0.5, s);
    tables.push_back(quantize_pmf(pmf));
  }
  return CdfTable(bound, std::move(tables));
}

CdfTable::CdfTable(int bound, std::vector<std::vector<std::uint32_t>> cumulative)
    : bound_(bound), cdf_(std::move(cumulative)) {
  for (const auto& c : cdf_) {
    if (c.size() != alphabet() + 1 || c.front() != 0 || c.back() != kFrequencyTotal) {
      throw Error(ErrorCode::kCorrupt, "CdfTable: malformed cumulative table");
    }
    for (std::size_t s = 0; s + 1 < c.size(); ++s) {
      if (c[s + 1] <= c[s]) throw Error(ErrorCode::kCorrupt, "CdfTable: non-increasing cumulative table");
    }
  }
}

std::size_t CdfTable::symbol_index(std::int32_t value) const {
  if (value < -bound_ || value > bound_) return escape_index();
  return static_cast<std::size_t>(value + bound_);
}

double CdfTable::cross_entropy_bits(std::span<const std::int32_t> symbols) const {
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const std::size_t s = symbol_index(symbols[i]);
    bits -= std::log2(static_cast<double>(freq(i, s)) / kFrequencyTotal);
    if (s == escape_index()) bits += kEscapeBits;
  }
  return bits;
}

// ---- range coder -------------------------------------------------------

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq) {
  const std::uint32_t r = range_ >> kFrequencyBits;
  low_ += static_cast<std::uint64_t>(r) * cum;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_bits(std::uint32_t value, int bits) {
  // Up to 16 bits per call keeps r >= 2^8.
  for (int done = 0; done < bits;) {
    const int chunk = std::min(bits - done, kFrequencyBits);
    const std::uint32_t part = (value >> done) & ((1u << chunk) - 1u);
    const std::uint32_t r = range_ >> chunk;
    low_ += static_cast<std::uint64_t>(r) * part;
    range_ = r;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
    done += chunk;
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      // The interval never reaches 1.0, so the very first byte is always 0
      // and is not emitted.
      if (!first_) out_.push_back(static_cast<std::uint8_t>(temp + carry));
      first_ = false;
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= data_.size()) {
    throw Error(ErrorCode::kCorrupt, "range decoder: payload truncated at byte " + std::to_string(pos_));
  }
  return data_[pos_++];
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

std::uint32_t RangeDecoder::target() {
  step_ = range_ >> kFrequencyBits;
  const std::uint32_t value = code_ / step_;
  if (value >= kFrequencyTotal) throw Error(ErrorCode::kCorrupt, "range decoder: code outside interval");
  return value;
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
  code_ -= step_ * cum;
  range_ = step_ * freq;
  normalize();
}

std::uint32_t RangeDecoder::decode_bits(int bits) {
  std::uint32_t value = 0;
  for (int done = 0; done < bits;) {
    const int chunk = std::min(bits - done, kFrequencyBits);
    const std::uint32_t r = range_ >> chunk;
    const std::uint32_t part = code_ / r;
    if (part >= (1u << chunk)) throw Error(ErrorCode::kCorrupt, "range decoder: raw bits outside interval");
    code_ -= r * part;
    range_ = r;
    normalize();
    value |= part << done;
    done += chunk;
  }
  return value;
}

std::vector<std::uint8_t> encode_symbols(std::span<const std::int32_t> symbols, const CdfTable& table) {
  if (symbols.size() > table.size()) {
    throw Error(ErrorCode::kRange, "encode_symbols: " + std::to_string(symbols.size()) +
                                       " symbols but only " + std::to_string(table.size()) + " tables");
  }
  if (symbols.empty()) return {};
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const std::size_t s = table.symbol_index(symbols[i]);
    enc.encode(table.cum(i, s), table.freq(i, s));
    if (s == table.escape_index()) {
      if (symbols[i] < -32768 || symbols[i] > 32767) {
        throw Error(ErrorCode::kRange, "encode_symbols: value " + std::to_string(symbols[i]) +
                                           " exceeds the 16-bit escape range");
      }
      enc.encode_bits(static_cast<std::uint16_t>(static_cast<std::int16_t>(symbols[i])), kEscapeBits);
    }
  }
  return enc.finish();
}

std::vector<std::int32_t> decode_symbols(std::span<const std::uint8_t> payload, std::size_t count,
                                         const CdfTable& table) {
  if (count > table.size()) {
    throw Error(ErrorCode::kRange, "decode_symbols: " + std::to_string(count) + " symbols but only " +
                                       std::to_string(table.size()) + " tables");
  }
  std::vector<std::int32_t> out;
  if (count == 0) return out;
  out.reserve(count);
  RangeDecoder dec(payload);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t target = dec.target();
    const auto& cdf = table.cumulative(i);
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    const auto s = static_cast<std::size_t>(it - cdf.begin()) - 1;
    dec.consume(cdf[s], cdf[s + 1] - cdf[s]);
    if (s == table.escape_index()) {
      const auto raw = static_cast<std::uint16_t>(dec.decode_bits(kEscapeBits));
      out.push_back(static_cast<std::int16_t>(raw));
    } else {
      out.push_back(static_cast<std::int32_t>(s) - table.bound());
    }
  }
  return out;
}

// ---- container ---------------------------------------------------------

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs) {
  ByteWriter w;
  w.raw(std::string_view("VRPC"));
  w.u8(kBitstreamVersion);
  w.u32(bs.points);
  w.u16(bs.latent);
  w.u16(bs.kept);
  for (const double v : bs.normalization.offset) w.f64(v);
  w.f64(bs.normalization.scale);
  w.u64(bs.model_hash);
  w.u32(static_cast<std::uint32_t>(bs.payload.size()));
  w.u32(crc32(w.bytes()));
  w.raw(bs.payload);
  return w.take();
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kBitstreamHeaderBytes) {
    throw Error(ErrorCode::kCorrupt, "bitstream: " + std::to_string(bytes.size()) + " bytes is shorter than the header");
  }
  ByteReader r(bytes);
  if (r.str(4) != "VRPC") throw Error(ErrorCode::kCorrupt, "bitstream: bad magic");
  const std::uint8_t version = r.u8();
  if (version != kBitstreamVersion) {
    throw Error(ErrorCode::kCorrupt, "bitstream: unsupported version " + std::to_string(version));
  }
  Bitstream bs;
  bs.points = r.u32();
  bs.latent = r.u16();
  bs.kept = r.u16();
  for (double& v : bs.normalization.offset) v = r.f64();
  bs.normalization.scale = r.f64();
  bs.model_hash = r.u64();
  const std::uint32_t payload_len = r.u32();
  const std::uint32_t expected_crc = crc32(bytes.first(r.position()));
  if (r.u32() != expected_crc) throw Error(ErrorCode::kCorrupt, "bitstream: header CRC mismatch");
  if (r.remaining() < payload_len) {
    throw Error(ErrorCode::kCorrupt, "bitstream: payload truncated (" + std::to_string(r.remaining()) + " of " +
                                         std::to_string(payload_len) + " bytes)");
  }
  if (r.remaining() > payload_len) throw Error(ErrorCode::kCorrupt, "bitstream: trailing bytes after payload");
  const auto payload = r.raw(payload_len);
  bs.payload.assign(payload.begin(), payload.end());
  if (bs.kept > bs.latent) throw Error(ErrorCode::kCorrupt, "bitstream: kept length exceeds latent length");
  return bs;
}

}  // namespace vrpc
