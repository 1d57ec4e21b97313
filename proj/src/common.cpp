#include "colabmem/common.hpp"

#include <array>
#include <cmath>
#include <cstddef>

namespace colabmem {

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

std::size_t count_lines(std::string_view text) {
  std::size_t n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  if (!text.empty() && text.back() != '\n') ++n;
  return n;
}

namespace {

// Decodes one UTF-8 code point starting at `i`; returns false on malformed
// input. On success advances `i` and stores the code point in `cp`.
bool decode_utf8(std::string_view s, std::size_t& i, char32_t& cp) {
  unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    cp = b0;
    i += 1;
    return true;
  }
  int len;
  char32_t v;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    v = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    v = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    v = b0 & 0x07;
  } else {
    return false;
  }
  if (i + len > s.size()) return false;
  for (int k = 1; k < len; ++k) {
    unsigned char b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return false;
    v = (v << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (v < kMin[len]) return false;                  // overlong encoding
  if (v >= 0xD800 && v <= 0xDFFF) return false;     // surrogate
  if (v > 0x10FFFF) return false;
  cp = v;
  i += len;
  return true;
}

struct CpRange {
  char32_t lo, hi;
};

// Letter and digit ranges that cover the scripts seen in source corpora.
// Deliberately coarse outside ASCII; the alnum filter only needs a stable,
// reasonable notion of "word-ish" code points.
constexpr std::array<CpRange, 18> kAlnumRanges = {{
    {0x0030, 0x0039},  // digits
    {0x0041, 0x005A},  // A-Z
    {0x0061, 0x007A},  // a-z
    {0x00C0, 0x00D6},  {0x00D8, 0x00F6},  {0x00F8, 0x02AF},  // Latin ext.
    {0x0370, 0x03FF},  // Greek
    {0x0400, 0x04FF},  // Cyrillic
    {0x0590, 0x05F2},  // Hebrew
    {0x0600, 0x06FF},  // Arabic
    {0x0900, 0x097F},  // Devanagari
    {0x0E00, 0x0E5B},  // Thai
    {0x3040, 0x30FF},  // Hiragana, Katakana
    {0x3400, 0x4DBF},  {0x4E00, 0x9FFF},  // CJK
    {0xAC00, 0xD7A3},  // Hangul
    {0xF900, 0xFAFF},  // CJK compat.
    {0xFF10, 0xFF5A},  // fullwidth digits/letters
}};

bool is_alnum_cp(char32_t cp) {
  for (const auto& r : kAlnumRanges) {
    if (cp >= r.lo && cp <= r.hi) return true;
  }
  return false;
}

}  // namespace

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  char32_t cp;
  while (i < text.size()) {
    if (!decode_utf8(text, i, cp)) return false;
  }
  return true;
}

double alnum_fraction(std::string_view text) {
  std::size_t i = 0;
  std::size_t total = 0;
  std::size_t alnum = 0;
  char32_t cp;
  while (i < text.size()) {
    if (!decode_utf8(text, i, cp)) {
      // Malformed byte: count it as one non-alnum code point and resync.
      ++i;
      ++total;
      continue;
    }
    ++total;
    if (is_alnum_cp(cp)) ++alnum;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(alnum) / static_cast<double>(total);
}

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}  // namespace

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                      (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                      static_cast<unsigned char>(bytes[i + 2]);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
    i += 3;
  }
  std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rem == 2) {
    std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                      (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  static const auto value_of = [] {
    std::array<std::int8_t, 256> table;
    table.fill(-1);
    for (int i = 0; i < 64; ++i)
      table[static_cast<unsigned char>(kB64Alphabet[i])] =
          static_cast<std::int8_t>(i);
    return table;
  }();
  if (text.size() % 4 != 0)
    throw Error("encoding", "base64 length must be a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      char c = text[i + j];
      if (c == '=' && i + 4 == text.size() && j >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      std::int8_t d = value_of[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0)
        throw Error("encoding", "invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out += static_cast<char>((v >> 16) & 0xFF);
    if (pad < 2) out += static_cast<char>((v >> 8) & 0xFF);
    if (pad < 1) out += static_cast<char>(v & 0xFF);
  }
  return out;
}

}  // namespace colabmem
