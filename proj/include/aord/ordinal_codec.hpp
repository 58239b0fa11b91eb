#pragma once

// Cumulative ("class >= threshold") binary coding of ordinal labels.
//
// A label k out of K classes becomes K-1 bits with exactly k leading ones:
// k=3, K=5 -> [1,1,1,0]. The autoregressive decoder predicts the bits one at
// a time, so the token stream is framed by BOS/EOS sentinels.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace aord {

struct OrdinalLabel {
  int k = 0;
  int num_classes = 2;
};

enum class Token : std::uint8_t { Zero = 0, One = 1, Bos = 2, Eos = 3 };

using CumulativeCode = std::vector<std::uint8_t>;
using TokenSequence = std::vector<Token>;

struct DecodedLabel {
  OrdinalLabel label;
  bool valid = true;
};

// Throws std::invalid_argument when k is outside [0, K-1] or K < 2.
void check_label(const OrdinalLabel& label);

CumulativeCode encode_label(const OrdinalLabel& label);

// k is the number of leading ones; bits after the first zero are ignored.
// valid is false when the bits are not non-increasing.
DecodedLabel decode_code(std::span<const std::uint8_t> code);

bool is_valid_code(std::span<const std::uint8_t> code);

TokenSequence to_token_sequence(std::span<const std::uint8_t> code);

// BOS followed by the first `steps` bits of the code.
TokenSequence prefix_tokens(std::span<const std::uint8_t> bits, int steps);

Token bit_token(std::uint8_t bit);

std::string to_string(Token token);
std::string to_string(std::span<const Token> tokens);

}  // namespace aord
