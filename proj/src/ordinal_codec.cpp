#include "aord/ordinal_codec.hpp"

#include <stdexcept>

namespace aord {

void check_label(const OrdinalLabel& label) {
  if (label.num_classes < 2) {
    throw std::invalid_argument("class count must be >= 2, got " +
                                std::to_string(label.num_classes));
  }
  if (label.k < 0 || label.k >= label.num_classes) {
    throw std::invalid_argument("label " + std::to_string(label.k) + " outside [0, " +
                                std::to_string(label.num_classes - 1) + "]");
  }
}

CumulativeCode encode_label(const OrdinalLabel& label) {
  check_label(label);
  CumulativeCode code(static_cast<std::size_t>(label.num_classes - 1), 0);
  for (int i = 0; i < label.k; ++i) code[static_cast<std::size_t>(i)] = 1;
  return code;
}

bool is_valid_code(std::span<const std::uint8_t> code) {
  for (std::size_t i = 1; i < code.size(); ++i) {
    if (code[i] > code[i - 1]) return false;
  }
  return true;
}

DecodedLabel decode_code(std::span<const std::uint8_t> code) {
  if (code.empty()) throw std::invalid_argument("cannot decode an empty code");
  int leading = 0;
  while (static_cast<std::size_t>(leading) < code.size() && code[static_cast<std::size_t>(leading)] != 0) {
    ++leading;
  }
  return {{leading, static_cast<int>(code.size()) + 1}, is_valid_code(code)};
}

Token bit_token(std::uint8_t bit) { return bit != 0 ? Token::One : Token::Zero; }

TokenSequence to_token_sequence(std::span<const std::uint8_t> code) {
  TokenSequence seq;
  seq.reserve(code.size() + 2);
  seq.push_back(Token::Bos);
  for (auto b : code) seq.push_back(bit_token(b));
  seq.push_back(Token::Eos);
  return seq;
}

TokenSequence prefix_tokens(std::span<const std::uint8_t> bits, int steps) {
  if (steps < 0 || static_cast<std::size_t>(steps) > bits.size()) {
    throw std::invalid_argument("prefix length out of range");
  }
  TokenSequence seq;
  seq.reserve(static_cast<std::size_t>(steps) + 1);
  seq.push_back(Token::Bos);
  for (int i = 0; i < steps; ++i) seq.push_back(bit_token(bits[static_cast<std::size_t>(i)]));
  return seq;
}

std::string to_string(Token token) {
  switch (token) {
    case Token::Zero: return "0";
    case Token::One: return "1";
    case Token::Bos: return "<BOS>";
    case Token::Eos: return "<EOS>";
  }
  return "?";
}

std::string to_string(std::span<const Token> tokens) {
  std::string out = "[";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ",";
    out += to_string(tokens[i]);
  }
  return out + "]";
}

}  // namespace aord
