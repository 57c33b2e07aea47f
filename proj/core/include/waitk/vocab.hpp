#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace waitk {

using TokenId = std::int32_t;

// Reserved ids; learned subwords start after them.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kBtTag = 4;
inline constexpr TokenId kAsrTag = 5;
inline constexpr TokenId kNumSpecials = 6;

inline constexpr std::array<std::string_view, kNumSpecials> kSpecialTokens = {
    "<pad>", "<s>", "</s>", "<unk>", "<BT>", "<ASR>"};

}  // namespace waitk
