#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcqa/common.hpp"

namespace dcqa {

/// Token with its [begin,end) character range in the source string.
struct OffsetToken {
    std::string text;
    int64_t begin = 0;
    int64_t end = 0;
};

/// Whitespace tokenizer, lowercasing, hashing each token into a fixed-size
/// id space. Ids 0..3 are reserved; everything else is an FNV-1a bucket, so
/// unseen words never fail, they just collide.
class Tokenizer {
public:
    static constexpr int64_t kPad = 0;
    static constexpr int64_t kUnk = 1;
    static constexpr int64_t kCls = 2;
    static constexpr int64_t kSep = 3;
    static constexpr int64_t kNumReserved = 4;

    explicit Tokenizer(int64_t vocab_size);

    int64_t vocab_size() const { return vocab_size_; }
    /// Bucket id of one word (lowercased before hashing). Never a reserved id.
    int64_t token_id(const std::string& word) const;
    std::vector<int64_t> ids(const std::vector<std::string>& words) const;

private:
    int64_t vocab_size_;
};

/// Splits on runs of ASCII whitespace, recording character offsets.
std::vector<OffsetToken> tokenize_with_offsets(const std::string& text);
std::vector<std::string> split_words(const std::string& text);
std::string to_lower(const std::string& s);

}  // namespace dcqa
