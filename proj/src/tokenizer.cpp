#include "dcqa/tokenizer.hpp"

#include <cctype>

namespace dcqa {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

Tokenizer::Tokenizer(int64_t vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size <= kNumReserved) {
        throw ValidationError("tokenizer: vocab_size must exceed the " +
                              std::to_string(kNumReserved) + " reserved ids");
    }
}

int64_t Tokenizer::token_id(const std::string& word) const {
    if (word.empty()) return kUnk;
    const uint64_t h = fnv1a(to_lower(word));
    return kNumReserved + static_cast<int64_t>(h % static_cast<uint64_t>(vocab_size_ - kNumReserved));
}

std::vector<int64_t> Tokenizer::ids(const std::vector<std::string>& words) const {
    std::vector<int64_t> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(token_id(w));
    return out;
}

std::vector<OffsetToken> tokenize_with_offsets(const std::string& text) {
    std::vector<OffsetToken> out;
    const int64_t n = static_cast<int64_t>(text.size());
    int64_t i = 0;
    while (i < n) {
        while (i < n && is_space(text[static_cast<size_t>(i)])) ++i;
        if (i >= n) break;
        const int64_t begin = i;
        while (i < n && !is_space(text[static_cast<size_t>(i)])) ++i;
        out.push_back({text.substr(static_cast<size_t>(begin), static_cast<size_t>(i - begin)),
                       begin, i});
    }
    return out;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
    return out;
}

std::string to_lower(const std::string& s) {
    std::string out = s;
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace dcqa
