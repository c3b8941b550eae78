#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace hybridsent {

struct RawExample {
    std::string text;
    int label = 0;  // 0 negative, 1 positive
};

// Slang -> canonical token map, exact whole-token match, keys lowercase.
class SlangDict {
public:
    SlangDict() = default;

    // TSV: `slang<TAB>canonical`, one pair per line.
    static SlangDict load(const std::string& path);

    void insert(std::string slang, std::string canonical);
    const std::string* lookup(const std::string& token) const;
    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::string, std::string> map_;
};

// WordPiece vocabulary: ids are 0-based line indices of the vocab file.
class Vocab {
public:
    static constexpr const char* kPad = "[PAD]";
    static constexpr const char* kUnk = "[UNK]";
    static constexpr const char* kCls = "[CLS]";
    static constexpr const char* kSep = "[SEP]";

    // One token per line; all four special tokens must be present.
    static Vocab load(const std::string& path);
    static Vocab from_tokens(std::vector<std::string> tokens);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(std::size_t id) const { return tokens_[id]; }
    // -1 when absent.
    std::int32_t id(const std::string& token) const;

    std::int32_t pad_id() const { return pad_id_; }
    std::int32_t unk_id() const { return unk_id_; }
    std::int32_t cls_id() const { return cls_id_; }
    std::int32_t sep_id() const { return sep_id_; }

private:
    void index_specials();

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> ids_;
    std::int32_t pad_id_ = -1, unk_id_ = -1, cls_id_ = -1, sep_id_ = -1;
};

// Fixed-length model input: [CLS] tokens... [SEP] [PAD]...
struct TokenizedExample {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> attention_mask;  // 1 iff non-[PAD]
    std::vector<std::uint8_t> segment_ids;     // all zero

    std::size_t length() const { return ids.size(); }
    std::size_t mask_count() const {
        std::size_t n = 0;
        for (const auto m : attention_mask) n += m;
        return n;
    }
};

using LabelVector = std::array<double, 2>;

// Cleaning rules, applied in this fixed order:
//   1. lowercase (ASCII)
//   2. remove URLs (scheme- or "www."-prefixed runs of non-space)
//   3. remove punctuation and digits
//   4. remove codepoints outside basic Latin letters and space
//   5. collapse any letter repeated more than twice to exactly two
//   6. delete single-letter tokens
//   7. replace slang tokens via the dictionary (single pass)
//   8. collapse whitespace and trim
// The order is part of the external contract; clean(clean(x)) == clean(x)
// for dictionaries whose canonical forms are themselves clean tokens.
std::string clean_text(const std::string& text, const SlangDict& slang);

// 0 -> [1,0], 1 -> [0,1]; anything else throws DataError.
LabelVector one_hot(int label);

// Whitespace pre-split, then greedy longest-match-first per word. Non-initial
// sub-tokens carry the "##" prefix; a word with no decomposition maps to [UNK].
std::vector<std::string> wordpiece_tokenize(const std::string& text, const Vocab& vocab);

// [CLS] + tokens truncated to max_len-2 + [SEP], padded with [PAD] to max_len.
TokenizedExample encode_tokens(const std::vector<std::string>& tokens, const Vocab& vocab,
                               std::size_t max_len = 128);

}  // namespace hybridsent
