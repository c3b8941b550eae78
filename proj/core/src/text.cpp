#include "hybridsent/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "hybridsent/errors.hpp"

namespace hybridsent {

namespace {

bool is_ascii_letter(char c) { return c >= 'a' && c <= 'z'; }

// Decodes one UTF-8 codepoint starting at i; returns its byte length (1 on
// malformed input, which is then treated as a single non-letter byte).
std::size_t utf8_len(const std::string& s, std::size_t i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t n = 1;
    if ((c & 0xE0) == 0xC0) n = 2;
    else if ((c & 0xF0) == 0xE0) n = 3;
    else if ((c & 0xF8) == 0xF0) n = 4;
    if (i + n > s.size()) return 1;
    for (std::size_t k = 1; k < n; ++k) {
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
    }
    return n;
}

std::string lowercase_ascii(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

// A URL is a whitespace-delimited run starting with `<letters>://` or "www.".
bool starts_url(const std::string& s, std::size_t i) {
    if (s.compare(i, 4, "www.") == 0) return true;
    std::size_t k = i;
    while (k < s.size() && is_ascii_letter(s[k])) ++k;
    return k > i && s.compare(k, 3, "://") == 0;
}

std::string strip_urls(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    bool at_word_start = true;
    while (i < s.size()) {
        if (at_word_start && starts_url(s, i)) {
            while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            continue;
        }
        at_word_start = std::isspace(static_cast<unsigned char>(s[i])) != 0;
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

std::string strip_punct_digits(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const std::size_t n = utf8_len(s, i);
        if (n == 1) {
            const unsigned char c = static_cast<unsigned char>(s[i]);
            const bool drop = (c < 0x80) && (std::ispunct(c) || std::isdigit(c));
            if (!drop) out.push_back(s[i]);
        } else {
            out.append(s, i, n);  // multi-byte codepoints handled by the next rule
        }
        i += n;
    }
    return out;
}

// Keeps only lowercase ASCII letters and whitespace; anything else (emoji,
// emoticon fragments, non-Latin script) is dropped. Whitespace is normalized
// to ' ' so later token splitting is uniform.
std::string strip_non_latin(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const std::size_t n = utf8_len(s, i);
        if (n == 1) {
            const char c = s[i];
            if (is_ascii_letter(c)) out.push_back(c);
            else if (std::isspace(static_cast<unsigned char>(c))) out.push_back(' ');
        }
        i += n;
    }
    return out;
}

std::string collapse_repeats(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    std::size_t run = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0 && s[i] == s[i - 1] && is_ascii_letter(s[i])) ++run;
        else run = 1;
        if (run <= 2) out.push_back(s[i]);
    }
    return out;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> words;
    std::istringstream in(s);
    std::string w;
    while (in >> w) words.push_back(std::move(w));
    return words;
}

}  // namespace

SlangDict SlangDict::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open slang dictionary: " + path);
    SlangDict dict;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("slang dictionary " + path + ": missing tab at line " + std::to_string(lineno));
        }
        dict.insert(line.substr(0, tab), line.substr(tab + 1));
    }
    return dict;
}

void SlangDict::insert(std::string slang, std::string canonical) {
    map_[lowercase_ascii(slang)] = std::move(canonical);
}

const std::string* SlangDict::lookup(const std::string& token) const {
    const auto it = map_.find(token);
    return it == map_.end() ? nullptr : &it->second;
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocab file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    Vocab v;
    v.tokens_ = std::move(tokens);
    v.ids_.reserve(v.tokens_.size());
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        v.ids_.emplace(v.tokens_[i], static_cast<std::int32_t>(i));
    }
    v.index_specials();
    return v;
}

void Vocab::index_specials() {
    pad_id_ = id(kPad);
    unk_id_ = id(kUnk);
    cls_id_ = id(kCls);
    sep_id_ = id(kSep);
    if (pad_id_ < 0 || unk_id_ < 0 || cls_id_ < 0 || sep_id_ < 0) {
        throw DataError("vocab is missing one of the special tokens [PAD]/[UNK]/[CLS]/[SEP]");
    }
}

std::int32_t Vocab::id(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? -1 : it->second;
}

std::string clean_text(const std::string& text, const SlangDict& slang) {
    std::string s = lowercase_ascii(text);
    s = strip_urls(s);
    s = strip_punct_digits(s);
    s = strip_non_latin(s);
    s = collapse_repeats(s);

    std::vector<std::string> words = split_ws(s);
    std::string out;
    for (const std::string& w : words) {
        if (w.size() == 1) continue;
        const std::string* canonical = slang.lookup(w);
        const std::string& token = canonical ? *canonical : w;
        if (token.empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out += token;
    }
    return out;
}

LabelVector one_hot(int label) {
    if (label == 0) return {1.0, 0.0};
    if (label == 1) return {0.0, 1.0};
    throw DataError("invalid label " + std::to_string(label) + ": expected 0 or 1");
}

std::vector<std::string> wordpiece_tokenize(const std::string& text, const Vocab& vocab) {
    std::vector<std::string> output;
    for (const std::string& word : split_ws(text)) {
        std::vector<std::string> pieces;
        bool bad = false;
        std::size_t start = 0;
        while (start < word.size()) {
            std::size_t end = word.size();
            std::string match;
            while (start < end) {
                std::string candidate = word.substr(start, end - start);
                if (start > 0) candidate = "##" + candidate;
                if (vocab.id(candidate) >= 0) {
                    match = std::move(candidate);
                    break;
                }
                --end;
            }
            if (match.empty()) {
                bad = true;
                break;
            }
            pieces.push_back(std::move(match));
            start = end;
        }
        if (bad) output.push_back(Vocab::kUnk);
        else output.insert(output.end(), pieces.begin(), pieces.end());
    }
    return output;
}

TokenizedExample encode_tokens(const std::vector<std::string>& tokens, const Vocab& vocab,
                               std::size_t max_len) {
    if (max_len < 2) throw ConfigError("encode_tokens: max_len must be at least 2");
    TokenizedExample ex;
    ex.ids.reserve(max_len);
    ex.ids.push_back(vocab.cls_id());
    const std::size_t keep = std::min(tokens.size(), max_len - 2);
    for (std::size_t i = 0; i < keep; ++i) {
        const std::int32_t id = vocab.id(tokens[i]);
        if (id < 0) {
            throw DataError("encode_tokens: token '" + tokens[i] + "' not in vocab (tokenizer bug)");
        }
        ex.ids.push_back(id);
    }
    ex.ids.push_back(vocab.sep_id());
    const std::size_t used = ex.ids.size();
    ex.ids.resize(max_len, vocab.pad_id());
    ex.attention_mask.assign(max_len, 0);
    for (std::size_t i = 0; i < used; ++i) ex.attention_mask[i] = 1;
    ex.segment_ids.assign(max_len, 0);
    return ex;
}

}  // namespace hybridsent
