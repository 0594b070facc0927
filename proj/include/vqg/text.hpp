#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqg/errors.hpp"

namespace vqg::text {

// Trim leading/trailing whitespace and collapse internal runs to one space.
inline std::string normalize_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_run = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_run = !out.empty();
        } else {
            if (in_run) out.push_back(' ');
            in_run = false;
            out.push_back(c);
        }
    }
    return out;
}

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::vector<std::string> ws_tokenize(std::string_view s) {
    std::vector<std::string> toks;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) toks.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return toks;
}

// Metric tokenizer "v1": ASCII-lowercase, split each ASCII punctuation
// character into its own token, keep everything else as word runs.
// All metric scores in this toolkit are defined with respect to this
// tokenizer.
inline constexpr const char* kMetricTokenizerVersion = "v1";

inline std::vector<std::string> metric_tokenize(std::string_view s) {
    std::vector<std::string> toks;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            toks.push_back(cur);
            cur.clear();
        }
    };
    for (char raw : s) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            toks.emplace_back(1, raw);
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return toks;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Porter stemmer (Porter, 1980). Used by the METEOR stem-match stage.
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_consonant(const std::string& w, int i) {
    char c = w[static_cast<size_t>(i)];
    if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
    if (c == 'y') return i == 0 ? true : !is_consonant(w, i - 1);
    return true;
}

// Number of VC sequences in w[0..j].
inline int measure(const std::string& w, int j) {
    int n = 0;
    int i = 0;
    while (true) {
        if (i > j) return n;
        if (!is_consonant(w, i)) break;
        ++i;
    }
    ++i;
    while (true) {
        while (true) {
            if (i > j) return n;
            if (is_consonant(w, i)) break;
            ++i;
        }
        ++i;
        ++n;
        while (true) {
            if (i > j) return n;
            if (!is_consonant(w, i)) break;
            ++i;
        }
        ++i;
    }
}

inline bool has_vowel(const std::string& w, int j) {
    for (int i = 0; i <= j; ++i)
        if (!is_consonant(w, i)) return true;
    return false;
}

inline bool double_consonant(const std::string& w, int j) {
    if (j < 1) return false;
    if (w[static_cast<size_t>(j)] != w[static_cast<size_t>(j - 1)]) return false;
    return is_consonant(w, j);
}

// consonant-vowel-consonant ending where the final consonant is not w/x/y.
inline bool cvc(const std::string& w, int i) {
    if (i < 2 || !is_consonant(w, i) || is_consonant(w, i - 1) || !is_consonant(w, i - 2))
        return false;
    char c = w[static_cast<size_t>(i)];
    return c != 'w' && c != 'x' && c != 'y';
}

inline bool ends_with(const std::string& w, int& j, std::string_view suf) {
    if (w.size() < suf.size()) return false;
    if (w.compare(w.size() - suf.size(), suf.size(), suf) != 0) return false;
    j = static_cast<int>(w.size() - suf.size()) - 1;
    return true;
}

} // namespace detail

// Stems a lowercase ASCII word; returns the input unchanged when shorter
// than 3 characters or containing non-alpha characters.
inline std::string porter_stem(const std::string& word) {
    using namespace detail;
    if (word.size() < 3) return word;
    for (char c : word)
        if (!std::isalpha(static_cast<unsigned char>(c)) ||
            std::isupper(static_cast<unsigned char>(c)))
            return word;

    std::string w = word;
    int j = 0;

    // Step 1a
    if (w.back() == 's') {
        if (ends_with(w, j, "sses")) w.erase(w.size() - 2);
        else if (ends_with(w, j, "ies")) w.erase(w.size() - 2);
        else if (!ends_with(w, j, "ss") && ends_with(w, j, "s")) w.pop_back();
    }

    // Step 1b
    bool step1b_fixup = false;
    if (ends_with(w, j, "eed")) {
        if (measure(w, j) > 0) w.pop_back();
    } else if (ends_with(w, j, "ed") && has_vowel(w, j)) {
        w.erase(w.size() - 2);
        step1b_fixup = true;
    } else if (ends_with(w, j, "ing") && has_vowel(w, j)) {
        w.erase(w.size() - 3);
        step1b_fixup = true;
    }
    if (step1b_fixup) {
        int k = static_cast<int>(w.size()) - 1;
        if (ends_with(w, j, "at") || ends_with(w, j, "bl") || ends_with(w, j, "iz")) {
            w.push_back('e');
        } else if (double_consonant(w, k)) {
            char c = w.back();
            if (c != 'l' && c != 's' && c != 'z') w.pop_back();
        } else if (measure(w, k) == 1 && cvc(w, k)) {
            w.push_back('e');
        }
    }

    // Step 1c
    {
        int k = static_cast<int>(w.size()) - 1;
        if (w.back() == 'y' && has_vowel(w, k - 1)) w.back() = 'i';
    }

    auto replace_if = [&](std::string_view suf, std::string_view rep, int min_m) {
        int jj = 0;
        if (!ends_with(w, jj, suf)) return false;
        if (measure(w, jj) <= min_m - 1) return true; // matched but measure too small
        w.erase(w.size() - suf.size());
        w += rep;
        return true;
    };

    // Step 2 (m > 0)
    switch (w.size() >= 2 ? w[w.size() - 2] : '\0') {
        case 'a':
            if (replace_if("ational", "ate", 1)) break;
            replace_if("tional", "tion", 1);
            break;
        case 'c':
            if (replace_if("enci", "ence", 1)) break;
            replace_if("anci", "ance", 1);
            break;
        case 'e':
            replace_if("izer", "ize", 1);
            break;
        case 'l':
            if (replace_if("abli", "able", 1)) break;
            if (replace_if("alli", "al", 1)) break;
            if (replace_if("entli", "ent", 1)) break;
            if (replace_if("eli", "e", 1)) break;
            replace_if("ousli", "ous", 1);
            break;
        case 'o':
            if (replace_if("ization", "ize", 1)) break;
            if (replace_if("ation", "ate", 1)) break;
            replace_if("ator", "ate", 1);
            break;
        case 's':
            if (replace_if("alism", "al", 1)) break;
            if (replace_if("iveness", "ive", 1)) break;
            if (replace_if("fulness", "ful", 1)) break;
            replace_if("ousness", "ous", 1);
            break;
        case 't':
            if (replace_if("aliti", "al", 1)) break;
            if (replace_if("iviti", "ive", 1)) break;
            replace_if("biliti", "ble", 1);
            break;
        default:
            break;
    }

    // Step 3 (m > 0)
    switch (w.back()) {
        case 'e':
            if (replace_if("icate", "ic", 1)) break;
            if (replace_if("ative", "", 1)) break;
            replace_if("alize", "al", 1);
            break;
        case 'i':
            replace_if("iciti", "ic", 1);
            break;
        case 'l':
            if (replace_if("ical", "ic", 1)) break;
            replace_if("ful", "", 1);
            break;
        case 's':
            replace_if("ness", "", 1);
            break;
        default:
            break;
    }

    // Step 4 (m > 1)
    {
        static const char* suffixes[] = {"al",  "ance", "ence", "er",   "ic",  "able", "ible",
                                         "ant", "ement", "ment", "ent", "ou",  "ism",  "ate",
                                         "iti", "ous",  "ive",  "ize"};
        for (const char* suf : suffixes) {
            int jj = 0;
            if (ends_with(w, jj, suf)) {
                if (measure(w, jj) > 1) w.erase(w.size() - std::string_view(suf).size());
                goto step4_done;
            }
        }
        {
            int jj = 0;
            if (ends_with(w, jj, "ion") && jj >= 0 &&
                (w[static_cast<size_t>(jj)] == 's' || w[static_cast<size_t>(jj)] == 't') &&
                measure(w, jj) > 1) {
                w.erase(w.size() - 3);
            }
        }
    step4_done:;
    }

    // Step 5a
    {
        int k = static_cast<int>(w.size()) - 1;
        if (w.back() == 'e') {
            int m = measure(w, k - 1);
            if (m > 1 || (m == 1 && !cvc(w, k - 1))) w.pop_back();
        }
    }
    // Step 5b
    {
        int k = static_cast<int>(w.size()) - 1;
        if (w.back() == 'l' && double_consonant(w, k) && measure(w, k - 1) > 1) w.pop_back();
    }
    return w;
}

// ---------------------------------------------------------------------------
// Vocabulary with reserved special tokens.
// ---------------------------------------------------------------------------

class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1; // also used as the classifier summary position
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocab() : Vocab(false) {}
    explicit Vocab(bool lowercase) : lowercase_(lowercase) {
        for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) add(t);
    }

    // Deterministic build: frequency-sorted (count desc, token asc).
    static Vocab build(const std::vector<std::string>& texts, bool lowercase,
                       size_t max_size = 0, int min_count = 1) {
        std::unordered_map<std::string, int64_t> counts;
        for (const auto& t : texts) {
            for (auto& tok : ws_tokenize(t)) {
                counts[lowercase ? lower_ascii(tok) : tok]++;
            }
        }
        std::vector<std::pair<std::string, int64_t>> sorted(counts.begin(), counts.end());
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Vocab v(lowercase);
        for (const auto& [tok, count] : sorted) {
            if (count < min_count) break;
            if (max_size > 0 && v.size() >= max_size) break;
            v.add(tok);
        }
        return v;
    }

    int add(const std::string& tok) {
        auto it = ids_.find(tok);
        if (it != ids_.end()) return it->second;
        int id = static_cast<int>(tokens_.size());
        tokens_.push_back(tok);
        ids_.emplace(tok, id);
        return id;
    }

    int id(const std::string& tok) const {
        auto it = ids_.find(lowercase_ ? lower_ascii(tok) : tok);
        return it == ids_.end() ? kUnk : it->second;
    }

    const std::string& token(int id) const {
        if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
            throw DomainError("vocab: token id " + std::to_string(id) + " out of range");
        return tokens_[static_cast<size_t>(id)];
    }

    size_t size() const { return tokens_.size(); }
    bool lowercase() const { return lowercase_; }

    std::vector<int> encode(std::string_view text) const {
        std::vector<int> ids;
        for (auto& tok : ws_tokenize(text)) ids.push_back(id(tok));
        return ids;
    }

    // Joins non-special tokens with single spaces.
    std::string decode(const std::vector<int>& ids) const {
        std::vector<std::string> toks;
        for (int i : ids)
            if (i > kUnk) toks.push_back(token(i));
        return join(toks, " ");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"lowercase", lowercase_}, {"tokens", tokens_}};
    }

    static Vocab from_json(const nlohmann::json& j) {
        Vocab v(j.at("lowercase").get<bool>());
        const auto& toks = j.at("tokens");
        for (size_t i = 4; i < toks.size(); ++i) v.add(toks[i].get<std::string>());
        return v;
    }

private:
    bool lowercase_;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

} // namespace vqg::text
