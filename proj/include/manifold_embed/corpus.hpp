#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "manifold_embed/csv.hpp"
#include "manifold_embed/errors.hpp"
#include "manifold_embed/file_util.hpp"
#include "manifold_embed/rng.hpp"

namespace manifold_embed {

struct Document {
    std::string text;
    int label = 0;       // 0-based class index into the owning corpus' label_names
    std::size_t id = 0;  // ordinal within corpus
};

struct LabeledCorpus {
    std::vector<Document> documents;
    std::vector<std::string> label_names;

    std::size_t size() const { return documents.size(); }
    std::size_t num_classes() const { return label_names.size(); }

    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(documents.size());
        for (const auto& d : documents) out.push_back(d.label);
        return out;
    }
};

struct Vocabulary {
    static constexpr std::uint32_t kPadId = 0;
    static constexpr std::uint32_t kUnkId = 1;

    std::unordered_map<std::string, std::uint32_t> token_to_id;
    std::vector<std::string> id_to_token;          // dense ids, [0, size)
    std::vector<std::uint64_t> frequencies;        // corpus counts; 0 for PAD/UNK

    std::size_t size() const { return id_to_token.size(); }

    std::uint32_t id_of(const std::string& token) const {
        auto it = token_to_id.find(token);
        return it == token_to_id.end() ? kUnkId : it->second;
    }
};

struct TokenizedDoc {
    std::vector<std::uint32_t> token_ids;  // never empty; [PAD] when the text has no tokens
};

struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
};

namespace detail {

inline bool is_token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

// Lowercase, split on every non-alphanumeric character, drop empties.
// Whitespace-delimited words starting with "http" are dropped whole, so a
// URL does not shed its path segments into the token stream.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && detail::is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < n && !detail::is_space(text[j])) ++j;
        if (j > i) {
            const bool is_url = j - i >= 4 &&
                                detail::ascii_lower(text[i]) == 'h' &&
                                detail::ascii_lower(text[i + 1]) == 't' &&
                                detail::ascii_lower(text[i + 2]) == 't' &&
                                detail::ascii_lower(text[i + 3]) == 'p';
            if (!is_url) {
                std::string tok;
                for (std::size_t k = i; k < j; ++k) {
                    const char c = detail::ascii_lower(text[k]);
                    if (detail::is_token_char(c)) {
                        tok.push_back(c);
                    } else if (!tok.empty()) {
                        tokens.push_back(std::move(tok));
                        tok.clear();
                    }
                }
                if (!tok.empty()) tokens.push_back(std::move(tok));
            }
        }
        i = j;
    }
    return tokens;
}

inline const std::array<std::string, 4>& ag_news_label_names() {
    static const std::array<std::string, 4> names = {"World", "Sports", "Business",
                                                     "Sci/Tech"};
    return names;
}

// AG News CSV: 3 columns (class index 1-4, title, description), no header.
inline LabeledCorpus load_ag_news_csv(const std::string& path,
                                      std::optional<std::size_t> max_rows = {}) {
    const auto rows = parse_csv(read_text_file(path));
    LabeledCorpus corpus;
    corpus.label_names.assign(ag_news_label_names().begin(), ag_news_label_names().end());
    for (const auto& row : rows) {
        if (max_rows && corpus.documents.size() >= *max_rows) break;
        if (row.fields.size() != 3)
            throw IoError("ag_news row " + std::to_string(row.row_number) +
                          ": expected 3 fields, got " + std::to_string(row.fields.size()));
        const std::string cls = detail::trim(row.fields[0]);
        if (cls.size() != 1 || cls[0] < '1' || cls[0] > '4')
            throw IoError("ag_news row " + std::to_string(row.row_number) +
                          ": class index '" + cls + "' outside 1-4");
        Document doc;
        doc.text = row.fields[1] + " " + row.fields[2];
        doc.label = cls[0] - '1';
        doc.id = corpus.documents.size();
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

inline const std::array<std::string, 16>& mbti_type_codes() {
    static const std::array<std::string, 16> codes = {
        "ENFJ", "ENFP", "ENTJ", "ENTP", "ESFJ", "ESFP", "ESTJ", "ESTP",
        "INFJ", "INFP", "INTJ", "INTP", "ISFJ", "ISFP", "ISTJ", "ISTP"};
    return codes;
}

// MBTI CSV: header `type,posts`; posts are `|||`-joined. Label indices are
// frozen alphabetically after loading so they do not depend on row order.
inline LabeledCorpus load_mbti_csv(const std::string& path,
                                   std::optional<std::size_t> max_rows = {}) {
    const auto rows = parse_csv(read_text_file(path));
    if (rows.empty()) throw IoError("mbti file is empty: " + path);
    {
        const auto& hdr = rows.front().fields;
        auto lower = [](std::string s) {
            for (auto& c : s) c = detail::ascii_lower(c);
            return detail::trim(s);
        };
        if (hdr.size() != 2 || lower(hdr[0]) != "type" || lower(hdr[1]) != "posts")
            throw IoError("mbti row 1: expected header 'type,posts'");
    }

    std::vector<std::string> seen_codes;   // first-appearance order
    std::vector<std::string> doc_codes;    // per-document type code
    std::vector<std::string> doc_texts;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (max_rows && doc_texts.size() >= *max_rows) break;
        const auto& row = rows[r];
        if (row.fields.size() != 2)
            throw IoError("mbti row " + std::to_string(row.row_number) +
                          ": expected 2 fields, got " + std::to_string(row.fields.size()));
        std::string code = detail::trim(row.fields[0]);
        for (auto& c : code) c = char(detail::ascii_lower(c) - 'a' + 'A');
        const auto& known = mbti_type_codes();
        if (std::find(known.begin(), known.end(), code) == known.end())
            throw IoError("mbti row " + std::to_string(row.row_number) +
                          ": unknown type code '" + detail::trim(row.fields[0]) + "'");
        if (std::find(seen_codes.begin(), seen_codes.end(), code) == seen_codes.end())
            seen_codes.push_back(code);

        std::string text = row.fields[1];
        for (std::size_t p = text.find("|||"); p != std::string::npos; p = text.find("|||", p))
            text.replace(p, 3, " ");
        doc_codes.push_back(std::move(code));
        doc_texts.push_back(std::move(text));
    }

    std::sort(seen_codes.begin(), seen_codes.end());
    std::unordered_map<std::string, int> code_index;
    for (std::size_t i = 0; i < seen_codes.size(); ++i)
        code_index[seen_codes[i]] = static_cast<int>(i);

    LabeledCorpus corpus;
    corpus.label_names = std::move(seen_codes);
    corpus.documents.reserve(doc_texts.size());
    for (std::size_t i = 0; i < doc_texts.size(); ++i)
        corpus.documents.push_back(
            {std::move(doc_texts[i]), code_index[doc_codes[i]], i});
    return corpus;
}

// Top (max_size - 2) tokens by frequency, ties broken lexicographically
// ascending; PAD=0 and UNK=1 are always present.
inline Vocabulary build_vocabulary(const LabeledCorpus& corpus, std::size_t max_size,
                                   std::size_t min_count) {
    if (max_size < 3)
        throw ConfigError("build_vocabulary: max_size must be >= 3 (PAD, UNK, one token)");
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& doc : corpus.documents)
        for (auto& tok : tokenize(doc.text)) ++counts[tok];

    std::vector<std::pair<std::string, std::uint64_t>> ranked;
    ranked.reserve(counts.size());
    for (auto& kv : counts)
        if (kv.second >= min_count) ranked.emplace_back(kv.first, kv.second);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_size - 2) ranked.resize(max_size - 2);

    Vocabulary vocab;
    vocab.id_to_token = {"<pad>", "<unk>"};
    vocab.frequencies = {0, 0};
    for (auto& [tok, count] : ranked) {
        vocab.token_to_id.emplace(tok, static_cast<std::uint32_t>(vocab.id_to_token.size()));
        vocab.id_to_token.push_back(tok);
        vocab.frequencies.push_back(count);
    }
    return vocab;
}

// Tokenize, map to ids (UNK for out-of-vocabulary), truncate to max_len.
// An empty text encodes as a single PAD so pooling always has one row.
inline TokenizedDoc encode(const Document& doc, const Vocabulary& vocab,
                           std::size_t max_len) {
    if (max_len < 1) throw ConfigError("encode: max_len must be >= 1");
    TokenizedDoc out;
    for (const auto& tok : tokenize(doc.text)) {
        if (out.token_ids.size() >= max_len) break;
        out.token_ids.push_back(vocab.id_of(tok));
    }
    if (out.token_ids.empty()) out.token_ids.push_back(Vocabulary::kPadId);
    return out;
}

// Per-class shuffle then split. Test share per class is round(size * fraction)
// clamped to [1, size-1]; original document order is preserved on both sides.
inline std::pair<LabeledCorpus, LabeledCorpus> stratified_split(
    const LabeledCorpus& corpus, double test_fraction, SeededRng& rng) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("stratified_split: test_fraction must be in (0, 1)");

    std::vector<std::vector<std::size_t>> by_class(corpus.num_classes());
    for (std::size_t i = 0; i < corpus.documents.size(); ++i)
        by_class[corpus.documents[i].label].push_back(i);

    std::vector<char> is_test(corpus.documents.size(), 0);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < 2)
            throw ConfigError("stratified_split: class '" + corpus.label_names[c] +
                              "' has fewer than 2 documents");
        rng.shuffle(members);
        const auto size = members.size();
        auto test_count = static_cast<std::size_t>(
            std::llround(static_cast<double>(size) * test_fraction));
        test_count = std::clamp<std::size_t>(test_count, 1, size - 1);
        for (std::size_t k = 0; k < test_count; ++k) is_test[members[k]] = 1;
    }

    LabeledCorpus train, test;
    train.label_names = corpus.label_names;
    test.label_names = corpus.label_names;
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        auto& side = is_test[i] ? test : train;
        Document doc = corpus.documents[i];
        doc.id = side.documents.size();
        side.documents.push_back(std::move(doc));
    }
    return {std::move(train), std::move(test)};
}

// `batch` triplets: anchor uniform over all docs (classes with one member are
// resampled), positive uniform over the anchor's class excluding the anchor,
// negative uniform over every other-class doc.
inline std::vector<Triplet> sample_triplets(const std::vector<int>& labels,
                                            std::size_t batch, SeededRng& rng) {
    const std::size_t n = labels.size();
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    std::vector<std::vector<std::size_t>> by_class(max_label + 1);
    std::vector<std::size_t> pos_in_class(n);
    for (std::size_t i = 0; i < n; ++i) {
        pos_in_class[i] = by_class[labels[i]].size();
        by_class[labels[i]].push_back(i);
    }
    std::size_t classes_present = 0;
    bool any_pair = false;
    for (const auto& members : by_class) {
        if (!members.empty()) ++classes_present;
        if (members.size() >= 2) any_pair = true;
    }
    if (classes_present < 2)
        throw ConfigError("sample_triplets: need at least 2 classes present");
    if (!any_pair)
        throw ConfigError("sample_triplets: no class has >= 2 documents");

    std::vector<Triplet> out;
    out.reserve(batch);
    for (std::size_t t = 0; t < batch; ++t) {
        std::size_t anchor = rng.next_index(n);
        while (by_class[labels[anchor]].size() < 2) anchor = rng.next_index(n);
        const auto& cls = by_class[labels[anchor]];

        std::size_t j = rng.next_index(cls.size() - 1);
        if (j >= pos_in_class[anchor]) ++j;
        const std::size_t positive = cls[j];

        std::size_t k = rng.next_index(n - cls.size());
        std::size_t negative = 0;
        for (int c = 0; c <= max_label; ++c) {
            if (c == labels[anchor]) continue;
            if (k < by_class[c].size()) {
                negative = by_class[c][k];
                break;
            }
            k -= by_class[c].size();
        }
        out.push_back({anchor, positive, negative});
    }
    return out;
}

// File-order prefix of n documents, or a per-class-balanced prefix when
// `balanced` is set (quota n / num_present_classes, backfilled in file order
// if some class runs short).
inline LabeledCorpus subsample(const LabeledCorpus& corpus, std::size_t n, bool balanced) {
    LabeledCorpus out;
    out.label_names = corpus.label_names;
    if (n >= corpus.documents.size() && !balanced) n = corpus.documents.size();

    std::vector<char> taken(corpus.documents.size(), 0);
    std::vector<std::size_t> picked;
    if (balanced) {
        std::vector<std::size_t> class_counts(corpus.num_classes(), 0);
        std::size_t present = 0;
        for (const auto& d : corpus.documents) ++class_counts[d.label];
        for (auto c : class_counts)
            if (c > 0) ++present;
        const std::size_t quota = present == 0 ? 0 : std::max<std::size_t>(1, n / present);
        std::vector<std::size_t> used(corpus.num_classes(), 0);
        for (std::size_t i = 0; i < corpus.documents.size() && picked.size() < n; ++i) {
            const int label = corpus.documents[i].label;
            if (used[label] < quota) {
                ++used[label];
                taken[i] = 1;
                picked.push_back(i);
            }
        }
    }
    for (std::size_t i = 0; i < corpus.documents.size() && picked.size() < n; ++i) {
        if (!taken[i]) {
            taken[i] = 1;
            picked.push_back(i);
        }
    }
    std::sort(picked.begin(), picked.end());
    for (auto i : picked) {
        Document doc = corpus.documents[i];
        doc.id = out.documents.size();
        out.documents.push_back(std::move(doc));
    }
    return out;
}

}  // namespace manifold_embed
