#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace mrp::text {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
        ++begin;
    }
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
        --end;
    }
    return std::string(s.substr(begin, end - begin));
}

inline std::string rstrip(std::string_view s) {
    std::size_t end = s.size();
    while (end > 0 && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
        --end;
    }
    return std::string(s.substr(0, end));
}

/// Splits on '\n'; a trailing '\r' on each line is dropped.
inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '\n') {
            std::string_view line = s.substr(start, i - start);
            if (!line.empty() && line.back() == '\r') {
                line.remove_suffix(1);
            }
            lines.emplace_back(line);
            start = i + 1;
        }
    }
    return lines;
}

/// CRLF and lone CR become LF.
inline std::string normalize_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < s.size() && s[i + 1] == '\n') {
                ++i;
            }
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

inline std::string replace_first(std::string s, std::string_view from, std::string_view to) {
    std::size_t pos = s.find(from);
    if (pos != std::string::npos) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

inline bool is_article(std::string_view token) {
    return token == "a" || token == "an" || token == "the";
}

/// Normalized exact-match form: lowercase, punctuation characters deleted,
/// article tokens dropped, whitespace collapsed to single spaces.
inline std::string normalize_answer(std::string_view s) {
    std::string lowered;
    lowered.reserve(s.size());
    for (char c : s) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::ispunct(uc)) {
            continue;
        }
        lowered.push_back(static_cast<char>(std::tolower(uc)));
    }
    std::string out;
    std::size_t i = 0;
    while (i < lowered.size()) {
        while (i < lowered.size() && std::isspace(static_cast<unsigned char>(lowered[i]))) {
            ++i;
        }
        std::size_t start = i;
        while (i < lowered.size() && !std::isspace(static_cast<unsigned char>(lowered[i]))) {
            ++i;
        }
        std::string_view token(lowered.data() + start, i - start);
        if (token.empty() || is_article(token)) {
            continue;
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out.append(token);
    }
    return out;
}

/// Word tokens for boundary-aware matching: lowercase, every non-alphanumeric
/// byte is a separator, article tokens dropped.
inline std::vector<std::string> normalized_tokens(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !is_article(current)) {
            tokens.push_back(current);
        }
        current.clear();
    };
    for (char c : s) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
inline bool contains_token_run(const std::vector<std::string>& haystack,
                               const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) {
        return false;
    }
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (haystack[i + j] != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) {
            return true;
        }
    }
    return false;
}

} // namespace mrp::text
