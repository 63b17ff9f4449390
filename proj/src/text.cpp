#include "icat/text.hpp"

#include <algorithm>
#include <cctype>

namespace icat {

namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;
};

CodePoint decode_at(std::string_view text, std::size_t pos) {
    const auto lead = static_cast<unsigned char>(text[pos]);
    std::size_t length = 1;
    char32_t value = lead;
    if (lead >= 0xF0 && lead < 0xF8) {
        length = 4;
        value = lead & 0x07;
    } else if (lead >= 0xE0) {
        length = 3;
        value = lead & 0x0F;
    } else if (lead >= 0xC0) {
        length = 2;
        value = lead & 0x1F;
    } else {
        return {value, 1};
    }
    if (pos + length > text.size()) return {lead, 1};
    for (std::size_t i = 1; i < length; ++i) {
        const auto cont = static_cast<unsigned char>(text[pos + i]);
        if ((cont & 0xC0) != 0x80) return {lead, 1};
        value = (value << 6) | (cont & 0x3F);
    }
    return {value, length};
}

bool is_unicode_space(char32_t c) {
    switch (c) {
        case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t pos = 0;
    std::size_t word_begin = std::string_view::npos;
    while (pos < text.size()) {
        const auto cp = decode_at(text, pos);
        if (is_unicode_space(cp.value)) {
            if (word_begin != std::string_view::npos) {
                words.emplace_back(text.substr(word_begin, pos - word_begin));
                word_begin = std::string_view::npos;
            }
        } else if (word_begin == std::string_view::npos) {
            word_begin = pos;
        }
        pos += cp.length;
    }
    if (word_begin != std::string_view::npos) words.emplace_back(text.substr(word_begin));
    return words;
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
    std::string out;
    end = std::min(end, words.size());
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::string join_words(const std::vector<std::string>& words) {
    return join_words(words, 0, words.size());
}

std::string normalize_whitespace(std::string_view text) { return join_words(tokenize_words(text)); }

std::string to_lower_ascii(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view text) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::size_t utf8_length(std::string_view text) {
    std::size_t count = 0;
    for (std::size_t pos = 0; pos < text.size(); ++count) pos += decode_at(text, pos).length;
    return count;
}

std::size_t utf8_offset(std::string_view text, std::size_t index) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < index && pos < text.size(); ++i) pos += decode_at(text, pos).length;
    return pos;
}

std::string utf8_substr(std::string_view text, std::size_t begin, std::size_t end) {
    const auto from = utf8_offset(text, begin);
    const auto to = utf8_offset(text, end);
    return std::string(text.substr(from, to > from ? to - from : 0));
}

std::string_view utf8_truncate(std::string_view text, std::size_t max_chars) {
    return text.substr(0, utf8_offset(text, max_chars));
}

}  // namespace icat
