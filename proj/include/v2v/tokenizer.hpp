#pragma once

#include <string>
#include <vector>

#include "v2v/errors.hpp"

namespace v2v {

/// Byte-level toy vocabulary: ids 0..127 are ASCII bytes, followed by
/// reserved specials. Generated reasoning ids may use the whole vocab.
constexpr int kSystemBeginId = 128;
constexpr int kGenMarkerId = 129;
constexpr int kPadId = 130;
constexpr int kImagePlaceholderId = 131;
constexpr int kFirstFreeTokenId = 132;

inline std::vector<int> tokenize(const std::string& text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (c >= 128)
            fail(ErrorKind::tokenizer, "untokenizable byte 0x" +
                                           [](unsigned char b) {
                                               const char* hex = "0123456789abcdef";
                                               return std::string{hex[b >> 4], hex[b & 15]};
                                           }(c) +
                                           " at position " + std::to_string(i));
        ids.push_back(static_cast<int>(c));
    }
    return ids;
}

inline std::string detokenize(const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id >= 32 && id < 127) {
            out += static_cast<char>(id);
        } else {
            switch (id) {
                case kSystemBeginId: out += "<sys>"; break;
                case kGenMarkerId: out += "<gen>"; break;
                case kPadId: out += "<pad>"; break;
                case kImagePlaceholderId: out += "<img>"; break;
                default: out += "<" + std::to_string(id) + ">"; break;
            }
        }
    }
    return out;
}

}  // namespace v2v
