#pragma once

// Byte-level codec for the HTTP/1.1 subset: GET/PUT requests with optional
// If-Match / If-None-Match preconditions, responses with the five subset
// status codes (any code decodes, for misbehaving implementations). CRLF
// line endings, Content-Length always present and correct, one message per
// exchange unit.

#include <optional>
#include <string>

#include "mbt/http_model.hpp"

namespace mbt::wire {

std::string encode_request(const http::Request& q);
std::string encode_response(const http::ConcreteResponse& a);

// Nothing on any deviation from the subset grammar; *diag says why.
std::optional<http::Request> decode_request(const std::string& bytes, std::string* diag = nullptr);
std::optional<http::ConcreteResponse> decode_response(const std::string& bytes,
                                                      std::string* diag = nullptr);

// Length of the first complete message in buffer (headers plus
// Content-Length body), or nothing if more bytes are needed. Malformed
// framing (no Content-Length once headers are complete) reports a length so
// the caller's decode can fail loudly.
std::optional<std::size_t> frame_one(const std::string& buffer);

const char* reason_phrase(int status);

}  // namespace mbt::wire
