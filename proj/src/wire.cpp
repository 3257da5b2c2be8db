#include "mbt/wire.hpp"

#include <charconv>

namespace mbt::wire {

namespace {

constexpr const char* kCrlf = "\r\n";

std::optional<std::size_t> parse_size(const std::string& s) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

struct Lines {
    std::string first;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

std::optional<Lines> split_message(const std::string& bytes, std::string* diag) {
    Lines out;
    std::size_t pos = 0;
    bool first = true;
    for (;;) {
        const auto eol = bytes.find(kCrlf, pos);
        if (eol == std::string::npos) {
            if (diag) *diag = "missing CRLF line terminator";
            return std::nullopt;
        }
        const std::string line = bytes.substr(pos, eol - pos);
        pos = eol + 2;
        if (first) {
            out.first = line;
            first = false;
            continue;
        }
        if (line.empty()) break;  // end of headers
        const auto colon = line.find(": ");
        if (colon == std::string::npos) {
            if (diag) *diag = "malformed header line: " + line;
            return std::nullopt;
        }
        out.headers.emplace_back(line.substr(0, colon), line.substr(colon + 2));
    }
    out.body = bytes.substr(pos);
    return out;
}

std::optional<std::size_t> content_length(const Lines& lines, std::string* diag) {
    for (const auto& [name, value] : lines.headers) {
        if (name == "Content-Length") {
            const auto n = parse_size(value);
            if (!n && diag) *diag = "unparseable Content-Length: " + value;
            return n;
        }
    }
    if (diag) *diag = "missing Content-Length";
    return std::nullopt;
}

}  // namespace

const char* reason_phrase(int status) {
    switch (status) {
        case 200: return "OK";
        case 204: return "No Content";
        case 304: return "Not Modified";
        case 403: return "Forbidden";
        case 404: return "Not Found";
        case 412: return "Precondition Failed";
        default: return "Unknown";
    }
}

std::string encode_request(const http::Request& q) {
    std::string out = q.method == http::Method::Get ? "GET " : "PUT ";
    out += q.target;
    out += " HTTP/1.1";
    out += kCrlf;
    if (q.precondition) {
        out += q.precondition->kind == http::PrecondKind::IfMatch ? "If-Match: "
                                                                  : "If-None-Match: ";
        out += q.precondition->etag;
        out += kCrlf;
    }
    out += "Content-Length: " + std::to_string(q.body.size());
    out += kCrlf;
    out += kCrlf;
    out += q.body;
    return out;
}

std::string encode_response(const http::ConcreteResponse& a) {
    std::string out = "HTTP/1.1 " + std::to_string(a.status) + " " + reason_phrase(a.status);
    out += kCrlf;
    for (const auto& [name, value] : a.fields) {
        out += name + ": " + value;
        out += kCrlf;
    }
    out += kCrlf;
    out += a.body;
    return out;
}

std::optional<http::Request> decode_request(const std::string& bytes, std::string* diag) {
    const auto lines = split_message(bytes, diag);
    if (!lines) return std::nullopt;

    http::Request q;
    if (lines->first.rfind("GET ", 0) == 0) q.method = http::Method::Get;
    else if (lines->first.rfind("PUT ", 0) == 0) q.method = http::Method::Put;
    else {
        if (diag) *diag = "unsupported method in: " + lines->first;
        return std::nullopt;
    }
    const auto space = lines->first.find(' ', 4);
    if (space == std::string::npos || lines->first.substr(space + 1) != "HTTP/1.1") {
        if (diag) *diag = "malformed request line: " + lines->first;
        return std::nullopt;
    }
    q.target = lines->first.substr(4, space - 4);
    if (q.target.empty()) {
        if (diag) *diag = "empty request target";
        return std::nullopt;
    }

    std::optional<std::size_t> length;
    for (const auto& [name, value] : lines->headers) {
        if (name == "Content-Length") {
            length = parse_size(value);
            if (!length) {
                if (diag) *diag = "unparseable Content-Length: " + value;
                return std::nullopt;
            }
        } else if (name == "If-Match" || name == "If-None-Match") {
            if (q.precondition) {
                if (diag) *diag = "multiple preconditions";
                return std::nullopt;
            }
            if (value.empty()) {
                if (diag) *diag = "empty precondition ETag";
                return std::nullopt;
            }
            q.precondition = http::Precondition{
                name == "If-Match" ? http::PrecondKind::IfMatch : http::PrecondKind::IfNoneMatch,
                value};
        } else {
            if (diag) *diag = "unsupported request header: " + name;
            return std::nullopt;
        }
    }
    if (!length) {
        if (diag) *diag = "missing Content-Length";
        return std::nullopt;
    }
    if (*length != lines->body.size()) {
        if (diag) *diag = "Content-Length disagrees with the body";
        return std::nullopt;
    }
    q.body = lines->body;
    if (q.method == http::Method::Get && !q.body.empty()) {
        if (diag) *diag = "GET with a nonempty body";
        return std::nullopt;
    }
    return q;
}

std::optional<http::ConcreteResponse> decode_response(const std::string& bytes,
                                                      std::string* diag) {
    const auto lines = split_message(bytes, diag);
    if (!lines) return std::nullopt;

    if (lines->first.rfind("HTTP/1.1 ", 0) != 0 || lines->first.size() < 12) {
        if (diag) *diag = "malformed status line: " + lines->first;
        return std::nullopt;
    }
    http::ConcreteResponse a;
    const std::string code = lines->first.substr(9, 3);
    const auto parsed = parse_size(code);
    if (!parsed) {
        if (diag) *diag = "malformed status code: " + lines->first;
        return std::nullopt;
    }
    a.status = static_cast<int>(*parsed);
    a.fields = lines->headers;

    const auto length = content_length(*lines, diag);
    if (!length) return std::nullopt;
    if (*length != lines->body.size()) {
        if (diag) *diag = "Content-Length disagrees with the body";
        return std::nullopt;
    }
    a.body = lines->body;
    return a;
}

std::optional<std::size_t> frame_one(const std::string& buffer) {
    const auto end_of_headers = buffer.find("\r\n\r\n");
    if (end_of_headers == std::string::npos) return std::nullopt;
    const std::size_t header_len = end_of_headers + 4;

    // Scan the headers for Content-Length; absence means the message is as
    // long as its headers (decode will complain).
    std::size_t body_len = 0;
    std::size_t pos = 0;
    while (pos < end_of_headers) {
        auto eol = buffer.find("\r\n", pos);
        if (eol == std::string::npos || eol > end_of_headers) eol = end_of_headers;
        const std::string line = buffer.substr(pos, eol - pos);
        if (line.rfind("Content-Length: ", 0) == 0) {
            if (const auto n = parse_size(line.substr(16))) body_len = *n;
        }
        pos = eol + 2;
    }
    if (buffer.size() < header_len + body_len) return std::nullopt;
    return header_len + body_len;
}

}  // namespace mbt::wire
