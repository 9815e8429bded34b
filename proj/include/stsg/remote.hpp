#pragma once

#include <filesystem>

#include "stsg/data.hpp"

#include <httplib.h>

namespace stsg {

// Typed failure modes of the cue service client. timeout and connection
// failures are retryable; schema violations are not.
struct RemoteError : std::runtime_error {
    enum class Kind { timeout, connection, schema };
    Kind kind;
    bool retryable;

    RemoteError(Kind k, const std::string& msg)
        : std::runtime_error(msg), kind(k), retryable(k != Kind::schema) {}
};

// Fetches one frame's cues from GET /cues?video=..&frame=..&objects=..&predicates=..
// The response body is a single record in the cue file schema.
inline FrameCues fetch_cues_remote(const std::string& host, int port, int video, int frame,
                                   const Vocabulary& vocab, int timeout_ms = 2000) {
    httplib::Client client(host, port);
    client.set_connection_timeout(0, timeout_ms * 1000);
    client.set_read_timeout(0, timeout_ms * 1000);

    httplib::Params params;
    params.emplace("video", std::to_string(video));
    params.emplace("frame", std::to_string(frame));
    std::string objects, predicates;
    for (size_t i = 0; i < vocab.objects.size(); ++i)
        objects += (i ? "," : "") + vocab.objects[i];
    for (size_t i = 0; i < vocab.predicates.size(); ++i)
        predicates += (i ? "," : "") + vocab.predicates[i];
    params.emplace("objects", objects);
    params.emplace("predicates", predicates);

    auto res = client.Get("/cues", params, httplib::Headers{});
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write)
            throw RemoteError(RemoteError::Kind::timeout,
                              "cue service timed out: " + httplib::to_string(err));
        throw RemoteError(RemoteError::Kind::connection,
                          "cue service unreachable: " + httplib::to_string(err));
    }
    if (res->status != 200)
        throw RemoteError(RemoteError::Kind::schema,
                          "cue service returned status " + std::to_string(res->status));

    std::string line = res->body;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    FrameCues fc;
    try {
        fc = detail::parse_cue_record(line, 1);
    } catch (const ParseError& e) {
        throw RemoteError(RemoteError::Kind::schema,
                          std::string("malformed cue service response: ") + e.what());
    }
    if (fc.video != video || fc.frame != frame)
        throw RemoteError(RemoteError::Kind::schema, "cue service answered for a different frame");
    return fc;
}

// File-backed cache in the cue file format: a hit skips the network, a miss
// fetches and appends. Nothing is written unless the response parses.
class CueCache {
  public:
    explicit CueCache(std::string path) : path_(std::move(path)) {
        if (std::filesystem::exists(path_))
            for (FrameCues& fc : load_cues(path_)) cached_.push_back(std::move(fc));
    }

    FrameCues get(const std::string& host, int port, int video, int frame, const Vocabulary& vocab,
                  int timeout_ms = 2000) {
        for (const FrameCues& fc : cached_)
            if (fc.video == video && fc.frame == frame) return fc;
        FrameCues fc = fetch_cues_remote(host, port, video, frame, vocab, timeout_ms);
        cached_.push_back(fc);
        save_cues(path_, cached_);
        return fc;
    }

    const std::vector<FrameCues>& entries() const { return cached_; }

  private:
    std::string path_;
    std::vector<FrameCues> cached_;
};

}  // namespace stsg
