// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "uvcot/core.hpp"

namespace uvcot {

// Pair schema (one object per line):
//   {"query_id":str,"timestep":int,
//    "context":[{"role":"query|region|answer","text":str,"bbox":[x1,y1,x2,y2]?}],
//    "winner":{"text":str,"bbox":[...]?,"score":num,"score_cur":num,"score_next":num},
//    "loser":{...},"meta":{"gamma":num,"n_candidates":int}}
// Doubles are written as shortest round-trip decimals.

std::string serialize_pair(const PreferencePair& pair);

/// Parses and validates one line. Errors carry the field path of the problem:
/// parse for malformed JSON, missing_field, or invariant.
PreferencePair deserialize_pair(std::string_view line);

std::string serialize_query(const Query& query);
Query deserialize_query(std::string_view line);

std::string serialize_chain(const ResponseChain& chain);

/// Reads non-blank lines. Errors from the per-line parser are rethrown with
/// "line N" prepended to the message.
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);
std::vector<Query> read_queries(const std::filesystem::path& path);

void write_pairs(const std::filesystem::path& path,
                 const std::vector<PreferencePair>& pairs);
void write_queries(const std::filesystem::path& path,
                   const std::vector<Query>& queries);

/// Writes `content` to `path`, throwing Error{io} on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace uvcot
