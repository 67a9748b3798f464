// SPDX-License-Identifier: Apache-2.0
#include "uvcot/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace uvcot {

using json = nlohmann::ordered_json;

namespace {

// ---- writing ---------------------------------------------------------------

json bbox_to_json(const BoundingBox& b) {
  return json::array({b.x1(), b.y1(), b.x2(), b.y2()});
}

json step_to_json(const ChainStep& s) {
  json j;
  j["role"] = to_string(s.role);
  j["text"] = s.text;
  if (s.bbox) j["bbox"] = bbox_to_json(*s.bbox);
  return j;
}

json scored_to_json(const ScoredResponse& r) {
  json j;
  j["text"] = r.step.text;
  if (r.step.bbox) j["bbox"] = bbox_to_json(*r.step.bbox);
  j["score"] = r.score;
  j["score_cur"] = r.score_cur;
  j["score_next"] = r.score_next;
  return j;
}

json chain_steps_to_json(const ResponseChain& c) {
  json arr = json::array();
  for (const auto& s : c.steps) arr.push_back(step_to_json(s));
  return arr;
}

// ---- reading ---------------------------------------------------------------

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw Error(ErrorKind::parse, "expected object", path);
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::missing_field, "required field absent",
                path.empty() ? key : path + "." + key);
  }
  return *it;
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

double get_number(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw Error(ErrorKind::parse, "expected number", join(path, key));
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw Error(ErrorKind::parse, "expected integer", join(path, key));
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw Error(ErrorKind::parse, "expected string", join(path, key));
  return v.get<std::string>();
}

BoundingBox bbox_from_json(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 4) {
    throw Error(ErrorKind::parse, "bbox must be an array of 4 numbers", path);
  }
  double c[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!v[i].is_number()) throw Error(ErrorKind::parse, "bbox entry not a number", path);
    c[i] = v[i].get<double>();
  }
  if (auto why = BoundingBox::check(c[0], c[1], c[2], c[3]); !why.empty()) {
    throw Error(ErrorKind::invariant, "bounding box " + why, path);
  }
  return BoundingBox(c[0], c[1], c[2], c[3]);
}

std::optional<BoundingBox> optional_bbox(const json& obj, const std::string& path) {
  auto it = obj.find("bbox");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return bbox_from_json(*it, join(path, "bbox"));
}

ChainStep step_from_json(const json& j, const std::string& path) {
  ChainStep s;
  const std::string role = get_string(j, "role", path);
  try {
    s.role = step_role_from_string(role);
  } catch (const Error& e) {
    throw Error(ErrorKind::invariant, "unknown role '" + role + "'", join(path, "role"));
  }
  s.text = get_string(j, "text", path);
  s.bbox = optional_bbox(j, path);
  return s;
}

ScoredResponse scored_from_json(const json& j, const std::string& path) {
  ScoredResponse r;
  r.step.text = get_string(j, "text", path);
  r.step.bbox = optional_bbox(j, path);
  r.step.role = r.step.bbox ? StepRole::region : StepRole::answer;
  r.score = get_number(j, "score", path);
  r.score_cur = get_number(j, "score_cur", path);
  r.score_next = get_number(j, "score_next", path);
  return r;
}

json parse_line(std::string_view line) {
  try {
    return json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, e.what());
  }
}

template <typename T, typename F>
std::vector<T> read_lines(const std::filesystem::path& path, F&& parse) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(line));
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + " line " + std::to_string(lineno) + ": " + e.what(),
                  e.field());
    }
  }
  return out;
}

}  // namespace

std::string serialize_chain(const ResponseChain& chain) {
  return chain_steps_to_json(chain).dump();
}

std::string serialize_pair(const PreferencePair& pair) {
  json j;
  j["query_id"] = pair.query_id;
  j["timestep"] = pair.timestep;
  j["context"] = chain_steps_to_json(pair.context);
  j["winner"] = scored_to_json(pair.winner);
  j["loser"] = scored_to_json(pair.loser);
  json meta;
  meta["gamma"] = pair.meta.gamma;
  meta["n_candidates"] = pair.meta.n_candidates;
  j["meta"] = std::move(meta);
  // dump() escapes control characters, so the output never spans lines.
  return j.dump();
}

PreferencePair deserialize_pair(std::string_view line) {
  const json j = parse_line(line);
  if (!j.is_object()) throw Error(ErrorKind::parse, "expected a JSON object");
  PreferencePair p;
  p.query_id = get_string(j, "query_id", "");
  p.timestep = get_int(j, "timestep", "");
  const json& ctx = require(j, "context", "");
  if (!ctx.is_array()) throw Error(ErrorKind::parse, "expected array", "context");
  p.context.query_id = p.query_id;
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    p.context.steps.push_back(step_from_json(ctx[i], "context[" + std::to_string(i) + "]"));
  }
  p.winner = scored_from_json(require(j, "winner", ""), "winner");
  p.loser = scored_from_json(require(j, "loser", ""), "loser");
  const json& meta = require(j, "meta", "");
  p.meta.gamma = get_number(meta, "gamma", "meta");
  p.meta.n_candidates = get_int(meta, "n_candidates", "meta");
  validate_pair(p);
  return p;
}

std::string serialize_query(const Query& q) {
  json j;
  j["query_id"] = q.query_id;
  j["question"] = q.question;
  j["task"] = q.task_json.empty() ? json(nullptr) : json::parse(q.task_json);
  return j.dump();
}

Query deserialize_query(std::string_view line) {
  const json j = parse_line(line);
  if (!j.is_object()) throw Error(ErrorKind::parse, "expected a JSON object");
  Query q;
  q.query_id = get_string(j, "query_id", "");
  if (q.query_id.empty()) throw Error(ErrorKind::invariant, "empty query_id", "query_id");
  q.question = get_string(j, "question", "");
  q.task_json = require(j, "task", "").dump();
  return q;
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  return read_lines<PreferencePair>(path, [](const std::string& l) { return deserialize_pair(l); });
}

std::vector<Query> read_queries(const std::filesystem::path& path) {
  return read_lines<Query>(path, [](const std::string& l) { return deserialize_query(l); });
}

void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += serialize_pair(p);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_queries(const std::filesystem::path& path, const std::vector<Query>& queries) {
  std::string out;
  for (const auto& q : queries) {
    out += serialize_query(q);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace uvcot
