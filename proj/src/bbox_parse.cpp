// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <charconv>
#include <string>

#include "uvcot/backends.hpp"

namespace uvcot {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_decimal(std::string_view tok, double& out) {
  tok = trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  // Plain decimals only: no exponents, hex, inf or nan.
  for (char c : tok) {
    if (!(c == '-' || c == '.' || (c >= '0' && c <= '9'))) return false;
  }
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out,
                                   std::chars_format::fixed);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

}  // namespace

BoundingBox parse_bbox(std::string_view text, std::optional<Resolution> hint) {
  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    const auto close = text.find_first_of("[]", pos + 1);
    if (close == std::string_view::npos) break;
    if (text[close] == '[') {  // nested or stray bracket; restart from there
      pos = close;
      continue;
    }
    const std::string_view body = text.substr(pos + 1, close - pos - 1);
    std::array<std::string_view, 4> fields;
    std::size_t n = 0;
    std::size_t start = 0;
    bool too_many = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i == body.size() || body[i] == ',') {
        if (n == 4) {
          too_many = true;
          break;
        }
        fields[n++] = body.substr(start, i - start);
        start = i + 1;
      }
    }
    if (too_many || n != 4) {
      pos = close + 1;
      continue;
    }

    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!parse_decimal(fields[i], v[i])) {
        throw Error(ErrorKind::malformed_number,
                    "cannot read '" + std::string(trim(fields[i])) + "' as a decimal", "bbox");
      }
    }
    const bool pixels = v[0] > 1.0 || v[1] > 1.0 || v[2] > 1.0 || v[3] > 1.0;
    if (pixels) {
      if (!hint || !(hint->width > 0.0) || !(hint->height > 0.0)) {
        throw Error(ErrorKind::pixel_coordinates,
                    "coordinates exceed 1 and no image resolution was given", "bbox");
      }
      v[0] /= hint->width;
      v[2] /= hint->width;
      v[1] /= hint->height;
      v[3] /= hint->height;
    }
    if (auto why = BoundingBox::check(v[0], v[1], v[2], v[3]); !why.empty()) {
      throw Error(ErrorKind::invariant, "bounding box " + why, "bbox");
    }
    return BoundingBox(v[0], v[1], v[2], v[3]);
  }
  throw Error(ErrorKind::no_match, "no [x1,y1,x2,y2] group in model output", "bbox");
}

}  // namespace uvcot
