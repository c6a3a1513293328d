#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "docmrt/model.hpp"

namespace docmrt {

namespace {
constexpr std::string_view kMagic = "docmrt-ckpt";
constexpr std::string_view kVersion = "v1";
}  // namespace

std::string checkpoint_to_string(const ModelParams& params) {
  const auto& d = params.dims();
  std::string out;
  out.reserve(params.size() * 24 + 64);
  out += std::string(kMagic) + " " + std::string(kVersion) + " " + std::to_string(d.vocab) + " " +
         std::to_string(d.embed) + " " + std::to_string(d.hidden) + "\n";
  std::array<char, 64> buf{};
  for (double v : params.values()) {
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw std::runtime_error("failed to format parameter");
    out.append(buf.data(), ptr);
    out += '\n';
  }
  return out;
}

ModelParams checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("checkpoint: missing header");
  auto toks = split_whitespace(header);
  if (toks.size() != 5 || toks[0] != kMagic || toks[1] != kVersion)
    throw std::invalid_argument("checkpoint: bad header '" + header + "'");
  ModelDims dims;
  for (auto [tok, field] : {std::pair{toks[2], &dims.vocab}, {toks[3], &dims.embed}, {toks[4], &dims.hidden}}) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), *field);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw std::invalid_argument("checkpoint: bad dimension '" + std::string(tok) + "'");
  }
  std::vector<double> values;
  values.reserve(ModelParams::param_count(dims));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size())
      throw std::invalid_argument("checkpoint: bad value '" + line + "'");
    values.push_back(v);
  }
  return ModelParams(dims, std::move(values));
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace docmrt
