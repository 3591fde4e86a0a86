#include "capenrich/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "capenrich/error.hpp"

namespace capenrich {

namespace {

constexpr std::string_view kMagic = "TLM1";
constexpr int kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void put_tensor(std::string& out, const Mat& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
}

void get_tensor(std::string_view in, std::size_t& at, Mat& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
    m.data()[i] = std::bit_cast<double>(bits);
    at += 8;
  }
}

nlohmann::ordered_json config_json(const TinyLMConfig& c) {
  nlohmann::ordered_json j;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["n_layers"] = c.n_layers;
  j["d_ffn"] = c.d_ffn;
  j["max_seq"] = c.max_seq;
  j["n_visual"] = c.n_visual;
  j["embed_dim"] = c.embed_dim;
  j["vocab_size"] = c.vocab_size;
  j["seed"] = c.seed;
  return j;
}

TinyLMConfig config_from_json(const nlohmann::ordered_json& j) {
  TinyLMConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.d_ffn = j.at("d_ffn").get<int>();
  c.max_seq = j.at("max_seq").get<int>();
  c.n_visual = j.at("n_visual").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

}  // namespace

const PromptTable* TinyLMCheckpoint::find_prompt(std::string_view name) const {
  for (const auto& p : prompts)
    if (p.name == name) return &p;
  return nullptr;
}

void TinyLMCheckpoint::put_prompt(PromptTable table) {
  for (auto& p : prompts) {
    if (p.name == table.name) {
      p = std::move(table);
      return;
    }
  }
  prompts.push_back(std::move(table));
}

std::string backbone_bytes(const TinyLMParams& params) {
  std::string out;
  params.for_each([&](const std::string&, const Mat& m) { put_tensor(out, m); });
  return out;
}

std::string serialize_checkpoint(const TinyLMCheckpoint& ckpt) {
  if (ckpt.vocab.size() != ckpt.params.config.vocab_size)
    throw ValidationError("checkpoint: vocabulary size does not match config");
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["config"] = config_json(ckpt.params.config);
  header["vocab_hash"] = hex64(ckpt.vocab.hash());
  header["vocab"] = ckpt.vocab.tokens();
  auto tensors = nlohmann::ordered_json::array();
  ckpt.params.for_each([&](const std::string& name, const Mat& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  header["tensors"] = tensors;
  auto prompts = nlohmann::ordered_json::array();
  for (const auto& p : ckpt.prompts)
    prompts.push_back({{"name", p.name}, {"rows", p.vectors.rows()}, {"cols", p.vectors.cols()}});
  header["prompts"] = prompts;
  header["train"] = ckpt.train_info;

  std::string head = header.dump();
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(head.size()));
  out += head;
  out += backbone_bytes(ckpt.params);
  for (const auto& p : ckpt.prompts) put_tensor(out, p.vectors);
  return out;
}

TinyLMCheckpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != kMagic) throw ParseError("checkpoint: bad magic");
  std::uint32_t head_len = get_u32(bytes, 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(head_len)) throw ParseError("checkpoint: truncated header");
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(8, head_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint: header: ") + e.what());
  }

  TinyLMCheckpoint ckpt;
  try {
    if (header.at("format_version").get<int>() != kFormatVersion)
      throw ParseError("checkpoint: unsupported format version " + header.at("format_version").dump());
    TinyLMConfig config = config_from_json(header.at("config"));
    config.validate();
    ckpt.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (hex64(ckpt.vocab.hash()) != header.at("vocab_hash").get<std::string>())
      throw ParseError("checkpoint: vocabulary hash mismatch");
    if (ckpt.vocab.size() != config.vocab_size) throw ParseError("checkpoint: vocabulary size mismatch");

    TinyLMParams params = init_params(config);
    const auto& manifest = header.at("tensors");
    std::size_t idx = 0;
    std::size_t at = 8 + head_len;
    std::size_t needed = at;
    params.for_each([&](const std::string& name, Mat& m) {
      if (idx >= manifest.size() || manifest[idx].at("name").get<std::string>() != name ||
          manifest[idx].at("rows").get<Eigen::Index>() != m.rows() ||
          manifest[idx].at("cols").get<Eigen::Index>() != m.cols())
        throw ParseError("checkpoint: tensor manifest mismatch at '" + name + "'");
      needed += 8 * static_cast<std::size_t>(m.size());
      ++idx;
    });
    if (idx != manifest.size()) throw ParseError("checkpoint: unexpected extra tensors");
    std::vector<PromptTable> prompts;
    for (const auto& pj : header.at("prompts")) {
      PromptTable t;
      t.name = pj.at("name").get<std::string>();
      auto rows = pj.at("rows").get<Eigen::Index>();
      auto cols = pj.at("cols").get<Eigen::Index>();
      if (rows < 1 || cols != config.d_model) throw ParseError("checkpoint: bad prompt table shape for '" + t.name + "'");
      t.vectors.resize(rows, cols);
      needed += 8 * static_cast<std::size_t>(rows * cols);
      prompts.push_back(std::move(t));
    }
    if (bytes.size() != needed)
      throw ParseError("checkpoint: body is " + std::to_string(bytes.size()) + " bytes, expected " +
                       std::to_string(needed));
    params.for_each([&](const std::string&, Mat& m) { get_tensor(bytes, at, m); });
    for (auto& p : prompts) get_tensor(bytes, at, p.vectors);
    ckpt.params = std::move(params);
    ckpt.prompts = std::move(prompts);
    if (header.contains("train")) ckpt.train_info = header.at("train");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: header: ") + e.what());
  } catch (const ValidationError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const TinyLMCheckpoint& ckpt, const std::filesystem::path& path) {
  std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed for " + path.string());
}

TinyLMCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace capenrich
