#include "capenrich/embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "capenrich/error.hpp"
#include "capenrich/random.hpp"

namespace capenrich {

namespace {

constexpr std::string_view kMagic = "EMB1";

bool is_punctuation(std::string_view tok) {
  return tok.size() == 1 && std::string_view(",.!?;:").find(tok[0]) != std::string_view::npos;
}

std::uint32_t read_le(std::string_view in, std::size_t at, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void write_le(std::string& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

bool EmbeddingTable::insert(const std::string& id, const Eigen::VectorXd& vector) {
  if (dim_ == 0) dim_ = static_cast<int>(vector.size());
  if (vector.size() != dim_)
    throw ValidationError("embedding '" + id + "' has dim " + std::to_string(vector.size()) + ", table dim is " +
                          std::to_string(dim_));
  std::vector<float> raw(vector.size());
  Eigen::VectorXd unit(vector.size());
  for (Eigen::Index i = 0; i < vector.size(); ++i) {
    raw[i] = static_cast<float>(vector(i));
    unit(i) = raw[i];
  }
  double norm = unit.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("embedding '" + id + "' cannot be normalized");
  unit /= norm;
  auto it = index_.find(id);
  if (it != index_.end()) {
    raw_[it->second] = std::move(raw);
    unit_[it->second] = std::move(unit);
    return true;
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  raw_.push_back(std::move(raw));
  unit_.push_back(std::move(unit));
  return false;
}

const Eigen::VectorXd& EmbeddingTable::at(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ValidationError("no embedding for id '" + std::string(id) + "'");
  return unit_[it->second];
}

const std::vector<float>& EmbeddingTable::raw(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ValidationError("no embedding for id '" + std::string(id) + "'");
  return raw_[it->second];
}

LoadedEmbeddings parse_embeddings(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != kMagic) throw ParseError("embeddings: bad header");
  std::uint32_t count = read_le(bytes, 4, 4);
  std::uint32_t dim = read_le(bytes, 8, 4);
  if (dim == 0) throw ParseError("embeddings: zero dimension");
  LoadedEmbeddings out{EmbeddingTable(static_cast<int>(dim)), 0};
  std::size_t at = 12;
  for (std::uint32_t r = 0; r < count; ++r) {
    if (at + 2 > bytes.size()) throw ParseError("embeddings: truncated at record " + std::to_string(r));
    std::size_t len = read_le(bytes, at, 2);
    at += 2;
    if (at + len + 4ULL * dim > bytes.size()) throw ParseError("embeddings: truncated at record " + std::to_string(r));
    std::string id(bytes.substr(at, len));
    at += len;
    Eigen::VectorXd v(dim);
    for (std::uint32_t k = 0; k < dim; ++k, at += 4) v(k) = std::bit_cast<float>(read_le(bytes, at, 4));
    if (out.table.insert(id, v)) ++out.duplicates;
  }
  if (at != bytes.size()) throw ParseError("embeddings: trailing bytes after the last record");
  return out;
}

LoadedEmbeddings load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embeddings(ss.str());
}

std::string serialize_embeddings(const EmbeddingTable& table) {
  std::string out(kMagic);
  write_le(out, static_cast<std::uint32_t>(table.size()), 4);
  write_le(out, static_cast<std::uint32_t>(table.dim()), 4);
  for (const auto& id : table.ids()) {
    if (id.size() > 0xffff) throw ValidationError("embedding id too long: " + id.substr(0, 32) + "...");
    write_le(out, static_cast<std::uint32_t>(id.size()), 2);
    out += id;
    for (float f : table.raw(id)) write_le(out, std::bit_cast<std::uint32_t>(f), 4);
  }
  return out;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::string bytes = serialize_embeddings(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Eigen::VectorXd toy_text_embed(std::span<const std::string> seq, int dim, std::uint64_t seed) {
  if (dim < 8) throw ValidationError("toy_text_embed: dim must be >= 8");
  // Count-weighted sum in token order, so repeating a text scales the sum exactly.
  std::map<std::string_view, int> counts;
  for (const auto& tok : seq)
    if (!is_punctuation(tok)) ++counts[tok];
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& [tok, n] : counts) {
    Rng rng(fnv1a(tok.data(), tok.size()) ^ (seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
    for (int i = 0; i < dim; ++i) sum(i) += n * rng.normal();
  }
  double norm = sum.norm();
  if (!(norm > 0.0)) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(0) = 1.0;
    return e;
  }
  return sum / norm;
}

Eigen::VectorXd toy_image_embed(const CaptionSet& caption_set, int dim, std::uint64_t seed) {
  if (caption_set.captions.empty()) throw ValidationError("toy_image_embed: image without captions");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& c : caption_set.captions) sum += toy_text_embed(tokenize(c), dim, seed);
  sum /= static_cast<double>(caption_set.captions.size());
  double norm = sum.norm();
  if (!(norm > 0.0)) return toy_text_embed({}, dim, seed);
  return sum / norm;
}

Eigen::VectorXd TextEmbedder::operator()(std::string_view text) const {
  return toy_text_embed(tokenize(text), dim, seed);
}

Eigen::VectorXd TextEmbedder::operator()(std::span<const std::string> tokens) const {
  return toy_text_embed(tokens, dim, seed);
}

double sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ValidationError("sim: dimension mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                          ")");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double clip_score(const Eigen::VectorXd& image, const Eigen::VectorXd& text, double w) {
  return w * std::max(sim(image, text), 0.0);
}

double ref_clip_score(const Eigen::VectorXd& image, const Eigen::VectorXd& candidate,
                      std::span<const Eigen::VectorXd> references, double w) {
  if (references.empty()) throw ValidationError("ref_clip_score: no references");
  double image_side = clip_score(image, candidate, w);
  double best = -1.0;
  for (const auto& r : references) best = std::max(best, sim(candidate, r));
  double text_side = std::max(best, 0.0);
  if (image_side <= 0.0 || text_side <= 0.0) return 0.0;
  return 2.0 * image_side * text_side / (image_side + text_side);
}

}  // namespace capenrich
