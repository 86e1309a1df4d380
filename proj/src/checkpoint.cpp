#include "gennli/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gennli {

namespace {

constexpr char kMagic[8] = {'G', 'N', 'L', 'I', 'C', 'K', 'P', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab) {
  if (vocab.size() != params.vocab_size() || vocab.n_labels() != params.n_labels()) {
    throw std::invalid_argument("save_checkpoint: vocabulary and parameters disagree on sizes");
  }
  nlohmann::json header;
  header["dims"] = {{"d_w", params.embed_dim()}, {"d", params.hidden_dim()}, {"d_y", params.label_dim()}};
  header["labels"] = vocab.labels();
  header["tokens"] = vocab.regular_tokens();
  nlohmann::json tensors = nlohmann::json::array();
  params.for_each([&tensors](const std::string& name, const ad::Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}});
  });
  header["tensors"] = tensors;

  const std::string header_bytes = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint64_t len = header_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_bytes.data(), static_cast<std::streamsize>(len));
  params.for_each([&out](const std::string&, const ad::Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.data().size() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("error while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_bytes(len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint header");

  nlohmann::json header = nlohmann::json::parse(header_bytes);
  const int d_w = header.at("dims").at("d_w").get<int>();
  const int d = header.at("dims").at("d").get<int>();
  const int d_y = header.at("dims").at("d_y").get<int>();
  auto labels = header.at("labels").get<std::vector<std::string>>();
  auto tokens = header.at("tokens").get<std::vector<std::string>>();

  Checkpoint ckpt;
  ckpt.vocab = Vocabulary(std::move(labels), std::move(tokens));

  ModelInit init;
  init.vocab_size = ckpt.vocab.size();
  init.n_labels = ckpt.vocab.n_labels();
  init.embed_dim = d_w;
  init.hidden_dim = d;
  init.label_dim = d_y;
  ckpt.params = init_params(init);

  size_t tensor_index = 0;
  const nlohmann::json& tensors = header.at("tensors");
  ckpt.params.for_each([&](const std::string& name, ad::Tensor& t) {
    if (tensor_index >= tensors.size()) throw std::runtime_error(path + ": tensor index shorter than model");
    const nlohmann::json& entry = tensors[tensor_index++];
    if (entry.at("name").get<std::string>() != name) {
      throw std::runtime_error(path + ": unexpected tensor order, found '" +
                               entry.at("name").get<std::string>() + "' where '" + name + "' belongs");
    }
    const auto shape = entry.at("shape").get<ad::Shape>();
    if (shape != t.shape()) {
      throw std::runtime_error(path + ": shape mismatch for tensor '" + name + "'");
    }
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.data().size() * sizeof(double)));
  });
  if (!in || tensor_index != tensors.size()) throw std::runtime_error(path + ": truncated checkpoint data");
  return ckpt;
}

}  // namespace gennli
