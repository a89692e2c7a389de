// Checkpoint layout (little-endian):
//   "DCQC" | u32 version | u32 config length | config JSON
//   blocks: u16 name length | name | u8 rank | u32 dims[rank] | f64 payload
//   u32 CRC32 of everything before it

#include <algorithm>
#include <map>

#include <zlib.h>

#include "dcq/binary_io.hpp"
#include "dcq/trainer.hpp"

namespace dcq {

namespace {

struct Block {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

void put_block(ByteWriter& w, const std::string& name, const std::vector<std::uint32_t>& dims, const double* data,
               std::size_t n) {
  w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
  w.put_bytes(name);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) w.put<std::uint32_t>(d);
  for (std::size_t i = 0; i < n; ++i) w.put_f64(data[i]);
}

void put_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
  put_block(w, name, {static_cast<std::uint32_t>(t.rows()), static_cast<std::uint32_t>(t.cols())}, t.data(),
            static_cast<std::size_t>(t.size()));
}

void put_vector(ByteWriter& w, const std::string& name, const std::vector<double>& v) {
  put_block(w, name, {static_cast<std::uint32_t>(v.size())}, v.data(), v.size());
}

double lo32(std::uint64_t v) { return static_cast<double>(static_cast<std::uint32_t>(v)); }
double hi32(std::uint64_t v) { return static_cast<double>(static_cast<std::uint32_t>(v >> 32)); }
std::uint64_t join32(double lo, double hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | static_cast<std::uint64_t>(lo);
}

std::uint32_t crc_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

class BlockTable {
 public:
  explicit BlockTable(std::map<std::string, Block> blocks) : blocks_(std::move(blocks)) {}

  bool has(const std::string& name) const { return blocks_.contains(name); }

  const Block& get(const std::string& name) const {
    auto it = blocks_.find(name);
    if (it == blocks_.end()) throw IntegrityError("checkpoint missing block '" + name + "'");
    return it->second;
  }

  Tensor tensor(const std::string& name, Index rows, Index cols) const {
    const Block& b = get(name);
    if (b.dims.size() != 2 || b.dims[0] != rows || b.dims[1] != cols) {
      throw IntegrityError("checkpoint block '" + name + "' has unexpected shape");
    }
    Tensor t(rows, cols);
    std::copy(b.data.begin(), b.data.end(), t.data());
    return t;
  }

  const std::vector<double>& vector(const std::string& name, std::size_t n) const {
    const Block& b = get(name);
    if (b.dims.size() != 1 || b.dims[0] != n) throw IntegrityError("checkpoint block '" + name + "' has unexpected size");
    return b.data;
  }

 private:
  std::map<std::string, Block> blocks_;
};

MlpParams read_params(const BlockTable& t, const std::string& prefix, const MlpParams& like) {
  MlpParams p = like;
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    p.tensors[i] = t.tensor(prefix + like.tensor_name(i), like.tensors[i].rows(), like.tensors[i].cols());
  }
  return p;
}

}  // namespace

std::string encode_checkpoint(const TrainingState& s) {
  ByteWriter w;
  w.put_bytes("DCQC");
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string config = to_json(s.config).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.put_bytes(config);

  for (std::size_t i = 0; i < s.extractor.tensors.size(); ++i) {
    put_tensor(w, "extractor." + s.extractor.tensor_name(i), s.extractor.tensors[i]);
  }
  if (s.generator) {
    for (std::size_t i = 0; i < s.generator->shadow.tensors.size(); ++i) {
      put_tensor(w, "generator." + s.generator->shadow.tensor_name(i), s.generator->shadow.tensors[i]);
    }
  }
  for (std::size_t i = 0; i < s.optimizer.velocity.size(); ++i) {
    put_tensor(w, "optimizer." + std::to_string(i), s.optimizer.velocity[i]);
  }
  if (s.queue) {
    put_tensor(w, "queue.weights", s.queue->weights());
    std::vector<double> labels(s.queue->labels().begin(), s.queue->labels().end());
    put_vector(w, "queue.labels", labels);
    put_vector(w, "queue.state",
               {static_cast<double>(s.queue->cursor()), lo32(s.queue->enqueued()), hi32(s.queue->enqueued())});
  }
  if (s.head) put_tensor(w, "head.weight", s.head->weight);
  put_vector(w, "counters", {static_cast<double>(s.epoch), lo32(s.step), hi32(s.step)});

  Tensor history(static_cast<Index>(s.history.size()), 7);
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& m = s.history[i];
    history.row(static_cast<Index>(i)) << m.epoch, m.lr, m.train_loss, m.ver_acc, m.id_rank1, m.wall_seconds,
        m.tail_rank1;
  }
  put_tensor(w, "history", history);

  w.put<std::uint32_t>(crc_of(w.bytes()));
  return w.bytes();
}

TrainingState decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16) throw IntegrityError("checkpoint truncated");
  ByteReader header(bytes);
  if (header.get_bytes(4) != "DCQC") throw IntegrityError("not a DCQC checkpoint");
  const auto version = header.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is incompatible with version " +
                       std::to_string(kCheckpointVersion));
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  ByteReader trailer(bytes.substr(bytes.size() - 4));
  if (trailer.get<std::uint32_t>() != crc_of(body)) throw IntegrityError("checkpoint checksum mismatch");

  ByteReader r(body);
  r.get_bytes(8);
  const auto config_len = r.get<std::uint32_t>();
  const auto config_text = r.get_bytes(config_len);
  auto config_json = nlohmann::json::parse(config_text, nullptr, false);
  if (config_json.is_discarded()) throw IntegrityError("checkpoint config is not valid JSON");
  const TrainConfig config = config_from_json(config_json);

  std::map<std::string, Block> blocks;
  while (r.remaining() > 0) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name(r.get_bytes(name_len));
    const auto rank = r.get<std::uint8_t>();
    Block b;
    std::size_t n = 1;
    for (int i = 0; i < rank; ++i) {
      b.dims.push_back(r.get<std::uint32_t>());
      n *= b.dims.back();
    }
    if (n > r.remaining() / 8) throw IntegrityError("checkpoint block '" + name + "' overruns the file");
    b.data.resize(n);
    for (auto& v : b.data) v = r.get_f64();
    blocks.emplace(std::move(name), std::move(b));
  }
  const BlockTable table(std::move(blocks));

  TrainingState s;
  s.config = config;
  const MlpParams like = init_extractor(config.layer_dims(), 0);
  s.extractor = read_params(table, "extractor.", like);
  if (config.method == Method::dcq) {
    s.generator = EmaGenerator{read_params(table, "generator.", like), config.alpha};
    const auto& labels = table.vector("queue.labels", static_cast<std::size_t>(config.K));
    const auto& qs = table.vector("queue.state", 3);
    s.queue = ClassQueue::restore(table.tensor("queue.weights", config.D, config.K),
                                  std::vector<std::int64_t>(labels.begin(), labels.end()), static_cast<Index>(qs[0]),
                                  join32(qs[1], qs[2]));
  } else {
    const Block& head = table.get("head.weight");
    if (head.dims.size() != 2) throw IntegrityError("head weight must be a matrix");
    s.head = FcHead{table.tensor("head.weight", config.D, head.dims[1])};
  }
  std::vector<Tensor> shapes = like.tensors;
  if (s.head) shapes.push_back(s.head->weight);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    s.optimizer.velocity.push_back(table.tensor("optimizer." + std::to_string(i), shapes[i].rows(), shapes[i].cols()));
  }
  if (table.has("optimizer." + std::to_string(shapes.size()))) {
    throw IntegrityError("checkpoint carries optimizer state for unknown parameters");
  }
  const auto& counters = table.vector("counters", 3);
  s.epoch = static_cast<int>(counters[0]);
  s.step = join32(counters[1], counters[2]);
  const Block& hist = table.get("history");
  if (hist.dims.size() != 2 || hist.dims[1] != 7) throw IntegrityError("bad history block");
  for (std::uint32_t i = 0; i < hist.dims[0]; ++i) {
    const double* row = hist.data.data() + 7 * i;
    s.history.push_back({static_cast<int>(row[0]), row[1], row[2], row[3], row[4], row[5], row[6]});
  }
  return s;
}

void save_checkpoint(const std::string& path, const TrainingState& state) {
  write_file_atomic(path, encode_checkpoint(state));
}

TrainingState load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace dcq
